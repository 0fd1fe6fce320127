//! Ground truth for vulnerable-path enumeration: a generator for small
//! random trees and a brute-force forward walk that lists every simple
//! root-to-point chain over the logical (identity-level) graph.

use std::collections::{BTreeMap, BTreeSet};

use canopy::audit::{VulnerablePath, VulnerablePoint};
use canopy::semver::Version;
use canopy::tree::{DependencyTree, InstallPath, PackageId, TreeEdge, TreeNode};
use rand::Rng;

const NAMES: [&str; 6] = ["p0", "p1", "p2", "p3", "p4", "p5"];
const VERSIONS: [&str; 4] = ["1.0.0", "1.1.0", "2.0.0", "3.0.0"];
const LABELS: [&str; 6] = ["*", "^1.0.0", "~1.1.0", "=1.0.0", ">=0.1.0", "^2.0.0"];

/// A random tree of at most 12 physical nodes. Identities may repeat at
/// several paths, edges may run in any direction (cycles included at the
/// identity level), and parallel edges may carry different labels.
pub fn gen_tree(rng: &mut impl Rng) -> DependencyTree {
    let mut identities: BTreeSet<(usize, usize)> = BTreeSet::new();
    let want = rng.gen_range(2..=9);
    while identities.len() < want {
        identities.insert((rng.gen_range(0..NAMES.len()), rng.gen_range(0..VERSIONS.len())));
    }
    let ids: Vec<PackageId> = identities
        .iter()
        .map(|&(n, v)| PackageId::new(NAMES[n], Version::parse(VERSIONS[v]).unwrap()))
        .collect();

    let root = ids[rng.gen_range(0..ids.len())].clone();
    let mut tree = DependencyTree::new(root.clone(), None);
    let mut used_paths: BTreeSet<InstallPath> = [InstallPath::root()].into();
    let mut placed: Vec<InstallPath> = vec![InstallPath::root()];

    for id in ids.iter().filter(|id| **id != root) {
        let copies = if rng.gen_bool(0.3) { 2 } else { 1 };
        for _ in 0..copies {
            if tree.nodes.len() >= 12 {
                break;
            }
            let base = placed[rng.gen_range(0..placed.len())].clone();
            let path = base.child(&id.name);
            if !used_paths.insert(path.clone()) {
                continue;
            }
            tree.nodes.push(TreeNode {
                name: id.name.clone(),
                version: id.version.clone(),
                path: path.clone(),
            });
            placed.push(path);
        }
    }

    // Every non-root node gets an incoming edge, then some extra edges on
    // top — direction and endpoints unconstrained.
    for i in 1..placed.len() {
        let from = placed[rng.gen_range(0..placed.len())].clone();
        tree.edges.push(TreeEdge {
            from,
            to: placed[i].clone(),
            constraint: LABELS[rng.gen_range(0..LABELS.len())].to_string(),
        });
    }
    for _ in 0..rng.gen_range(0..=6) {
        let from = placed[rng.gen_range(0..placed.len())].clone();
        let to = placed[rng.gen_range(0..placed.len())].clone();
        tree.edges.push(TreeEdge {
            from,
            to,
            constraint: LABELS[rng.gen_range(0..LABELS.len())].to_string(),
        });
    }
    tree.canonicalize();
    tree
}

/// A random non-empty set of vulnerable points over the tree's identities.
pub fn gen_points(rng: &mut impl Rng, tree: &DependencyTree) -> Vec<VulnerablePoint> {
    let ids: Vec<PackageId> = tree.identities().into_iter().collect();
    let mut chosen: Vec<PackageId> = ids.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
    if chosen.is_empty() {
        chosen.push(ids[rng.gen_range(0..ids.len())].clone());
    }
    chosen
        .into_iter()
        .map(|id| {
            let mut vuln_ids = BTreeSet::new();
            for i in 0..rng.gen_range(1..=2) {
                vuln_ids.insert(format!("ADV-{}-{i}", id.name));
            }
            VulnerablePoint { id, vuln_ids }
        })
        .collect()
}

/// Forward adjacency over identities with parallel edges collapsed to the
/// smallest label, built straight from the physical edges.
fn forward_adjacency(tree: &DependencyTree) -> BTreeMap<PackageId, BTreeMap<PackageId, String>> {
    let by_path: BTreeMap<&InstallPath, PackageId> =
        tree.nodes.iter().map(|n| (&n.path, n.id())).collect();
    let mut adj: BTreeMap<PackageId, BTreeMap<PackageId, String>> = BTreeMap::new();
    for edge in &tree.edges {
        let (Some(from), Some(to)) = (by_path.get(&edge.from), by_path.get(&edge.to)) else {
            continue;
        };
        let slot = adj
            .entry(from.clone())
            .or_default()
            .entry(to.clone())
            .or_insert_with(|| edge.constraint.clone());
        if edge.constraint < *slot {
            *slot = edge.constraint.clone();
        }
    }
    adj
}

/// Exhaustively enumerate simple paths from the root, recording every
/// prefix that ends on a (non-root) vulnerable point. Returned sorted.
pub fn all_vulnerable_paths(
    tree: &DependencyTree,
    points: &[VulnerablePoint],
) -> Vec<VulnerablePath> {
    let adj = forward_adjacency(tree);
    let by_id: BTreeMap<&PackageId, &VulnerablePoint> =
        points.iter().map(|p| (&p.id, p)).collect();
    let mut found = Vec::new();
    let mut trail = vec![tree.root.clone()];
    let mut labels: Vec<String> = Vec::new();
    let mut on_trail: BTreeSet<PackageId> = trail.iter().cloned().collect();
    walk(
        &tree.root,
        tree,
        &adj,
        &by_id,
        &mut trail,
        &mut labels,
        &mut on_trail,
        &mut found,
    );
    found.sort();
    found
}

#[allow(clippy::too_many_arguments)]
fn walk(
    current: &PackageId,
    tree: &DependencyTree,
    adj: &BTreeMap<PackageId, BTreeMap<PackageId, String>>,
    by_id: &BTreeMap<&PackageId, &VulnerablePoint>,
    trail: &mut Vec<PackageId>,
    labels: &mut Vec<String>,
    on_trail: &mut BTreeSet<PackageId>,
    found: &mut Vec<VulnerablePath>,
) {
    if *current != tree.root {
        if let Some(point) = by_id.get(current) {
            found.push(VulnerablePath {
                nodes: trail.clone(),
                constraints: labels.clone(),
                vuln_ids: point.vuln_ids.clone(),
            });
        }
    }
    let Some(succs) = adj.get(current) else {
        return;
    };
    for (next, label) in succs {
        if on_trail.contains(next) {
            continue;
        }
        trail.push(next.clone());
        labels.push(label.clone());
        on_trail.insert(next.clone());
        walk(next, tree, adj, by_id, trail, labels, on_trail, found);
        trail.pop();
        labels.pop();
        on_trail.remove(next);
    }
}
