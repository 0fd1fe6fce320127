//! Mapping advisories onto a resolved tree.
//!
//! A *vulnerable point* is a `name@version` in the tree affected by at least
//! one advisory. A *vulnerable path* is a simple dependency chain from the
//! root to such a point. Paths are enumerated over the logical tree — nodes
//! are identities, so several physical copies of the same `name@version`
//! collapse into one vertex.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::graph::{DepGraph, Timestamp};
use crate::semver::{Constraint, ConstraintKind};
use crate::tree::{DependencyTree, PackageId};

/// Default ceiling on enumerated paths per tree; dense graphs can hold
/// exponentially many.
pub const DEFAULT_PATH_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VulnerablePoint {
    pub id: PackageId,
    pub vuln_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct VulnerablePath {
    /// Root first, vulnerable point last.
    pub nodes: Vec<PackageId>,
    /// Edge labels along the path; `constraints[i]` leads into
    /// `nodes[i + 1]`.
    pub constraints: Vec<String>,
    /// Advisories on the endpoint.
    pub vuln_ids: BTreeSet<String>,
}

impl VulnerablePath {
    /// Number of dependency steps from the root.
    pub fn len(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn endpoint(&self) -> &PackageId {
        self.nodes.last().expect("paths are never empty")
    }

    pub fn render(&self) -> String {
        self.nodes
            .iter()
            .map(|id| id.to_string())
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PathSearch {
    pub paths: Vec<VulnerablePath>,
    /// True when enumeration stopped at the cap; counts are lower bounds.
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PathMetrics {
    pub point_count: usize,
    pub path_count: usize,
    /// Paths divided by non-root points (a vulnerable root is a zero-step
    /// point and takes no part in path statistics).
    pub paths_per_point: f64,
    /// Distinct direct dependencies of the root that start at least one
    /// vulnerable path.
    pub distinct_direct_deps: usize,
    pub min_path_len: usize,
    pub max_path_len: usize,
    pub mean_path_len: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub root: PackageId,
    pub resolved_at: Option<Timestamp>,
    pub points: Vec<VulnerablePoint>,
    pub paths: Vec<VulnerablePath>,
    pub truncated: bool,
    pub metrics: PathMetrics,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.points.is_empty()
    }
}

/// Every identity in the tree affected by at least one advisory, sorted.
/// The root itself can be a point.
pub fn find_vulnerable_points(graph: &DepGraph, tree: &DependencyTree) -> Vec<VulnerablePoint> {
    tree.identities()
        .into_iter()
        .filter_map(|id| {
            let vuln_ids = graph.vuln_ids_of(&id.name, &id.version);
            (!vuln_ids.is_empty()).then_some(VulnerablePoint { id, vuln_ids })
        })
        .collect()
}

/// Enumerate simple root-to-point paths by depth-first search backwards
/// from each point. `cap` bounds the total across all points.
pub fn find_vulnerable_paths(
    tree: &DependencyTree,
    points: &[VulnerablePoint],
    cap: usize,
) -> PathSearch {
    // Reverse logical adjacency: target identity -> depender identity ->
    // smallest edge label (labels between one identity pair are almost
    // always unique; the minimum makes the choice deterministic).
    let mut radj: BTreeMap<PackageId, BTreeMap<PackageId, String>> = BTreeMap::new();
    for (from, to, constraint) in tree.identity_edges() {
        let label = radj.entry(to).or_default().entry(from).or_insert(constraint.clone());
        if constraint < *label {
            *label = constraint;
        }
    }

    let mut search = PathSearch::default();
    for point in points {
        if point.id == tree.root {
            // A vulnerable root is a zero-step point; it has no paths.
            continue;
        }
        let mut trail = vec![point.id.clone()];
        let mut on_trail: BTreeSet<PackageId> = trail.iter().cloned().collect();
        let done = walk_back(
            &point.id,
            tree,
            &radj,
            point,
            &mut trail,
            &mut on_trail,
            cap,
            &mut search,
        );
        if done {
            break;
        }
    }
    search.paths.sort();
    search
}

/// Returns true when the cap was hit and enumeration must stop entirely.
#[allow(clippy::too_many_arguments)]
fn walk_back(
    current: &PackageId,
    tree: &DependencyTree,
    radj: &BTreeMap<PackageId, BTreeMap<PackageId, String>>,
    point: &VulnerablePoint,
    trail: &mut Vec<PackageId>,
    on_trail: &mut BTreeSet<PackageId>,
    cap: usize,
    search: &mut PathSearch,
) -> bool {
    if *current == tree.root {
        if search.paths.len() >= cap {
            search.truncated = true;
            return true;
        }
        let nodes: Vec<PackageId> = trail.iter().rev().cloned().collect();
        let constraints = nodes
            .windows(2)
            .map(|w| radj[&w[1]][&w[0]].clone())
            .collect();
        search.paths.push(VulnerablePath {
            nodes,
            constraints,
            vuln_ids: point.vuln_ids.clone(),
        });
        return false;
    }
    let Some(preds) = radj.get(current) else {
        return false;
    };
    for pred in preds.keys() {
        if on_trail.contains(pred) {
            continue;
        }
        trail.push(pred.clone());
        on_trail.insert(pred.clone());
        let stop = walk_back(pred, tree, radj, point, trail, on_trail, cap, search);
        trail.pop();
        on_trail.remove(pred);
        if stop {
            return true;
        }
    }
    false
}

pub fn path_metrics(points: &[VulnerablePoint], paths: &[VulnerablePath], root: &PackageId) -> PathMetrics {
    let mut metrics = PathMetrics {
        point_count: points.len(),
        path_count: paths.len(),
        ..PathMetrics::default()
    };
    let eligible = points.iter().filter(|p| p.id != *root).count();
    if eligible > 0 {
        metrics.paths_per_point = paths.len() as f64 / eligible as f64;
    }
    metrics.distinct_direct_deps = paths
        .iter()
        .filter_map(|p| p.nodes.get(1))
        .collect::<BTreeSet<_>>()
        .len();
    if !paths.is_empty() {
        let lengths: Vec<usize> = paths.iter().map(VulnerablePath::len).collect();
        metrics.min_path_len = *lengths.iter().min().unwrap();
        metrics.max_path_len = *lengths.iter().max().unwrap();
        metrics.mean_path_len = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
    }
    metrics
}

/// Points, paths and metrics for one tree in a single call.
pub fn audit_tree(graph: &DepGraph, tree: &DependencyTree, cap: usize) -> AuditReport {
    let points = find_vulnerable_points(graph, tree);
    let search = find_vulnerable_paths(tree, &points, cap);
    let metrics = path_metrics(&points, &search.paths, &tree.root);
    AuditReport {
        root: tree.root.clone(),
        resolved_at: tree.resolved_at,
        points,
        paths: search.paths,
        truncated: search.truncated,
        metrics,
    }
}

/// Does the last step of this path pin an exact version? Used by fate
/// classification: exact pins cannot drift to a fixed version on their own.
pub fn exact_constraint_count(path: &VulnerablePath) -> usize {
    path.constraints
        .iter()
        .filter(|raw| {
            matches!(
                Constraint::parse(raw),
                Ok(Constraint {
                    kind: ConstraintKind::Exact(_),
                    ..
                })
            )
        })
        .count()
}
