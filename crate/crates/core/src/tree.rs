//! Physical dependency trees: what an installer would put on disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::Timestamp;
use crate::semver::Version;

/// Where a package sits on disk, as the chain of package names leading to
/// it. The root package is the empty chain; a package `d` nested inside
/// `b`'s `node_modules` is `["b", "d"]`, rendered
/// `node_modules/b/node_modules/d`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstallPath(Vec<String>);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("`{input}` is not an install path")]
pub struct InstallPathError {
    input: String,
}

impl InstallPath {
    pub fn root() -> InstallPath {
        InstallPath(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// The last segment: the name of the package installed here.
    pub fn leaf(&self) -> Option<&str> {
        self.0.last().map(String::as_str)
    }

    pub fn child(&self, name: &str) -> InstallPath {
        let mut segments = self.0.clone();
        segments.push(name.to_string());
        InstallPath(segments)
    }

    pub fn is_prefix_of(&self, other: &InstallPath) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Every prefix from the root (inclusive) down to this path (inclusive).
    pub fn prefixes(&self) -> impl DoubleEndedIterator<Item = InstallPath> + '_ {
        (0..=self.0.len()).map(|n| InstallPath(self.0[..n].to_vec()))
    }

    pub fn render(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<InstallPath, InstallPathError> {
        if text.is_empty() {
            return Ok(InstallPath::root());
        }
        let err = || InstallPathError {
            input: text.to_string(),
        };
        let rest = text.strip_prefix("node_modules/").ok_or_else(err)?;
        let segments: Vec<String> = rest.split("/node_modules/").map(String::from).collect();
        if segments.iter().any(|s| s.is_empty() || s.contains('/')) {
            return Err(err());
        }
        Ok(InstallPath(segments))
    }
}

impl fmt::Display for InstallPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, segment) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            f.write_str("node_modules/")?;
            f.write_str(segment)?;
        }
        Ok(())
    }
}

impl FromStr for InstallPath {
    type Err = InstallPathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InstallPath::parse(s)
    }
}

impl Serialize for InstallPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InstallPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        InstallPath::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// A `name@version` pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PackageId {
    pub name: String,
    pub version: Version,
}

impl PackageId {
    pub fn new(name: impl Into<String>, version: Version) -> PackageId {
        PackageId {
            name: name.into(),
            version,
        }
    }
}

impl fmt::Display for PackageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.version)
    }
}

/// One installed package.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub name: String,
    pub version: Version,
    pub path: InstallPath,
}

impl TreeNode {
    pub fn id(&self) -> PackageId {
        PackageId::new(self.name.clone(), self.version.clone())
    }
}

/// One dependency relation between two installed packages, labeled with the
/// constraint that produced it. Nodes are referenced by install path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TreeEdge {
    pub from: InstallPath,
    pub to: InstallPath,
    pub constraint: String,
}

/// A dependency link that could not be resolved; the tree was built without
/// it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Install path of the package whose dependency failed.
    pub at: InstallPath,
    pub library: String,
    pub constraint: String,
    pub reason: String,
}

/// A resolved dependency tree in canonical order: nodes sorted by install
/// path, edges by (from, to, constraint).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyTree {
    pub root: PackageId,
    pub resolved_at: Option<Timestamp>,
    pub nodes: Vec<TreeNode>,
    pub edges: Vec<TreeEdge>,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

impl DependencyTree {
    pub fn new(root: PackageId, resolved_at: Option<Timestamp>) -> DependencyTree {
        let root_node = TreeNode {
            name: root.name.clone(),
            version: root.version.clone(),
            path: InstallPath::root(),
        };
        DependencyTree {
            root,
            resolved_at,
            nodes: vec![root_node],
            edges: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn canonicalize(&mut self) {
        self.nodes.sort_by(|a, b| a.path.cmp(&b.path));
        self.nodes.dedup();
        self.edges.sort();
        self.edges.dedup();
        self.diagnostics
            .sort_by(|a, b| (&a.at, &a.library).cmp(&(&b.at, &b.library)));
    }

    pub fn node_at(&self, path: &InstallPath) -> Option<&TreeNode> {
        self.nodes.iter().find(|n| n.path == *path)
    }

    /// Distinct `name@version` identities in the tree, root included.
    pub fn identities(&self) -> BTreeSet<PackageId> {
        self.nodes.iter().map(TreeNode::id).collect()
    }

    /// All install paths of one identity, rendered.
    pub fn paths_of(&self, id: &PackageId) -> Vec<String> {
        self.nodes
            .iter()
            .filter(|n| n.name == id.name && n.version == id.version)
            .map(|n| n.path.render())
            .collect()
    }

    /// Edges lifted to identities: `(from id, to id, constraint)`.
    pub fn identity_edges(&self) -> BTreeSet<(PackageId, PackageId, String)> {
        let by_path: BTreeMap<&InstallPath, &TreeNode> =
            self.nodes.iter().map(|n| (&n.path, n)).collect();
        self.edges
            .iter()
            .filter_map(|e| {
                let from = by_path.get(&e.from)?;
                let to = by_path.get(&e.to)?;
                Some((from.id(), to.id(), e.constraint.clone()))
            })
            .collect()
    }
}

/// A node identity whose install locations differ between two trees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MovedNode {
    pub id: String,
    pub paths_a: Vec<String>,
    pub paths_b: Vec<String>,
}

/// Set-level difference between two trees. Resolution metadata
/// (`resolved_at`, diagnostics) is deliberately not compared.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TreeDiff {
    pub roots_differ: bool,
    pub nodes_only_in_a: Vec<String>,
    pub nodes_only_in_b: Vec<String>,
    pub edges_only_in_a: Vec<String>,
    pub edges_only_in_b: Vec<String>,
    pub moved: Vec<MovedNode>,
    pub exact_match: bool,
}

pub fn compare_trees(a: &DependencyTree, b: &DependencyTree) -> TreeDiff {
    let mut diff = TreeDiff {
        roots_differ: a.root != b.root,
        ..TreeDiff::default()
    };

    let ids_a = a.identities();
    let ids_b = b.identities();
    diff.nodes_only_in_a = ids_a.difference(&ids_b).map(|id| id.to_string()).collect();
    diff.nodes_only_in_b = ids_b.difference(&ids_a).map(|id| id.to_string()).collect();

    let edges_a = a.identity_edges();
    let edges_b = b.identity_edges();
    let render = |(from, to, constraint): &(PackageId, PackageId, String)| {
        format!("{from} -> {to} ({constraint})")
    };
    diff.edges_only_in_a = edges_a.difference(&edges_b).map(render).collect();
    diff.edges_only_in_b = edges_b.difference(&edges_a).map(render).collect();

    for id in ids_a.intersection(&ids_b) {
        let paths_a = a.paths_of(id);
        let paths_b = b.paths_of(id);
        if paths_a != paths_b {
            diff.moved.push(MovedNode {
                id: id.to_string(),
                paths_a,
                paths_b,
            });
        }
    }

    diff.exact_match = !diff.roots_differ
        && diff.nodes_only_in_a.is_empty()
        && diff.nodes_only_in_b.is_empty()
        && diff.edges_only_in_a.is_empty()
        && diff.edges_only_in_b.is_empty()
        && diff.moved.is_empty();
    diff
}
