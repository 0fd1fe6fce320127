//! Reading and writing npm-style v3 lockfiles.
//!
//! A resolved [`DependencyTree`] maps one-to-one onto the `packages` table
//! of a `package-lock.json` (lockfileVersion 3): the root package under
//! the key `""` and every other node under its `node_modules/...` path.
//! Emission is byte-deterministic — same tree, same bytes — so lockfiles
//! can be diffed and committed.
//!
//! The lockfile format does not store edge targets; `dependencies` maps
//! only record the declared constraints. [`tree_from_lockfile`] rebuilds
//! the edges the way the module loader would: walk from the depender
//! towards the root and take the nearest copy of the library that
//! satisfies the constraint.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::DepGraph;
use crate::semver::{Constraint, Version};
use crate::tree::{DependencyTree, InstallPath, PackageId, TreeEdge, TreeNode};

pub const LOCKFILE_VERSION: u32 = 3;

#[derive(Debug, Error)]
pub enum LockfileError {
    #[error("not a lockfile: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported lockfileVersion {found} (expected {LOCKFILE_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("lockfile has no root entry (key \"\")")]
    MissingRoot,
    #[error("bad package key `{key}`: {reason}")]
    BadKey { key: String, reason: String },
    #[error("`{at}` depends on `{library}`, but no reachable copy satisfies `{constraint}`")]
    DanglingDependency {
        at: String,
        library: String,
        constraint: String,
    },
}

/// One entry in the `packages` table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockEntry {
    /// Only the root entry carries its name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub version: Version,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrity: Option<String>,
    /// Declared constraints, library name to raw constraint text.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub dependencies: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lockfile {
    pub name: String,
    pub version: Version,
    #[serde(rename = "lockfileVersion")]
    pub lockfile_version: u32,
    pub requires: bool,
    pub packages: BTreeMap<String, LockEntry>,
}

/// Turn a resolved tree into lockfile form. Tarball URLs and integrity
/// hashes are filled in from the graph when it knows the version.
pub fn emit_lockfile(graph: &DepGraph, tree: &DependencyTree) -> Lockfile {
    let mut deps_of: BTreeMap<&InstallPath, BTreeMap<String, String>> = BTreeMap::new();
    for edge in &tree.edges {
        let library = match edge.to.leaf() {
            Some(name) => name.to_string(),
            None => tree.root.name.clone(),
        };
        deps_of
            .entry(&edge.from)
            .or_default()
            .insert(library, edge.constraint.clone());
    }

    let mut packages = BTreeMap::new();
    for node in &tree.nodes {
        let key = node.path.render();
        let dependencies = deps_of.remove(&node.path).unwrap_or_default();
        let entry = if node.path.is_root() {
            LockEntry {
                name: Some(node.name.clone()),
                version: node.version.clone(),
                resolved: None,
                integrity: None,
                dependencies,
            }
        } else {
            let known = graph.version(&node.name, &node.version);
            LockEntry {
                name: None,
                version: node.version.clone(),
                resolved: known.and_then(|n| n.tarball.clone()),
                integrity: known.and_then(|n| n.integrity.clone()),
                dependencies,
            }
        };
        packages.insert(key, entry);
    }

    Lockfile {
        name: tree.root.name.clone(),
        version: tree.root.version.clone(),
        lockfile_version: LOCKFILE_VERSION,
        requires: true,
        packages,
    }
}

/// Serialize with a stable layout: sorted keys, two-space indent, one
/// trailing newline. Byte-for-byte reproducible.
pub fn lockfile_bytes(lockfile: &Lockfile) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(lockfile).expect("lockfiles serialize");
    bytes.push(b'\n');
    bytes
}

pub fn read_lockfile(bytes: &[u8]) -> Result<Lockfile, LockfileError> {
    let lockfile: Lockfile = serde_json::from_slice(bytes)?;
    if lockfile.lockfile_version != LOCKFILE_VERSION {
        return Err(LockfileError::UnsupportedVersion {
            found: lockfile.lockfile_version,
        });
    }
    if !lockfile.packages.contains_key("") {
        return Err(LockfileError::MissingRoot);
    }
    Ok(lockfile)
}

/// Rebuild the tree a lockfile describes.
///
/// Nodes come straight from the `packages` keys. Each declared dependency
/// is pointed at the copy the module loader would find: the deepest
/// directory on the depender's chain holding the library with a version
/// that satisfies the constraint (constraints that cannot be tested
/// against a version, like dist-tags, accept any copy). The root package
/// itself occupies the root directory, so cycles back onto the root
/// resolve there.
pub fn tree_from_lockfile(lockfile: &Lockfile) -> Result<DependencyTree, LockfileError> {
    let root_entry = lockfile.packages.get("").ok_or(LockfileError::MissingRoot)?;
    let root_name = root_entry.name.clone().unwrap_or_else(|| lockfile.name.clone());
    let root = PackageId::new(root_name, root_entry.version.clone());
    let mut tree = DependencyTree::new(root.clone(), None);

    let mut at: BTreeMap<InstallPath, &LockEntry> = BTreeMap::new();
    for (key, entry) in &lockfile.packages {
        let path = InstallPath::parse(key).map_err(|e| LockfileError::BadKey {
            key: key.clone(),
            reason: e.to_string(),
        })?;
        if !path.is_root() {
            tree.nodes.push(TreeNode {
                name: path.leaf().expect("non-root path has a leaf").to_string(),
                version: entry.version.clone(),
                path: path.clone(),
            });
        }
        at.insert(path, entry);
    }

    for (path, entry) in &at {
        for (library, raw) in &entry.dependencies {
            let to = find_target(&at, &root, path, library, raw).ok_or_else(|| {
                LockfileError::DanglingDependency {
                    at: path.render(),
                    library: library.clone(),
                    constraint: raw.clone(),
                }
            })?;
            tree.edges.push(TreeEdge {
                from: path.clone(),
                to,
                constraint: raw.clone(),
            });
        }
    }

    tree.canonicalize();
    Ok(tree)
}

fn find_target(
    at: &BTreeMap<InstallPath, &LockEntry>,
    root: &PackageId,
    from: &InstallPath,
    library: &str,
    raw: &str,
) -> Option<InstallPath> {
    let accepts = |version: &Version| match Constraint::parse(raw) {
        Ok(c) if c.is_testable() => c.satisfies(version).unwrap_or(false),
        _ => true,
    };
    for dir in from.prefixes().rev() {
        let candidate = dir.child(library);
        if let Some(entry) = at.get(&candidate) {
            if accepts(&entry.version) {
                return Some(candidate);
            }
        }
        if dir.is_root() && library == root.name && accepts(&root.version) {
            return Some(InstallPath::root());
        }
    }
    None
}
