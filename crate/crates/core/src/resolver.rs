//! Static resolution of dependency trees.
//!
//! [`resolve`] reproduces what an npm-style installer would actually do:
//! dependencies are expanded breadth-first in alphabetical order, an already
//! installed version reachable from the depender is reused when it satisfies
//! the constraint, and fresh installs are hoisted to the highest directory
//! that does not already hold a version of the same library.
//!
//! [`resolve_reach`] is the naive baseline many analysis tools use instead:
//! every constraint is resolved independently to its highest satisfying
//! version and each `name@version` pair is expanded once. It overestimates
//! real trees because it never reuses an already installed version.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    DepGraph, DependencyDecl, LinkError, ParsedConstraint, Section, SelectionPolicy, Timestamp,
    VersionNode,
};
use crate::semver::{Constraint, ConstraintKind, Version};
use crate::tree::{DependencyTree, Diagnostic, InstallPath, PackageId, TreeEdge, TreeNode};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("unknown package `{name}`")]
    UnknownPackage { name: String },
    #[error("unknown version `{name}@{version}`")]
    UnknownVersion { name: String, version: Version },
    #[error("`{name}@{version}` was not yet released at {as_of}")]
    NotYetReleased {
        name: String,
        version: Version,
        as_of: Timestamp,
    },
    #[error("dependency `{library}` of `{at}` failed: {source}")]
    Link {
        at: String,
        library: String,
        #[source]
        source: LinkError,
    },
    #[error("expansion budget of {budget} exceeded; dependency cycle suspected")]
    BudgetExceeded { budget: usize },
}

/// Knobs for one resolution run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolveConfig {
    pub policy: SelectionPolicy,
    /// Include the root package's devDependencies.
    pub include_dev: bool,
    /// Include peerDependencies of every package.
    pub include_peer: bool,
    /// Include optionalDependencies of every package.
    pub include_optional: bool,
    /// Fail on the first unresolvable link instead of recording a
    /// diagnostic and continuing.
    pub fail_fast: bool,
    /// Upper bound on processed dependency links, as a cycle brake.
    pub expansion_budget: usize,
}

impl Default for ResolveConfig {
    fn default() -> Self {
        ResolveConfig {
            policy: SelectionPolicy::default(),
            include_dev: false,
            include_peer: false,
            include_optional: false,
            fail_fast: false,
            expansion_budget: 1_000_000,
        }
    }
}

impl ResolveConfig {
    pub fn at(as_of: Timestamp) -> ResolveConfig {
        ResolveConfig {
            policy: SelectionPolicy::at(as_of),
            ..ResolveConfig::default()
        }
    }

    pub(crate) fn sections(&self, is_root: bool) -> Vec<Section> {
        let mut sections = vec![Section::Prod];
        if is_root && self.include_dev {
            sections.push(Section::Dev);
        }
        if self.include_peer {
            sections.push(Section::Peer);
        }
        if self.include_optional {
            sections.push(Section::Optional);
        }
        sections
    }
}

/// A standalone root manifest: a package that exists only locally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RootManifest {
    pub name: String,
    pub version: Version,
    pub dependencies: BTreeMap<String, String>,
}

impl Default for RootManifest {
    fn default() -> Self {
        RootManifest {
            name: "root".to_string(),
            version: Version::new(0, 0, 0),
            dependencies: BTreeMap::new(),
        }
    }
}

/// One dependency to process: the target library and its constraint.
#[derive(Debug, Clone)]
pub(crate) struct Link {
    pub(crate) library: String,
    pub(crate) raw: String,
    pub(crate) parsed: ParsedConstraint,
}

impl Link {
    fn from_decl(decl: &DependencyDecl) -> Link {
        Link {
            library: decl.name.clone(),
            raw: decl.raw.clone(),
            parsed: decl.parsed.clone(),
        }
    }
}

/// The active dependency links of a package version, deduplicated by name
/// (production wins over other sections) and sorted alphabetically.
pub(crate) fn active_links(node: &VersionNode, sections: &[Section]) -> Vec<Link> {
    let mut by_name: BTreeMap<&str, &DependencyDecl> = BTreeMap::new();
    for section in sections {
        for decl in node.dependencies.iter().filter(|d| d.section == *section) {
            by_name.entry(decl.name.as_str()).or_insert(decl);
        }
    }
    by_name.values().map(|d| Link::from_decl(d)).collect()
}

pub(crate) fn manifest_links(manifest: &RootManifest) -> Vec<Link> {
    manifest
        .dependencies
        .iter()
        .map(|(name, raw)| Link {
            library: name.clone(),
            raw: raw.clone(),
            parsed: match Constraint::parse(raw) {
                Ok(c) => ParsedConstraint::Valid(c),
                Err(e) => ParsedConstraint::Invalid {
                    reason: e.to_string(),
                },
            },
        })
        .collect()
}

/// What sits where: install directory -> library name -> installed version.
#[derive(Debug, Default, Clone)]
pub(crate) struct Installed {
    dirs: BTreeMap<InstallPath, BTreeMap<String, Version>>,
}

impl Installed {
    pub(crate) fn put(&mut self, dir: &InstallPath, library: &str, version: Version) {
        self.dirs
            .entry(dir.clone())
            .or_default()
            .insert(library.to_string(), version);
    }

    fn get(&self, dir: &InstallPath, library: &str) -> Option<&Version> {
        self.dirs.get(dir).and_then(|m| m.get(library))
    }

    /// Deepest directory on the chain from the root to `from` (inclusive)
    /// holding a version of `library` that the predicate accepts.
    pub(crate) fn nearest_match(
        &self,
        from: &InstallPath,
        library: &str,
        accept: impl Fn(&Version) -> bool,
    ) -> Option<(InstallPath, Version)> {
        for dir in from.prefixes().rev() {
            if let Some(v) = self.get(&dir, library) {
                if accept(v) {
                    return Some((dir, v.clone()));
                }
            }
        }
        None
    }

    /// Highest directory on the chain from the root to `from` (inclusive)
    /// with no version of `library` yet: the hoisting target.
    pub(crate) fn placement(&self, from: &InstallPath, library: &str) -> Option<InstallPath> {
        from.prefixes().find(|dir| self.get(dir, library).is_none())
    }
}

struct Run<'g> {
    config: &'g ResolveConfig,
    tree: DependencyTree,
    links_processed: usize,
}

impl<'g> Run<'g> {
    fn new(config: &'g ResolveConfig, root: PackageId) -> Run<'g> {
        Run {
            config,
            tree: DependencyTree::new(root, config.policy.as_of),
            links_processed: 0,
        }
    }

    fn charge(&mut self) -> Result<(), ResolveError> {
        self.links_processed += 1;
        if self.links_processed > self.config.expansion_budget {
            return Err(ResolveError::BudgetExceeded {
                budget: self.config.expansion_budget,
            });
        }
        Ok(())
    }

    /// Fail or record a diagnostic, depending on configuration.
    fn link_failed(
        &mut self,
        at: &InstallPath,
        link: &Link,
        error: LinkError,
    ) -> Result<(), ResolveError> {
        if self.config.fail_fast {
            return Err(ResolveError::Link {
                at: at.render(),
                library: link.library.clone(),
                source: error,
            });
        }
        self.tree.diagnostics.push(Diagnostic {
            at: at.clone(),
            library: link.library.clone(),
            constraint: link.raw.clone(),
            reason: error.to_string(),
        });
        Ok(())
    }

    fn finish(mut self) -> DependencyTree {
        self.tree.canonicalize();
        self.tree
    }
}

pub(crate) fn root_version_node<'g>(
    graph: &'g DepGraph,
    name: &str,
    version: &Version,
    config: &ResolveConfig,
) -> Result<&'g VersionNode, ResolveError> {
    let lib = graph.lib(name).ok_or_else(|| ResolveError::UnknownPackage {
        name: name.to_string(),
    })?;
    let node = lib
        .version(version)
        .ok_or_else(|| ResolveError::UnknownVersion {
            name: name.to_string(),
            version: version.clone(),
        })?;
    if let Some(as_of) = config.policy.as_of {
        let released = matches!(node.release_time, Some(t) if t < as_of);
        if !released {
            return Err(ResolveError::NotYetReleased {
                name: name.to_string(),
                version: version.clone(),
                as_of,
            });
        }
    }
    Ok(node)
}

/// Resolve the tree an installer would build for a published package.
pub fn resolve(
    graph: &DepGraph,
    name: &str,
    version: &Version,
    config: &ResolveConfig,
) -> Result<DependencyTree, ResolveError> {
    let node = root_version_node(graph, name, version, config)?;
    let links = active_links(node, &config.sections(true));
    resolve_links(graph, PackageId::new(name, version.clone()), links, config)
}

/// Resolve the tree for a local manifest that is not itself published.
pub fn resolve_manifest(
    graph: &DepGraph,
    manifest: &RootManifest,
    config: &ResolveConfig,
) -> Result<DependencyTree, ResolveError> {
    let root = PackageId::new(manifest.name.clone(), manifest.version.clone());
    resolve_links(graph, root, manifest_links(manifest), config)
}

fn resolve_links(
    graph: &DepGraph,
    root: PackageId,
    root_links: Vec<Link>,
    config: &ResolveConfig,
) -> Result<DependencyTree, ResolveError> {
    let mut run = Run::new(config, root.clone());
    let mut installed = Installed::default();
    // The root occupies its own slot in the root directory, so cycles back
    // to the root reuse it rather than reinstalling.
    installed.put(&InstallPath::root(), &root.name, root.version.clone());

    let mut queue: VecDeque<(InstallPath, Vec<Link>)> = VecDeque::new();
    queue.push_back((InstallPath::root(), root_links));

    let dep_sections = config.sections(false);

    while let Some((at, links)) = queue.pop_front() {
        for link in links {
            run.charge()?;
            let constraint = match &link.parsed {
                ParsedConstraint::Valid(c) => c.clone(),
                ParsedConstraint::Invalid { reason } => {
                    run.link_failed(
                        &at,
                        &link,
                        LinkError::InvalidConstraint {
                            reason: reason.clone(),
                        },
                    )?;
                    continue;
                }
            };

            // Reuse: the deepest version reachable from the depender that
            // satisfies the constraint wins, mirroring module lookup order.
            let satisfies = |v: &Version| link_accepts(graph, &link.library, &constraint, v);
            if let Some((dir, _)) = installed.nearest_match(&at, &link.library, satisfies) {
                let to = if dir.is_root() && link.library == run.tree.root.name {
                    InstallPath::root()
                } else {
                    dir.child(&link.library)
                };
                run.tree.edges.push(TreeEdge {
                    from: at.clone(),
                    to,
                    constraint: link.raw.clone(),
                });
                continue;
            }

            // Fresh install: pick a version under the policy, then hoist it
            // as high as possible.
            let picked = match graph.resolve_link(&link.library, &constraint, &config.policy) {
                Ok(node) => node,
                Err(e) => {
                    run.link_failed(&at, &link, e)?;
                    continue;
                }
            };
            // Placement can only fail for a root self-dependency whose
            // constraint rejects the root's own version: the root occupies
            // the one slot the fresh copy could take.
            let Some(dir) = installed.placement(&at, &link.library) else {
                run.link_failed(
                    &at,
                    &link,
                    LinkError::PlacementConflict {
                        library: link.library.clone(),
                    },
                )?;
                continue;
            };
            installed.put(&dir, &link.library, picked.version.clone());
            let path = dir.child(&link.library);
            run.tree.nodes.push(TreeNode {
                name: link.library.clone(),
                version: picked.version.clone(),
                path: path.clone(),
            });
            run.tree.edges.push(TreeEdge {
                from: at.clone(),
                to: path.clone(),
                constraint: link.raw.clone(),
            });
            queue.push_back((path, active_links(picked, &dep_sections)));
        }
    }

    Ok(run.finish())
}

/// Can this link accept an already installed version? Mirrors what
/// satisfaction means per constraint kind: ranges test the version, tags
/// accept exactly the tagged version, out-of-band kinds accept nothing.
pub(crate) fn link_accepts(
    graph: &DepGraph,
    library: &str,
    constraint: &Constraint,
    v: &Version,
) -> bool {
    match &constraint.kind {
        ConstraintKind::Tag(tag) => graph
            .lib(library)
            .and_then(|lib| lib.dist_tags.get(tag))
            .is_some_and(|target| target == v),
        _ => constraint.satisfies(v).unwrap_or(false),
    }
}

/// Resolve by pure recursive expansion (the flat baseline).
pub fn resolve_reach(
    graph: &DepGraph,
    name: &str,
    version: &Version,
    config: &ResolveConfig,
) -> Result<DependencyTree, ResolveError> {
    let node = root_version_node(graph, name, version, config)?;
    let links = active_links(node, &config.sections(true));
    reach_links(graph, PackageId::new(name, version.clone()), links, config)
}

/// Flat-baseline resolution of a local manifest.
pub fn resolve_reach_manifest(
    graph: &DepGraph,
    manifest: &RootManifest,
    config: &ResolveConfig,
) -> Result<DependencyTree, ResolveError> {
    let root = PackageId::new(manifest.name.clone(), manifest.version.clone());
    reach_links(graph, root, manifest_links(manifest), config)
}

fn reach_links(
    graph: &DepGraph,
    root: PackageId,
    root_links: Vec<Link>,
    config: &ResolveConfig,
) -> Result<DependencyTree, ResolveError> {
    let mut run = Run::new(config, root.clone());
    let mut first_seen: BTreeMap<PackageId, InstallPath> = BTreeMap::new();
    first_seen.insert(root, InstallPath::root());

    let mut queue: VecDeque<(InstallPath, Vec<Link>)> = VecDeque::new();
    queue.push_back((InstallPath::root(), root_links));

    let dep_sections = config.sections(false);

    while let Some((at, links)) = queue.pop_front() {
        for link in links {
            run.charge()?;
            let constraint = match &link.parsed {
                ParsedConstraint::Valid(c) => c.clone(),
                ParsedConstraint::Invalid { reason } => {
                    run.link_failed(
                        &at,
                        &link,
                        LinkError::InvalidConstraint {
                            reason: reason.clone(),
                        },
                    )?;
                    continue;
                }
            };
            let picked = match reach_pick(graph, &link.library, &constraint, &config.policy) {
                Ok(node) => node,
                Err(e) => {
                    run.link_failed(&at, &link, e)?;
                    continue;
                }
            };
            let id = PackageId::new(link.library.clone(), picked.version.clone());
            if let Some(existing) = first_seen.get(&id) {
                run.tree.edges.push(TreeEdge {
                    from: at.clone(),
                    to: existing.clone(),
                    constraint: link.raw.clone(),
                });
                continue;
            }
            let path = at.child(&link.library);
            first_seen.insert(id, path.clone());
            run.tree.nodes.push(TreeNode {
                name: link.library.clone(),
                version: picked.version.clone(),
                path: path.clone(),
            });
            run.tree.edges.push(TreeEdge {
                from: at.clone(),
                to: path.clone(),
                constraint: link.raw.clone(),
            });
            queue.push_back((path, active_links(picked, &dep_sections)));
        }
    }

    Ok(run.finish())
}

/// The baseline's selection rule: plain maximum satisfying version, with
/// none of the installer's tag or deprecation preferences.
fn reach_pick<'g>(
    graph: &'g DepGraph,
    library: &str,
    constraint: &Constraint,
    policy: &SelectionPolicy,
) -> Result<&'g VersionNode, LinkError> {
    let plain = SelectionPolicy {
        prefer_latest_tag: false,
        avoid_deprecated: false,
        ..policy.clone()
    };
    graph.resolve_link(library, constraint, &plain)
}

/// Shorthand for resolving with the default configuration.
pub fn resolve_now(
    graph: &DepGraph,
    name: &str,
    version: &Version,
) -> Result<DependencyTree, ResolveError> {
    resolve(graph, name, version, &ResolveConfig::default())
}

/// What to resolve: a published package or a standalone local manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RootTarget {
    Package(PackageId),
    Manifest(RootManifest),
}

impl RootTarget {
    pub fn id(&self) -> PackageId {
        match self {
            RootTarget::Package(id) => id.clone(),
            RootTarget::Manifest(m) => PackageId::new(m.name.clone(), m.version.clone()),
        }
    }
}

pub fn resolve_target(
    graph: &DepGraph,
    target: &RootTarget,
    config: &ResolveConfig,
) -> Result<DependencyTree, ResolveError> {
    match target {
        RootTarget::Package(id) => resolve(graph, &id.name, &id.version, config),
        RootTarget::Manifest(m) => resolve_manifest(graph, m, config),
    }
}

pub fn resolve_reach_target(
    graph: &DepGraph,
    target: &RootTarget,
    config: &ResolveConfig,
) -> Result<DependencyTree, ResolveError> {
    match target {
        RootTarget::Package(id) => resolve_reach(graph, &id.name, &id.version, config),
        RootTarget::Manifest(m) => resolve_reach_manifest(graph, m, config),
    }
}

/// The library names the root directly depends on under this configuration.
pub(crate) fn root_dependency_names(
    graph: &DepGraph,
    target: &RootTarget,
    config: &ResolveConfig,
) -> Vec<String> {
    match target {
        RootTarget::Package(id) => graph
            .version(&id.name, &id.version)
            .map(|node| {
                active_links(node, &config.sections(true))
                    .into_iter()
                    .map(|l| l.library)
                    .collect()
            })
            .unwrap_or_default(),
        RootTarget::Manifest(m) => m.dependencies.keys().cloned().collect(),
    }
}
