//! Searching for a less vulnerable install plan.
//!
//! The installer's resolution is deterministic, but most of its decisions
//! are not forced: whenever it installs a *fresh* copy of a library, any
//! satisfying version would have produced a legal tree. [`remediate`]
//! explores those alternatives with a depth-first backtracking search and
//! keeps the tree with the fewest vulnerable packages, breaking ties by
//! vulnerable path count.
//!
//! Reuse of an already installed version is never a choice point: a real
//! installer always reuses, so a plan that skips reuse could not be
//! replayed by one. The search therefore produces trees the installer
//! itself could have built, which is what makes the resulting lockfile
//! honest.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::audit::{find_vulnerable_paths, find_vulnerable_points};
use crate::graph::{DepGraph, LinkError, ParsedConstraint, VersionNode};
use crate::resolver::{
    active_links, link_accepts, manifest_links, root_version_node, Installed, Link, ResolveConfig,
    ResolveError, RootTarget,
};
use crate::semver::{Constraint, Version};
use crate::tree::{DependencyTree, Diagnostic, InstallPath, PackageId, TreeEdge, TreeNode};

#[derive(Debug, Clone, Serialize)]
pub struct RemediationConfig {
    pub resolve: ResolveConfig,
    /// Upper bound on explored branch decisions across the whole search.
    pub branch_budget: usize,
    /// Cap on enumerated vulnerable paths when scoring one candidate tree.
    pub path_cap: usize,
}

impl Default for RemediationConfig {
    fn default() -> Self {
        RemediationConfig {
            resolve: ResolveConfig::default(),
            branch_budget: 100_000,
            path_cap: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RemediationResult {
    /// The best tree found. Never worse than the installer's default.
    pub tree: DependencyTree,
    pub residual_points: usize,
    pub residual_paths: usize,
    /// What the installer's default tree scored, for comparison.
    pub default_points: usize,
    pub default_paths: usize,
    /// Branch decisions actually explored.
    pub expansions: usize,
    /// True when the branch budget ran out before the space was covered;
    /// the result is still valid, just possibly not optimal.
    pub budget_exhausted: bool,
}

impl RemediationResult {
    pub fn improved(&self) -> bool {
        (self.residual_points, self.residual_paths) < (self.default_points, self.default_paths)
    }

    pub fn is_clean(&self) -> bool {
        self.residual_points == 0
    }
}

/// A paused resolution: everything the installer loop carries, plus the
/// set of vulnerable identities placed so far (for pruning).
#[derive(Clone)]
struct SearchState<'g> {
    graph: &'g DepGraph,
    config: &'g ResolveConfig,
    tree: DependencyTree,
    installed: Installed,
    queue: VecDeque<(InstallPath, Link)>,
    links_processed: usize,
    dirty: BTreeSet<PackageId>,
}

/// Where a descent paused.
enum Step {
    /// The queue drained; the tree is complete.
    Done,
    /// A fresh install with more than one legal version. The popped link
    /// is handed back so the driver can apply each candidate in turn.
    Choice {
        at: InstallPath,
        link: Link,
        candidates: Vec<Version>,
    },
}

impl<'g> SearchState<'g> {
    fn new(
        graph: &'g DepGraph,
        config: &'g ResolveConfig,
        root: PackageId,
        root_links: Vec<Link>,
        root_vulnerable: bool,
    ) -> SearchState<'g> {
        let mut installed = Installed::default();
        installed.put(&InstallPath::root(), &root.name, root.version.clone());
        let mut dirty = BTreeSet::new();
        if root_vulnerable {
            dirty.insert(root.clone());
        }
        let queue = root_links
            .into_iter()
            .map(|l| (InstallPath::root(), l))
            .collect();
        SearchState {
            graph,
            config,
            tree: DependencyTree::new(root, config.policy.as_of),
            installed,
            queue,
            links_processed: 0,
            dirty,
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

    /// Run the installer loop until it completes or reaches a branching
    /// fresh install. Forced moves (reuse, a single legal version, a
    /// failing link) never pause.
    fn advance(&mut self) -> Result<Step, ResolveError> {
        while let Some((at, link)) = self.queue.pop_front() {
            self.charge()?;
            let constraint = match &link.parsed {
                ParsedConstraint::Valid(c) => c.clone(),
                ParsedConstraint::Invalid { reason } => {
                    let reason = reason.clone();
                    self.link_failed(&at, &link, LinkError::InvalidConstraint { reason })?;
                    continue;
                }
            };

            let graph = self.graph;
            let satisfies = |v: &Version| link_accepts(graph, &link.library, &constraint, v);
            if let Some((dir, _)) = self.installed.nearest_match(&at, &link.library, satisfies) {
                let to = if dir.is_root() && link.library == self.tree.root.name {
                    InstallPath::root()
                } else {
                    dir.child(&link.library)
                };
                self.tree.edges.push(TreeEdge {
                    from: at,
                    to,
                    constraint: link.raw.clone(),
                });
                continue;
            }

            let candidates = ordered_candidates(graph, &link.library, &constraint, self.config);
            // A root self-dependency whose constraint rejects the root's
            // version has nowhere to go: the root occupies the only slot.
            // No candidate can change that, so it is not a choice point.
            if !candidates.is_empty() && self.installed.placement(&at, &link.library).is_none() {
                self.link_failed(
                    &at,
                    &link,
                    LinkError::PlacementConflict {
                        library: link.library.clone(),
                    },
                )?;
                continue;
            }
            match candidates.len() {
                0 => {
                    let error = self
                        .graph
                        .resolve_link(&link.library, &constraint, &self.config.policy)
                        .err()
                        .unwrap_or(LinkError::NoSatisfyingVersion {
                            library: link.library.clone(),
                            constraint: link.raw.clone(),
                        });
                    self.link_failed(&at, &link, error)?;
                }
                1 => self.apply_pick(&at, &link, &candidates[0]),
                _ => {
                    return Ok(Step::Choice {
                        at,
                        link,
                        candidates,
                    })
                }
            }
        }
        Ok(Step::Done)
    }

    /// Install `version` of the link's library, exactly as the installer
    /// would have: hoist as high as possible, then queue its dependencies.
    /// `advance` has already ruled out placement conflicts.
    fn apply_pick(&mut self, at: &InstallPath, link: &Link, version: &Version) {
        let dir = self
            .installed
            .placement(at, &link.library)
            .expect("advance checks placement before picking");
        self.installed.put(&dir, &link.library, version.clone());
        let path = dir.child(&link.library);
        self.tree.nodes.push(TreeNode {
            name: link.library.clone(),
            version: version.clone(),
            path: path.clone(),
        });
        self.tree.edges.push(TreeEdge {
            from: at.clone(),
            to: path.clone(),
            constraint: link.raw.clone(),
        });
        let node = self
            .graph
            .version(&link.library, version)
            .expect("candidates come from the graph");
        if node.is_vulnerable() {
            self.dirty
                .insert(PackageId::new(link.library.clone(), version.clone()));
        }
        let sections = self.config.sections(false);
        for child in active_links(node, &sections) {
            self.queue.push_back((path.clone(), child));
        }
    }

    fn into_tree(self) -> DependencyTree {
        let mut tree = self.tree;
        tree.canonicalize();
        tree
    }
}

/// Legal versions for a fresh install, best first: clean versions before
/// vulnerable ones, and inside each group the installer's own preference
/// order (the `latest` tag, then non-deprecated, then highest version).
/// The first candidate of a link with no vulnerable versions is therefore
/// exactly what the installer would have picked.
fn ordered_candidates(
    graph: &DepGraph,
    library: &str,
    constraint: &Constraint,
    config: &ResolveConfig,
) -> Vec<Version> {
    let latest = graph.lib(library).and_then(|l| l.latest_tag().cloned());
    let mut nodes: Vec<&VersionNode> = graph
        .satisfying_versions(library, constraint)
        .into_iter()
        .filter(|n| config.policy.admits(library, n))
        .collect();
    let rank = |n: &VersionNode| {
        (
            n.is_vulnerable(),
            !matches!((&latest, config.policy.prefer_latest_tag),
                      (Some(l), true) if *l == n.version),
            config.policy.avoid_deprecated && n.deprecated,
        )
    };
    nodes.sort_by(|a, b| {
        rank(a)
            .cmp(&rank(b))
            .then_with(|| b.version.cmp(&a.version))
    });
    nodes.into_iter().map(|n| n.version.clone()).collect()
}

/// A recorded choice point: the paused state plus which candidates are
/// still untried.
struct Frame<'g> {
    state: SearchState<'g>,
    at: InstallPath,
    link: Link,
    candidates: Vec<Version>,
    next: usize,
}

#[derive(Clone)]
struct Scored {
    tree: DependencyTree,
    points: usize,
    paths: usize,
    bytes: Vec<u8>,
}

fn score(graph: &DepGraph, tree: DependencyTree, path_cap: usize) -> Scored {
    let points = find_vulnerable_points(graph, &tree);
    let paths = find_vulnerable_paths(&tree, &points, path_cap);
    let bytes = serde_json::to_vec(&tree).expect("trees serialize");
    Scored {
        tree,
        points: points.len(),
        paths: paths.paths.len(),
        bytes,
    }
}

impl Scored {
    fn beats(&self, other: &Scored) -> bool {
        (self.points, self.paths, &self.bytes) < (other.points, other.paths, &other.bytes)
    }
}

/// Search for the install plan with the fewest vulnerable packages.
///
/// The result is seeded with the installer's default tree, so it can only
/// ever match or improve on it. The search stops early once a fully clean
/// tree is found, and gives up (keeping the best so far) when
/// `branch_budget` runs out.
pub fn remediate(
    graph: &DepGraph,
    target: &RootTarget,
    config: &RemediationConfig,
) -> Result<RemediationResult, ResolveError> {
    let default_tree = crate::resolver::resolve_target(graph, target, &config.resolve)?;
    let default = score(graph, default_tree, config.path_cap);
    let (default_points, default_paths) = (default.points, default.paths);

    let root = target.id();
    let (root_links, root_vulnerable) = match target {
        RootTarget::Package(id) => {
            let node = root_version_node(graph, &id.name, &id.version, &config.resolve)?;
            (
                active_links(node, &config.resolve.sections(true)),
                node.is_vulnerable(),
            )
        }
        RootTarget::Manifest(m) => (manifest_links(m), false),
    };

    let mut best = default;
    let mut expansions = 0usize;
    let mut budget_exhausted = false;

    if best.points > 0 {
        let mut frames: Vec<Frame> = Vec::new();
        let mut current = Some(SearchState::new(
            graph,
            &config.resolve,
            root,
            root_links,
            root_vulnerable,
        ));

        'search: loop {
            while let Some(state) = current.as_mut() {
                match state.advance()? {
                    Step::Done => {
                        let finished = current.take().expect("state present").into_tree();
                        let scored = score(graph, finished, config.path_cap);
                        if scored.beats(&best) {
                            best = scored;
                            if best.points == 0 {
                                break 'search;
                            }
                        }
                    }
                    Step::Choice {
                        at,
                        link,
                        candidates,
                    } => {
                        let state = current.take().expect("state present");
                        frames.push(Frame {
                            state,
                            at,
                            link,
                            candidates,
                            next: 0,
                        });
                    }
                }
            }

            loop {
                let Some(frame) = frames.last_mut() else {
                    break 'search;
                };
                if frame.next >= frame.candidates.len() {
                    frames.pop();
                    continue;
                }
                if expansions >= config.branch_budget {
                    budget_exhausted = true;
                    break 'search;
                }
                expansions += 1;
                let version = frame.candidates[frame.next].clone();
                frame.next += 1;
                let (at, link) = (frame.at.clone(), frame.link.clone());
                let mut state = frame.state.clone();
                state.apply_pick(&at, &link, &version);
                // A partial tree never loses vulnerable packages as it
                // grows, so once it has more than the best full tree it
                // cannot win.
                if state.dirty.len() > best.points {
                    continue;
                }
                current = Some(state);
                break;
            }
        }
    }

    let residual_points = best.points;
    let residual_paths = best.paths;
    Ok(RemediationResult {
        tree: best.tree,
        residual_points,
        residual_paths,
        default_points,
        default_paths,
        expansions,
        budget_exhausted,
    })
}
