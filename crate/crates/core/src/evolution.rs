//! Replaying registry history against a fixed root.
//!
//! Every release of a library in the root's transitive constraint closure is
//! a moment the resolved tree *might* change. This module walks those
//! moments in order, detects the instants the tree actually changes, and
//! derives from them the life story of each advisory (when a release first
//! dragged it in, when another release pushed it out) and the fate of each
//! vulnerable path.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};
use serde::Serialize;

use crate::audit::{exact_constraint_count, find_vulnerable_paths, find_vulnerable_points};
use crate::graph::{DepGraph, Timestamp};
use crate::resolver::{resolve_target, ResolveConfig, ResolveError, RootTarget};
use crate::tree::{compare_trees, DependencyTree, PackageId};

/// The tree changed at `time`: some release flipped at least one resolution
/// decision.
#[derive(Debug, Clone, Serialize)]
pub struct ChangeEvent {
    pub time: Timestamp,
    /// The release that triggered the change. When several versions were
    /// published at the same instant, a version that appears in the new
    /// tree is preferred, then the smallest `name@version`.
    pub trigger: PackageId,
    pub tree_before: DependencyTree,
    pub tree_after: DependencyTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimelineMode {
    /// One entry per actual tree change.
    EveryChange,
    /// One entry per end-of-month boundary inside the window.
    Monthly,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimelineEntry {
    pub time: Timestamp,
    pub tree: DependencyTree,
}

/// One contiguous interval during which an advisory was present in the
/// tree. An advisory that is pushed out and later dragged back in yields
/// several records.
#[derive(Debug, Clone, Serialize)]
pub struct LifecycleRecord {
    pub advisory: String,
    pub introduced_at: Timestamp,
    /// The change instant that removed it; `None` while still present at
    /// the window end.
    pub eliminated_at: Option<Timestamp>,
    pub living_ms: Option<i64>,
    /// Was it already in the tree before the advisory went public?
    pub introduced_before_publish: bool,
    pub eliminated_before_publish: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LifecycleSummary {
    pub advisory: String,
    pub intervals: usize,
    pub present_at_end: bool,
    pub last_eliminated_at: Option<Timestamp>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LifecycleReport {
    pub from: Timestamp,
    pub to: Timestamp,
    pub records: Vec<LifecycleRecord>,
    pub summary: Vec<LifecycleSummary>,
}

/// The fate of one vulnerable path over the window.
#[derive(Debug, Clone, Serialize)]
pub struct PathFate {
    pub nodes: Vec<PackageId>,
    pub constraints: Vec<String>,
    pub vuln_ids: BTreeSet<String>,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
    /// True when the path is gone from the final tree of the window.
    pub removed: bool,
    /// Would the newest in-range version of the endpoint (as of the window
    /// end) still be vulnerable? If so, waiting cannot fix this path.
    pub vulnerable_latest_version: bool,
    /// How many constraints along the path pin an exact version.
    pub fixed_version_constraints: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FateReport {
    pub fates: Vec<PathFate>,
    pub truncated: bool,
}

/// Resolve the tree as seen one millisecond after `t`, so releases at
/// exactly `t` are visible.
pub fn snapshot_at(
    graph: &DepGraph,
    target: &RootTarget,
    t: Timestamp,
    config: &ResolveConfig,
) -> Result<DependencyTree, ResolveError> {
    let mut config = config.clone();
    config.policy.as_of = Some(t + Duration::milliseconds(1));
    resolve_target(graph, target, &config)
}

/// Libraries whose releases can possibly affect the tree: the transitive
/// closure over declared dependency names, every version considered.
fn closure_libraries(
    graph: &DepGraph,
    target: &RootTarget,
    config: &ResolveConfig,
) -> BTreeSet<String> {
    let mut todo: VecDeque<String> =
        crate::resolver::root_dependency_names(graph, target, config)
            .into_iter()
            .collect();
    let sections = config.sections(false);
    let mut seen: BTreeSet<String> = BTreeSet::new();
    while let Some(name) = todo.pop_front() {
        if !seen.insert(name.clone()) {
            continue;
        }
        let Some(lib) = graph.lib(&name) else { continue };
        for node in lib.versions() {
            for decl in node.deps_in(&sections) {
                if !seen.contains(&decl.name) {
                    todo.push_back(decl.name.clone());
                }
            }
        }
    }
    seen
}

/// Release instants of closure libraries, each with the versions released
/// then.
fn release_moments(
    graph: &DepGraph,
    target: &RootTarget,
    config: &ResolveConfig,
) -> BTreeMap<Timestamp, BTreeSet<PackageId>> {
    let mut moments: BTreeMap<Timestamp, BTreeSet<PackageId>> = BTreeMap::new();
    for name in closure_libraries(graph, target, config) {
        let Some(lib) = graph.lib(&name) else { continue };
        for node in lib.versions() {
            if let Some(t) = node.release_time {
                moments
                    .entry(t)
                    .or_default()
                    .insert(PackageId::new(name.clone(), node.version.clone()));
            }
        }
    }
    moments
}

fn pick_trigger(released: &BTreeSet<PackageId>, tree_after: &DependencyTree) -> PackageId {
    let after_ids = tree_after.identities();
    released
        .iter()
        .find(|id| after_ids.contains(*id))
        .unwrap_or_else(|| released.iter().next().expect("moment has releases"))
        .clone()
}

/// The first instant strictly after `after` at which the tree changes.
pub fn next_change(
    graph: &DepGraph,
    target: &RootTarget,
    after: Timestamp,
    config: &ResolveConfig,
) -> Result<Option<ChangeEvent>, ResolveError> {
    let base = snapshot_at(graph, target, after, config)?;
    let mut current = base;
    for (t, released) in release_moments(graph, target, config) {
        if t <= after {
            continue;
        }
        let tree = snapshot_at(graph, target, t, config)?;
        if !compare_trees(&current, &tree).exact_match {
            let trigger = pick_trigger(&released, &tree);
            return Ok(Some(ChangeEvent {
                time: t,
                trigger,
                tree_before: current,
                tree_after: tree,
            }));
        }
        current = tree;
    }
    Ok(None)
}

/// Snapshots across `[from, to]`. The first entry is always the tree at
/// `from`; an empty window yields nothing.
pub fn timeline(
    graph: &DepGraph,
    target: &RootTarget,
    from: Timestamp,
    to: Timestamp,
    mode: TimelineMode,
    config: &ResolveConfig,
) -> Result<Vec<TimelineEntry>, ResolveError> {
    if from > to {
        return Ok(Vec::new());
    }
    let mut entries = vec![TimelineEntry {
        time: from,
        tree: snapshot_at(graph, target, from, config)?,
    }];
    match mode {
        TimelineMode::EveryChange => {
            for (t, _released) in release_moments(graph, target, config) {
                if t <= from || t > to {
                    continue;
                }
                let tree = snapshot_at(graph, target, t, config)?;
                if !compare_trees(&entries.last().unwrap().tree, &tree).exact_match {
                    entries.push(TimelineEntry { time: t, tree });
                }
            }
        }
        TimelineMode::Monthly => {
            let mut boundary = month_end(from);
            while boundary <= to {
                if boundary > from {
                    entries.push(TimelineEntry {
                        time: boundary,
                        tree: snapshot_at(graph, target, boundary, config)?,
                    });
                }
                boundary = month_end(boundary + Duration::milliseconds(1));
            }
        }
    }
    Ok(entries)
}

/// The last millisecond of the month containing `t`.
fn month_end(t: Timestamp) -> Timestamp {
    let (year, month) = (t.year(), t.month());
    let (next_year, next_month) = if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    };
    let next_start: DateTime<Utc> = Utc
        .with_ymd_and_hms(next_year, next_month, 1, 0, 0, 0)
        .single()
        .expect("valid month start");
    next_start - Duration::milliseconds(1)
}

fn present_advisories(graph: &DepGraph, tree: &DependencyTree) -> BTreeSet<String> {
    find_vulnerable_points(graph, tree)
        .into_iter()
        .flat_map(|p| p.vuln_ids)
        .collect()
}

/// Advisory presence intervals across the window, one record per
/// contiguous interval.
pub fn lifecycle(
    graph: &DepGraph,
    target: &RootTarget,
    from: Timestamp,
    to: Timestamp,
    config: &ResolveConfig,
) -> Result<LifecycleReport, ResolveError> {
    let entries = timeline(graph, target, from, to, TimelineMode::EveryChange, config)?;
    let presence: Vec<(Timestamp, BTreeSet<String>)> = entries
        .iter()
        .map(|e| (e.time, present_advisories(graph, &e.tree)))
        .collect();
    let all: BTreeSet<String> = presence.iter().flat_map(|(_, s)| s.clone()).collect();

    let mut report = LifecycleReport {
        from,
        to,
        records: Vec::new(),
        summary: Vec::new(),
    };
    for advisory in all {
        let publish_time = graph.vuln(&advisory).map(|v| v.publish_time);
        let mut open: Option<Timestamp> = None;
        let mut intervals = 0usize;
        let mut last_eliminated: Option<Timestamp> = None;
        for (t, present) in &presence {
            match (open, present.contains(&advisory)) {
                (None, true) => open = Some(*t),
                (Some(started), false) => {
                    report
                        .records
                        .push(make_record(&advisory, started, Some(*t), publish_time));
                    intervals += 1;
                    last_eliminated = Some(*t);
                    open = None;
                }
                _ => {}
            }
        }
        let present_at_end = open.is_some();
        if let Some(started) = open {
            report
                .records
                .push(make_record(&advisory, started, None, publish_time));
            intervals += 1;
        }
        report.summary.push(LifecycleSummary {
            advisory,
            intervals,
            present_at_end,
            last_eliminated_at: last_eliminated,
        });
    }
    Ok(report)
}

fn make_record(
    advisory: &str,
    introduced_at: Timestamp,
    eliminated_at: Option<Timestamp>,
    publish_time: Option<Timestamp>,
) -> LifecycleRecord {
    LifecycleRecord {
        advisory: advisory.to_string(),
        introduced_at,
        eliminated_at,
        living_ms: eliminated_at.map(|e| (e - introduced_at).num_milliseconds()),
        introduced_before_publish: publish_time.map(|p| introduced_at < p).unwrap_or(false),
        eliminated_before_publish: eliminated_at
            .map(|e| publish_time.map(|p| e < p).unwrap_or(false)),
    }
}

/// Track every vulnerable path seen anywhere in the window and classify
/// whether history removed it by the end.
pub fn classify_paths(
    graph: &DepGraph,
    target: &RootTarget,
    from: Timestamp,
    to: Timestamp,
    config: &ResolveConfig,
    path_cap: usize,
) -> Result<FateReport, ResolveError> {
    let entries = timeline(graph, target, from, to, TimelineMode::EveryChange, config)?;
    let mut report = FateReport::default();
    if entries.is_empty() {
        return Ok(report);
    }

    struct Observed {
        constraints: Vec<String>,
        vuln_ids: BTreeSet<String>,
        first_seen: Timestamp,
        last_seen: Timestamp,
    }
    let mut observed: BTreeMap<Vec<PackageId>, Observed> = BTreeMap::new();
    let mut final_paths: BTreeSet<Vec<PackageId>> = BTreeSet::new();

    for (i, entry) in entries.iter().enumerate() {
        let points = find_vulnerable_points(graph, &entry.tree);
        let search = find_vulnerable_paths(&entry.tree, &points, path_cap);
        report.truncated |= search.truncated;
        for path in search.paths {
            if i + 1 == entries.len() {
                final_paths.insert(path.nodes.clone());
            }
            observed
                .entry(path.nodes.clone())
                .and_modify(|o| {
                    o.last_seen = entry.time;
                    o.vuln_ids.extend(path.vuln_ids.iter().cloned());
                })
                .or_insert(Observed {
                    constraints: path.constraints,
                    vuln_ids: path.vuln_ids,
                    first_seen: entry.time,
                    last_seen: entry.time,
                });
        }
    }

    for (nodes, info) in observed {
        let endpoint = nodes.last().expect("paths are never empty").clone();
        let last_constraint = info.constraints.last().cloned().unwrap_or_default();
        let vulnerable_latest = latest_in_range_is_vulnerable(graph, &endpoint.name, &last_constraint, to);
        let probe = crate::audit::VulnerablePath {
            nodes: nodes.clone(),
            constraints: info.constraints.clone(),
            vuln_ids: info.vuln_ids.clone(),
        };
        report.fates.push(PathFate {
            removed: !final_paths.contains(&nodes),
            nodes,
            constraints: info.constraints,
            vuln_ids: info.vuln_ids,
            first_seen: info.first_seen,
            last_seen: info.last_seen,
            vulnerable_latest_version: vulnerable_latest,
            fixed_version_constraints: exact_constraint_count(&probe),
        });
    }
    Ok(report)
}

/// As of `horizon`, is the highest version satisfying `raw` still affected
/// by some advisory?
fn latest_in_range_is_vulnerable(
    graph: &DepGraph,
    library: &str,
    raw: &str,
    horizon: Timestamp,
) -> bool {
    let Ok(constraint) = crate::semver::Constraint::parse(raw) else {
        return false;
    };
    let Some(lib) = graph.lib(library) else {
        return false;
    };
    lib.versions()
        .iter()
        .filter(|n| matches!(n.release_time, Some(t) if t <= horizon))
        .filter(|n| constraint.satisfies(&n.version).unwrap_or(false))
        .last()
        .map(|n| n.is_vulnerable())
        .unwrap_or(false)
}
