//! The dependency–vulnerability knowledge graph.
//!
//! Three node classes — libraries, their versions, and advisories — are
//! connected by a fixed set of relations: a library *has* versions, adjacent
//! versions are linked *upper*/*lower*, a version *depends* on a library
//! through a constraint, each testable constraint carries a *default* edge to
//! the version it currently selects, and an advisory *affects* the versions
//! inside its range. Library-level rollups (*libdeps*, *libaffects*) are
//! derived from the version-level edges.

pub mod advisory;
pub mod packument;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::semver::{Constraint, ConstraintKind, Version};

pub use advisory::{Advisory, AdvisoryReport};
pub use packument::{PackumentDoc, PackumentReport};
pub use store::{Store, StoreError};

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("packument has no `name` field")]
    MissingName,
    #[error("advisory `{id}` references unknown library `{library}`")]
    UnknownLibrary { id: String, library: String },
    #[error("advisory `{id}` range `{range}` cannot be tested: {reason}")]
    UntestableRange {
        id: String,
        range: String,
        reason: String,
    },
}

/// Which manifest section a dependency declaration came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Section {
    Prod,
    Dev,
    Peer,
    Optional,
}

/// A constraint as written in a manifest: either it parsed, or we keep the
/// reason it did not.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ParsedConstraint {
    Valid(Constraint),
    Invalid { reason: String },
}

impl ParsedConstraint {
    pub fn as_valid(&self) -> Option<&Constraint> {
        match self {
            ParsedConstraint::Valid(c) => Some(c),
            ParsedConstraint::Invalid { .. } => None,
        }
    }
}

/// One *depends* edge: a version of a library requires `name` under a
/// constraint. `default_target` is the derived *default* edge — the version
/// the constraint selects today, ignoring time filters and policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DependencyDecl {
    pub section: Section,
    pub name: String,
    pub raw: String,
    pub parsed: ParsedConstraint,
    pub default_target: Option<Version>,
}

/// A version node plus everything hanging off it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VersionNode {
    pub version: Version,
    pub release_time: Option<Timestamp>,
    pub deprecated: bool,
    pub integrity: Option<String>,
    pub tarball: Option<String>,
    /// Sorted by section, then name.
    pub dependencies: Vec<DependencyDecl>,
    /// Advisory ids whose range covers this version (*affects* edges).
    pub vuln_ids: BTreeSet<String>,
}

impl VersionNode {
    pub fn is_vulnerable(&self) -> bool {
        !self.vuln_ids.is_empty()
    }

    pub fn deps_in(&self, sections: &[Section]) -> impl Iterator<Item = &DependencyDecl> {
        let sections = sections.to_vec();
        self.dependencies
            .iter()
            .filter(move |d| sections.contains(&d.section))
    }
}

/// A library and its versions, kept sorted ascending.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LibNode {
    pub name: String,
    pub dist_tags: BTreeMap<String, Version>,
    versions: Vec<VersionNode>,
    advisory_ids: BTreeSet<String>,
}

impl LibNode {
    pub fn versions(&self) -> &[VersionNode] {
        &self.versions
    }

    pub fn version(&self, v: &Version) -> Option<&VersionNode> {
        self.versions
            .binary_search_by(|node| node.version.cmp(v))
            .ok()
            .map(|i| &self.versions[i])
    }

    pub fn version_numbers(&self) -> impl Iterator<Item = &Version> {
        self.versions.iter().map(|n| &n.version)
    }

    pub fn latest_tag(&self) -> Option<&Version> {
        self.dist_tags.get("latest")
    }

    pub fn advisory_ids(&self) -> &BTreeSet<String> {
        &self.advisory_ids
    }
}

/// An advisory node. The *affects* edges live on the version nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VulnNode {
    pub id: String,
    pub library: String,
    pub range: Constraint,
    pub publish_time: Timestamp,
    pub severity: Option<String>,
}

/// Node and edge counts for the whole graph, recomputed by full scan.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub libraries: usize,
    pub versions: usize,
    pub advisories: usize,
    pub has_edges: usize,
    pub upper_edges: usize,
    pub lower_edges: usize,
    pub depends_edges: usize,
    pub default_edges: usize,
    pub libdeps_edges: usize,
    pub affects_edges: usize,
    pub libaffects_edges: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DefaultsReport {
    pub examined: usize,
    pub resolved: usize,
    pub changed: usize,
}

/// How `resolve_link` picks among satisfying versions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionPolicy {
    /// Only versions released strictly before this instant are candidates.
    /// Versions with unknown release time are excluded while set.
    pub as_of: Option<Timestamp>,
    /// Prefer the version the `latest` dist-tag names when it satisfies.
    pub prefer_latest_tag: bool,
    /// Prefer non-deprecated versions; deprecated ones are a last resort.
    pub avoid_deprecated: bool,
    /// When a library appears here, only the listed versions are candidates.
    pub restrict: BTreeMap<String, BTreeSet<Version>>,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            as_of: None,
            prefer_latest_tag: true,
            avoid_deprecated: true,
            restrict: BTreeMap::new(),
        }
    }
}

impl SelectionPolicy {
    pub fn at(as_of: Timestamp) -> SelectionPolicy {
        SelectionPolicy {
            as_of: Some(as_of),
            ..SelectionPolicy::default()
        }
    }

    pub(crate) fn admits(&self, library: &str, node: &VersionNode) -> bool {
        if let Some(cutoff) = self.as_of {
            match node.release_time {
                Some(t) if t < cutoff => {}
                _ => return false,
            }
        }
        if let Some(allowed) = self.restrict.get(library) {
            if !allowed.contains(&node.version) {
                return false;
            }
        }
        true
    }
}

/// Why a single dependency link could not be resolved.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("unknown library `{library}`")]
    UnknownLibrary { library: String },
    #[error("no version of `{library}` satisfies `{constraint}`")]
    NoSatisfyingVersion { library: String, constraint: String },
    #[error("`{library}` has no dist-tag `{tag}`")]
    UnknownTag { library: String, tag: String },
    #[error("dist-tag `{tag}` of `{library}` names an unavailable version")]
    TagTargetUnavailable { library: String, tag: String },
    #[error("constraint `{raw}` ({kind}) needs out-of-band sources")]
    UnsupportedKind { raw: String, kind: &'static str },
    #[error("invalid constraint: {reason}")]
    InvalidConstraint { reason: String },
    #[error("`{library}` cannot be installed anywhere: every directory up to the root already holds a rejected version")]
    PlacementConflict { library: String },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DepGraph {
    libs: BTreeMap<String, LibNode>,
    vulns: BTreeMap<String, VulnNode>,
}

impl DepGraph {
    pub fn new() -> DepGraph {
        DepGraph::default()
    }

    pub fn lib(&self, name: &str) -> Option<&LibNode> {
        self.libs.get(name)
    }

    pub fn libs(&self) -> impl Iterator<Item = &LibNode> {
        self.libs.values()
    }

    pub fn vuln(&self, id: &str) -> Option<&VulnNode> {
        self.vulns.get(id)
    }

    pub fn vulns(&self) -> impl Iterator<Item = &VulnNode> {
        self.vulns.values()
    }

    pub fn version(&self, library: &str, v: &Version) -> Option<&VersionNode> {
        self.lib(library).and_then(|lib| lib.version(v))
    }

    /// Advisory ids affecting a concrete version; empty if unknown.
    pub fn vuln_ids_of(&self, library: &str, v: &Version) -> BTreeSet<String> {
        self.version(library, v)
            .map(|node| node.vuln_ids.clone())
            .unwrap_or_default()
    }

    pub fn ingest_packument(&mut self, doc: &PackumentDoc) -> Result<PackumentReport, GraphError> {
        let name = doc
            .name
            .as_deref()
            .filter(|n| !n.trim().is_empty())
            .ok_or(GraphError::MissingName)?
            .to_string();

        let mut report = PackumentReport {
            library: name.clone(),
            ..PackumentReport::default()
        };

        let lib = self.libs.entry(name.clone()).or_insert_with(|| LibNode {
            name: name.clone(),
            dist_tags: BTreeMap::new(),
            versions: Vec::new(),
            advisory_ids: BTreeSet::new(),
        });

        // The newest document wins on dist-tags wholesale.
        lib.dist_tags.clear();
        for (tag, target) in &doc.dist_tags {
            match Version::parse(target) {
                Ok(v) => {
                    lib.dist_tags.insert(tag.clone(), v);
                }
                Err(_) => report
                    .notes
                    .push(format!("dist-tag `{tag}` names unparseable version `{target}`")),
            }
        }

        let mut added: Vec<Version> = Vec::new();
        for (raw_version, manifest) in &doc.versions {
            let version = match Version::parse(raw_version) {
                Ok(v) => v,
                Err(_) => {
                    report.versions_rejected += 1;
                    report
                        .notes
                        .push(format!("version key `{raw_version}` is not semver"));
                    continue;
                }
            };
            let slot = lib.versions.binary_search_by(|n| n.version.cmp(&version));
            let pos = match slot {
                Ok(_) => {
                    report.versions_skipped += 1;
                    continue;
                }
                Err(pos) => pos,
            };

            let release_time = match doc.time.get(raw_version) {
                Some(text) => match DateTime::parse_from_rfc3339(text) {
                    Ok(t) => Some(t.with_timezone(&Utc)),
                    Err(_) => {
                        report.missing_release_times += 1;
                        report.notes.push(format!(
                            "release time `{text}` of {name}@{raw_version} is not ISO-8601"
                        ));
                        None
                    }
                },
                None => {
                    report.missing_release_times += 1;
                    None
                }
            };

            let mut dependencies = Vec::new();
            let sections = [
                (Section::Prod, &manifest.dependencies),
                (Section::Dev, &manifest.dev_dependencies),
                (Section::Peer, &manifest.peer_dependencies),
                (Section::Optional, &manifest.optional_dependencies),
            ];
            for (section, map) in sections {
                for (dep_name, raw) in map {
                    let parsed = match Constraint::parse(raw) {
                        Ok(c) => ParsedConstraint::Valid(c),
                        Err(e) => {
                            report.invalid_constraints += 1;
                            ParsedConstraint::Invalid {
                                reason: e.to_string(),
                            }
                        }
                    };
                    dependencies.push(DependencyDecl {
                        section,
                        name: dep_name.clone(),
                        raw: raw.clone(),
                        parsed,
                        default_target: None,
                    });
                }
            }

            lib.versions.insert(
                pos,
                VersionNode {
                    version: version.clone(),
                    release_time,
                    deprecated: manifest
                        .deprecated
                        .as_ref()
                        .map(|d| d.is_active())
                        .unwrap_or(false),
                    integrity: manifest.dist.as_ref().and_then(|d| d.integrity.clone()),
                    tarball: manifest.dist.as_ref().and_then(|d| d.tarball.clone()),
                    dependencies,
                    vuln_ids: BTreeSet::new(),
                },
            );
            added.push(version);
            report.versions_added += 1;
        }

        // New versions must pick up affects edges from advisories that were
        // ingested before them, whatever the ingest order was.
        let advisory_ids: Vec<String> = lib.advisory_ids.iter().cloned().collect();
        for id in advisory_ids {
            let range = match self.vulns.get(&id) {
                Some(vuln) => vuln.range.clone(),
                None => continue,
            };
            let lib = self.libs.get_mut(&name).expect("library just inserted");
            for version in &added {
                if range.satisfies(version).unwrap_or(false) {
                    let node = lib
                        .versions
                        .iter_mut()
                        .find(|n| n.version == *version)
                        .expect("version just inserted");
                    node.vuln_ids.insert(id.clone());
                }
            }
        }

        Ok(report)
    }

    pub fn ingest_advisory(&mut self, advisory: &Advisory) -> Result<AdvisoryReport, GraphError> {
        let mut report = AdvisoryReport {
            id: advisory.id.clone(),
            library: advisory.library.clone(),
            ..AdvisoryReport::default()
        };

        if let Some(existing) = self.vulns.get_mut(&advisory.id) {
            report.duplicate = true;
            report.notes.push(format!(
                "advisory `{}` already known; keeping the first record",
                advisory.id
            ));
            // The earliest publish time wins across duplicate records.
            if advisory.publish_time < existing.publish_time {
                existing.publish_time = advisory.publish_time;
                report
                    .notes
                    .push("publish time moved earlier by duplicate record".to_string());
            }
            report.affected_versions = self
                .libs
                .get(&existing.library)
                .map(|lib| {
                    lib.versions
                        .iter()
                        .filter(|n| n.vuln_ids.contains(&advisory.id))
                        .count()
                })
                .unwrap_or(0);
            return Ok(report);
        }

        let range = Constraint::parse(&advisory.affected_range).map_err(|e| {
            GraphError::UntestableRange {
                id: advisory.id.clone(),
                range: advisory.affected_range.clone(),
                reason: e.to_string(),
            }
        })?;
        if !range.is_testable() {
            return Err(GraphError::UntestableRange {
                id: advisory.id.clone(),
                range: advisory.affected_range.clone(),
                reason: format!("`{}` constraints cannot describe versions", range.kind.name()),
            });
        }

        let lib = self
            .libs
            .get_mut(&advisory.library)
            .ok_or_else(|| GraphError::UnknownLibrary {
                id: advisory.id.clone(),
                library: advisory.library.clone(),
            })?;

        for node in &mut lib.versions {
            if range.satisfies(&node.version).unwrap_or(false) {
                node.vuln_ids.insert(advisory.id.clone());
                report.affected_versions += 1;
            }
        }
        lib.advisory_ids.insert(advisory.id.clone());

        self.vulns.insert(
            advisory.id.clone(),
            VulnNode {
                id: advisory.id.clone(),
                library: advisory.library.clone(),
                range,
                publish_time: advisory.publish_time,
                severity: advisory.severity.clone(),
            },
        );

        Ok(report)
    }

    /// Refresh every *default* edge, or only those belonging to `scope`
    /// libraries. Defaults deliberately ignore time filters and selection
    /// policy: they answer "what would this constraint pick from the full
    /// graph right now".
    pub fn recompute_defaults(&mut self, scope: Option<&[String]>) -> DefaultsReport {
        let catalog: BTreeMap<String, Vec<Version>> = self
            .libs
            .iter()
            .map(|(name, lib)| (name.clone(), lib.version_numbers().cloned().collect()))
            .collect();

        let mut report = DefaultsReport::default();
        for (name, lib) in self.libs.iter_mut() {
            if let Some(scope) = scope {
                if !scope.iter().any(|s| s == name) {
                    continue;
                }
            }
            for node in &mut lib.versions {
                for decl in &mut node.dependencies {
                    report.examined += 1;
                    let target = match &decl.parsed {
                        ParsedConstraint::Valid(c) if c.is_testable() => catalog
                            .get(&decl.name)
                            .and_then(|versions| c.max_satisfying(versions))
                            .cloned(),
                        // Tags and out-of-band sources carry no default edge.
                        _ => None,
                    };
                    if target.is_some() {
                        report.resolved += 1;
                    }
                    if decl.default_target != target {
                        decl.default_target = target;
                        report.changed += 1;
                    }
                }
            }
        }
        report
    }

    /// Full-scan node and edge counts.
    pub fn stats(&self) -> GraphStats {
        let mut stats = GraphStats::default();
        stats.libraries = self.libs.len();
        stats.advisories = self.vulns.len();
        let mut libdeps: BTreeSet<(&str, &str)> = BTreeSet::new();
        let mut libaffects: BTreeSet<(&str, &str)> = BTreeSet::new();
        for lib in self.libs.values() {
            stats.versions += lib.versions.len();
            stats.has_edges += lib.versions.len();
            stats.upper_edges += lib.versions.len().saturating_sub(1);
            stats.lower_edges += lib.versions.len().saturating_sub(1);
            for node in &lib.versions {
                stats.depends_edges += node.dependencies.len();
                for decl in &node.dependencies {
                    if decl.default_target.is_some() {
                        stats.default_edges += 1;
                    }
                    libdeps.insert((lib.name.as_str(), decl.name.as_str()));
                }
                stats.affects_edges += node.vuln_ids.len();
                for id in &node.vuln_ids {
                    libaffects.insert((id.as_str(), lib.name.as_str()));
                }
            }
        }
        stats.libdeps_edges = libdeps.len();
        stats.libaffects_edges = libaffects.len();
        stats
    }

    /// Every version of `library` the constraint can accept, ignoring
    /// policy. Tags name at most one version; out-of-band kinds none.
    pub fn satisfying_versions(&self, library: &str, constraint: &Constraint) -> Vec<&VersionNode> {
        let Some(lib) = self.lib(library) else {
            return Vec::new();
        };
        match &constraint.kind {
            ConstraintKind::Tag(tag) => lib
                .dist_tags
                .get(tag)
                .and_then(|v| lib.version(v))
                .into_iter()
                .collect(),
            _ if constraint.is_testable() => lib
                .versions
                .iter()
                .filter(|n| constraint.satisfies(&n.version).unwrap_or(false))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Resolve one dependency link to a concrete version under a policy.
    pub fn resolve_link(
        &self,
        library: &str,
        constraint: &Constraint,
        policy: &SelectionPolicy,
    ) -> Result<&VersionNode, LinkError> {
        let lib = self.lib(library).ok_or_else(|| LinkError::UnknownLibrary {
            library: library.to_string(),
        })?;

        match &constraint.kind {
            ConstraintKind::GitUrl(_) | ConstraintKind::RemoteUrl(_) | ConstraintKind::LocalPath(_) => {
                Err(LinkError::UnsupportedKind {
                    raw: constraint.raw.clone(),
                    kind: constraint.kind.name(),
                })
            }
            ConstraintKind::Tag(tag) => {
                let target = lib.dist_tags.get(tag).ok_or_else(|| LinkError::UnknownTag {
                    library: library.to_string(),
                    tag: tag.clone(),
                })?;
                lib.version(target)
                    .filter(|node| policy.admits(library, node))
                    .ok_or_else(|| LinkError::TagTargetUnavailable {
                        library: library.to_string(),
                        tag: tag.clone(),
                    })
            }
            _ => {
                let satisfying: Vec<&VersionNode> = lib
                    .versions
                    .iter()
                    .filter(|node| policy.admits(library, node))
                    .filter(|node| constraint.satisfies(&node.version).unwrap_or(false))
                    .collect();
                if satisfying.is_empty() {
                    return Err(LinkError::NoSatisfyingVersion {
                        library: library.to_string(),
                        constraint: constraint.raw.clone(),
                    });
                }
                if policy.prefer_latest_tag {
                    if let Some(latest) = lib.latest_tag() {
                        if let Some(node) = satisfying.iter().find(|n| n.version == *latest) {
                            return Ok(node);
                        }
                    }
                }
                if policy.avoid_deprecated {
                    if let Some(node) = satisfying.iter().rev().find(|n| !n.deprecated) {
                        return Ok(node);
                    }
                }
                Ok(satisfying.last().expect("nonempty"))
            }
        }
    }
}
