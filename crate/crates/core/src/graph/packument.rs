//! The registry document subset we ingest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A registry packument: one JSON document describing every published
/// version of a library. Unknown fields are ignored.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct PackumentDoc {
    pub name: Option<String>,
    #[serde(default, rename = "dist-tags")]
    pub dist_tags: BTreeMap<String, String>,
    /// Version string (or `created`/`modified`) to ISO-8601 release time.
    #[serde(default)]
    pub time: BTreeMap<String, String>,
    #[serde(default)]
    pub versions: BTreeMap<String, VersionManifest>,
}

impl PackumentDoc {
    pub fn from_value(value: serde_json::Value) -> Result<PackumentDoc, serde_json::Error> {
        serde_json::from_value(value)
    }
}

/// The per-version manifest subset.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct VersionManifest {
    #[serde(default)]
    pub dependencies: BTreeMap<String, String>,
    #[serde(default, rename = "devDependencies")]
    pub dev_dependencies: BTreeMap<String, String>,
    #[serde(default, rename = "peerDependencies")]
    pub peer_dependencies: BTreeMap<String, String>,
    #[serde(default, rename = "optionalDependencies")]
    pub optional_dependencies: BTreeMap<String, String>,
    #[serde(default)]
    pub deprecated: Option<Deprecation>,
    #[serde(default)]
    pub dist: Option<DistInfo>,
}

/// `deprecated` in the wild is either a boolean or a message string.
/// An empty message means the deprecation was revoked.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Deprecation {
    Flag(bool),
    Message(String),
}

impl Deprecation {
    pub fn is_active(&self) -> bool {
        match self {
            Deprecation::Flag(flag) => *flag,
            Deprecation::Message(message) => !message.is_empty(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct DistInfo {
    #[serde(default)]
    pub integrity: Option<String>,
    #[serde(default)]
    pub tarball: Option<String>,
}

/// What happened while ingesting one packument.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PackumentReport {
    pub library: String,
    pub versions_added: usize,
    /// Version keys that were already present; re-ingest keeps the first copy.
    pub versions_skipped: usize,
    /// Version keys that do not parse as semver.
    pub versions_rejected: usize,
    pub invalid_constraints: usize,
    pub missing_release_times: usize,
    pub notes: Vec<String>,
}

impl PackumentReport {
    pub fn is_clean(&self) -> bool {
        self.versions_rejected == 0 && self.invalid_constraints == 0 && self.notes.is_empty()
    }
}
