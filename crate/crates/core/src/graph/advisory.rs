//! Security advisory records.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// One advisory: a vulnerability identifier, the library it affects, and
/// the range of affected versions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Advisory {
    pub id: String,
    pub library: String,
    pub affected_range: String,
    pub publish_time: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<String>,
}

/// What happened while ingesting one advisory.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AdvisoryReport {
    pub id: String,
    pub library: String,
    /// The id was already known; the record is kept as-is except that the
    /// earliest publish time wins.
    pub duplicate: bool,
    /// Number of version nodes the affected range matches right now.
    pub affected_versions: usize,
    pub notes: Vec<String>,
}
