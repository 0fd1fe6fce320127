//! On-disk persistence for the graph.
//!
//! The source of truth is an append-only newline-delimited JSON log of every
//! ingested document, written in canonical form (sorted keys, compact). A
//! binary index caches the materialized graph; it carries the log's
//! fingerprint and is silently rebuilt by replaying the log whenever it is
//! missing, stale, or unreadable.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::advisory::{Advisory, AdvisoryReport};
use super::packument::{PackumentDoc, PackumentReport};
use super::{DepGraph, GraphError};

const LOG_FILE: &str = "log.ndjson";
const INDEX_FILE: &str = "index.bin";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ingest log line {line} is corrupt: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("ingest log line {line} no longer applies: {source}")]
    ReplayFailed {
        line: usize,
        #[source]
        source: GraphError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogRecord {
    Packument { doc: serde_json::Value },
    Advisory { doc: Advisory },
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    fingerprint: String,
    graph: DepGraph,
}

pub struct Store {
    dir: PathBuf,
}

impl Store {
    /// Open (or create) a store directory and materialize its graph.
    pub fn open(dir: impl Into<PathBuf>) -> Result<(Store, DepGraph), StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let store = Store { dir };

        let fingerprint = store.log_fingerprint()?;
        if let Some(graph) = store.try_load_index(&fingerprint) {
            return Ok((store, graph));
        }

        let mut graph = store.replay()?;
        graph.recompute_defaults(None);
        store.save_index(&graph)?;
        Ok((store, graph))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn log_path(&self) -> PathBuf {
        self.dir.join(LOG_FILE)
    }

    fn index_path(&self) -> PathBuf {
        self.dir.join(INDEX_FILE)
    }

    /// SHA-256 over the raw log bytes; the empty log hashes too.
    pub fn log_fingerprint(&self) -> Result<String, StoreError> {
        let path = self.log_path();
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&path, e)),
        };
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        Ok(format!("{:x}", hasher.finalize()))
    }

    fn try_load_index(&self, fingerprint: &str) -> Option<DepGraph> {
        let bytes = fs::read(self.index_path()).ok()?;
        let index: IndexFile = bincode::deserialize(&bytes).ok()?;
        (index.fingerprint == fingerprint).then_some(index.graph)
    }

    /// Write the index cache for the current log state.
    pub fn save_index(&self, graph: &DepGraph) -> Result<(), StoreError> {
        let index = IndexFile {
            fingerprint: self.log_fingerprint()?,
            graph: graph.clone(),
        };
        let bytes = bincode::serialize(&index).expect("graph serializes");
        let path = self.index_path();
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))
    }

    /// Rebuild a graph from scratch by replaying the log in order.
    pub fn replay(&self) -> Result<DepGraph, StoreError> {
        let mut graph = DepGraph::new();
        let path = self.log_path();
        let file = match File::open(&path) {
            Ok(file) => file,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(graph),
            Err(e) => return Err(io_err(&path, e)),
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: LogRecord =
                serde_json::from_str(&line).map_err(|e| StoreError::CorruptLog {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            let applied = match record {
                LogRecord::Packument { doc } => {
                    let doc = PackumentDoc::from_value(doc)
                        .map_err(|e| StoreError::CorruptLog {
                            line: i + 1,
                            reason: e.to_string(),
                        })?;
                    graph.ingest_packument(&doc).map(|_| ())
                }
                LogRecord::Advisory { doc } => graph.ingest_advisory(&doc).map(|_| ()),
            };
            applied.map_err(|e| StoreError::ReplayFailed {
                line: i + 1,
                source: e,
            })?;
        }
        Ok(graph)
    }

    /// Validate and ingest a packument, then append it to the log. A
    /// document that fails ingestion leaves the log untouched.
    pub fn ingest_packument(
        &self,
        graph: &mut DepGraph,
        doc: serde_json::Value,
    ) -> Result<PackumentReport, StoreError> {
        let typed = PackumentDoc::from_value(doc.clone())?;
        let report = graph.ingest_packument(&typed)?;
        self.append(&LogRecord::Packument { doc })?;
        Ok(report)
    }

    /// Validate and ingest an advisory, then append it to the log.
    pub fn ingest_advisory(
        &self,
        graph: &mut DepGraph,
        advisory: Advisory,
    ) -> Result<AdvisoryReport, StoreError> {
        let report = graph.ingest_advisory(&advisory)?;
        self.append(&LogRecord::Advisory { doc: advisory })?;
        Ok(report)
    }

    fn append(&self, record: &LogRecord) -> Result<(), StoreError> {
        // serde_json maps sort keys, so this line is already canonical.
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        let path = self.log_path();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        file.write_all(line.as_bytes()).map_err(|e| io_err(&path, e))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}
