//! Dependency constraints as they appear in manifests.
//!
//! A constraint string is classified into one of several kinds: a version
//! range, an exact pin, a wildcard, a dist-tag, or one of the out-of-band
//! sources (git, remote tarball, local path). The raw text is preserved
//! verbatim for diagnostics and serialization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::range::{RangeError, VersionRange};
use super::version::Version;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("invalid constraint `{input}`: {reason}")]
    Invalid { input: String, reason: String },
    #[error("constraint `{raw}` ({kind}) cannot be tested against a version")]
    Unsupported { raw: String, kind: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintKind {
    /// A semver range with at least one real bound.
    Range(VersionRange),
    /// A single pinned version.
    Exact(Version),
    /// Matches every release version: `*`, `x`, the empty string.
    Any,
    /// A dist-tag name such as `latest` or `beta`.
    Tag(String),
    /// A git URL or a hosted shorthand like `owner/repo`.
    GitUrl(String),
    /// An `http(s)://` tarball URL.
    RemoteUrl(String),
    /// A `file:` or relative/absolute path.
    LocalPath(String),
}

impl ConstraintKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::Range(_) => "range",
            ConstraintKind::Exact(_) => "exact",
            ConstraintKind::Any => "any",
            ConstraintKind::Tag(_) => "tag",
            ConstraintKind::GitUrl(_) => "git",
            ConstraintKind::RemoteUrl(_) => "remote",
            ConstraintKind::LocalPath(_) => "path",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub raw: String,
    pub kind: ConstraintKind,
}

const GIT_PREFIXES: [&str; 9] = [
    "git://",
    "git+ssh://",
    "git+http://",
    "git+https://",
    "git+file://",
    "github:",
    "gist:",
    "bitbucket:",
    "gitlab:",
];

fn is_hosted_shorthand(text: &str) -> bool {
    // `owner/repo` or `owner/repo#ref`, the github shorthand.
    let repo = text.split_once('#').map_or(text, |(repo, _)| repo);
    let mut parts = repo.split('/');
    let (owner, name) = match (parts.next(), parts.next(), parts.next()) {
        (Some(owner), Some(name), None) => (owner, name),
        _ => return false,
    };
    let valid = |s: &str| {
        !s.is_empty()
            && s.bytes()
                .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
    };
    valid(owner) && valid(name)
}

fn is_tag_name(text: &str) -> bool {
    let mut bytes = text.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_alphabetic() => {}
        _ => return false,
    }
    bytes.all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
}

impl Constraint {
    pub fn parse(raw: &str) -> Result<Constraint, ConstraintError> {
        let kind = Constraint::classify(raw)?;
        Ok(Constraint {
            raw: raw.to_string(),
            kind,
        })
    }

    fn classify(raw: &str) -> Result<ConstraintKind, ConstraintError> {
        let text = raw.trim();

        if GIT_PREFIXES.iter().any(|p| text.starts_with(p)) || text.starts_with("git@") {
            return Ok(ConstraintKind::GitUrl(text.to_string()));
        }
        if text.starts_with("http://") || text.starts_with("https://") {
            return Ok(ConstraintKind::RemoteUrl(text.to_string()));
        }
        if text.starts_with("file:")
            || text.starts_with("./")
            || text.starts_with("../")
            || text.starts_with('/')
            || text.starts_with("~/")
        {
            return Ok(ConstraintKind::LocalPath(text.to_string()));
        }

        let range_err = match VersionRange::parse(text) {
            Ok(range) => {
                // `A || *` still matches prereleases that `A` opts in, so only
                // collapse to the wildcard kind when no comparator anywhere
                // names a prerelease.
                let opts_in_prereleases = range
                    .conjunctions
                    .iter()
                    .flat_map(|c| &c.comparators)
                    .any(|c| c.version.is_prerelease());
                if range.is_any() && !opts_in_prereleases {
                    return Ok(ConstraintKind::Any);
                }
                if let Some(exact) = range.as_exact() {
                    return Ok(ConstraintKind::Exact(exact.clone()));
                }
                return Ok(ConstraintKind::Range(range));
            }
            Err(RangeError::Malformed { reason, .. }) => reason,
        };

        if is_hosted_shorthand(text) {
            return Ok(ConstraintKind::GitUrl(text.to_string()));
        }
        if is_tag_name(text) {
            return Ok(ConstraintKind::Tag(text.to_string()));
        }

        Err(ConstraintError::Invalid {
            input: raw.to_string(),
            reason: range_err,
        })
    }

    /// Whether `satisfies` can answer for this kind.
    pub fn is_testable(&self) -> bool {
        matches!(
            self.kind,
            ConstraintKind::Range(_) | ConstraintKind::Exact(_) | ConstraintKind::Any
        )
    }

    /// Does `v` satisfy this constraint? Errs for tag/git/remote/path kinds,
    /// which cannot be decided from a version number alone.
    pub fn satisfies(&self, v: &Version) -> Result<bool, ConstraintError> {
        match &self.kind {
            ConstraintKind::Range(range) => Ok(range.matches(v)),
            ConstraintKind::Exact(exact) => Ok(v == exact),
            ConstraintKind::Any => Ok(!v.is_prerelease()),
            _ => Err(ConstraintError::Unsupported {
                raw: self.raw.clone(),
                kind: self.kind.name(),
            }),
        }
    }

    /// The highest candidate that satisfies this constraint, if any.
    /// Untestable kinds satisfy nothing, so the answer is `None`.
    pub fn max_satisfying<'a, I>(&self, candidates: I) -> Option<&'a Version>
    where
        I: IntoIterator<Item = &'a Version>,
    {
        candidates
            .into_iter()
            .filter(|v| self.satisfies(v).unwrap_or(false))
            .max()
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for Constraint {
    type Err = ConstraintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Constraint::parse(s)
    }
}

impl Serialize for Constraint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for Constraint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Constraint::parse(&text).map_err(serde::de::Error::custom)
    }
}
