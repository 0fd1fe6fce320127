use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VersionError {
    #[error("empty version string")]
    Empty,
    #[error("malformed version `{input}`: {reason}")]
    Malformed { input: String, reason: String },
}

fn malformed(input: &str, reason: impl Into<String>) -> VersionError {
    VersionError::Malformed {
        input: input.to_string(),
        reason: reason.into(),
    }
}

/// One dot-separated prerelease identifier. Numeric identifiers sort below
/// alphanumeric ones and compare by value, never lexically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Identifier {
    Numeric(u64),
    Alpha(String),
}

impl Identifier {
    fn parse(text: &str, input: &str, strict: bool) -> Result<Identifier, VersionError> {
        if text.is_empty() {
            return Err(malformed(input, "empty prerelease identifier"));
        }
        if !text.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-') {
            return Err(malformed(
                input,
                format!("invalid character in identifier `{text}`"),
            ));
        }
        if text.bytes().all(|b| b.is_ascii_digit()) {
            if strict && text.len() > 1 && text.starts_with('0') {
                return Err(malformed(
                    input,
                    format!("numeric identifier `{text}` has a leading zero"),
                ));
            }
            let n: u64 = text
                .parse()
                .map_err(|_| malformed(input, format!("numeric identifier `{text}` overflows")))?;
            Ok(Identifier::Numeric(n))
        } else {
            Ok(Identifier::Alpha(text.to_string()))
        }
    }
}

impl Ord for Identifier {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Identifier::Numeric(a), Identifier::Numeric(b)) => a.cmp(b),
            (Identifier::Numeric(_), Identifier::Alpha(_)) => Ordering::Less,
            (Identifier::Alpha(_), Identifier::Numeric(_)) => Ordering::Greater,
            (Identifier::Alpha(a), Identifier::Alpha(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for Identifier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identifier::Numeric(n) => write!(f, "{n}"),
            Identifier::Alpha(s) => f.write_str(s),
        }
    }
}

/// A parsed semantic version.
///
/// Build metadata is kept for rendering but ignored by `Eq`, `Ord` and `Hash`,
/// so `1.0.0+a` and `1.0.0+b` name the same version everywhere it matters.
#[derive(Debug, Clone, Eq)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    pub prerelease: Vec<Identifier>,
    pub build: Vec<String>,
}

impl Version {
    pub fn new(major: u64, minor: u64, patch: u64) -> Version {
        Version {
            major,
            minor,
            patch,
            prerelease: Vec::new(),
            build: Vec::new(),
        }
    }

    pub fn with_prerelease(major: u64, minor: u64, patch: u64, pre: &[&str]) -> Version {
        let prerelease = pre
            .iter()
            .map(|p| Identifier::parse(p, p, false).expect("valid identifier"))
            .collect();
        Version {
            major,
            minor,
            patch,
            prerelease,
            build: Vec::new(),
        }
    }

    pub fn is_prerelease(&self) -> bool {
        !self.prerelease.is_empty()
    }

    /// The `(major, minor, patch)` triple, used by the prerelease gate when
    /// matching ranges.
    pub fn triple(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.patch)
    }

    /// Lenient parse: tolerates surrounding whitespace, a leading `v`/`V` and
    /// leading zeros in numeric fields. This is the right mode for registry
    /// data, which is full of `v1.0.0` and friends.
    pub fn parse(text: &str) -> Result<Version, VersionError> {
        Version::parse_inner(text, false)
    }

    /// Strict parse: rejects the `v` prefix, whitespace and leading zeros.
    pub fn parse_strict(text: &str) -> Result<Version, VersionError> {
        Version::parse_inner(text, true)
    }

    fn parse_inner(input: &str, strict: bool) -> Result<Version, VersionError> {
        let mut text = input;
        if !strict {
            text = text.trim();
            text = text.strip_prefix(['v', 'V']).unwrap_or(text);
        }
        if text.is_empty() {
            return Err(VersionError::Empty);
        }

        let (core, build) = match text.split_once('+') {
            Some((core, build)) => (core, Some(build)),
            None => (text, None),
        };
        let (triple, pre) = match core.split_once('-') {
            Some((triple, pre)) => (triple, Some(pre)),
            None => (core, None),
        };

        let mut nums = triple.split('.');
        let major = parse_number(nums.next(), input, strict, "major")?;
        let minor = parse_number(nums.next(), input, strict, "minor")?;
        let patch = parse_number(nums.next(), input, strict, "patch")?;
        if nums.next().is_some() {
            return Err(malformed(input, "more than three version components"));
        }

        let prerelease = match pre {
            Some(pre) => pre
                .split('.')
                .map(|id| Identifier::parse(id, input, strict))
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };

        let build = match build {
            Some(build) => build
                .split('.')
                .map(|id| {
                    if id.is_empty()
                        || !id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
                    {
                        Err(malformed(input, format!("invalid build metadata `{id}`")))
                    } else {
                        Ok(id.to_string())
                    }
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };

        Ok(Version {
            major,
            minor,
            patch,
            prerelease,
            build,
        })
    }
}

fn parse_number(
    part: Option<&str>,
    input: &str,
    strict: bool,
    field: &str,
) -> Result<u64, VersionError> {
    let part = part.ok_or_else(|| malformed(input, format!("missing {field} component")))?;
    if part.is_empty() {
        return Err(malformed(input, format!("empty {field} component")));
    }
    if !part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(
            input,
            format!("{field} component `{part}` is not a number"),
        ));
    }
    if strict && part.len() > 1 && part.starts_with('0') {
        return Err(malformed(
            input,
            format!("{field} component `{part}` has a leading zero"),
        ));
    }
    part.parse()
        .map_err(|_| malformed(input, format!("{field} component `{part}` overflows")))
}

impl PartialEq for Version {
    fn eq(&self, other: &Self) -> bool {
        self.major == other.major
            && self.minor == other.minor
            && self.patch == other.patch
            && self.prerelease == other.prerelease
    }
}

impl Hash for Version {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.major.hash(state);
        self.minor.hash(state);
        self.patch.hash(state);
        self.prerelease.hash(state);
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        self.triple()
            .cmp(&other.triple())
            .then_with(|| match (self.is_prerelease(), other.is_prerelease()) {
                (false, false) => Ordering::Equal,
                (true, false) => Ordering::Less,
                (false, true) => Ordering::Greater,
                (true, true) => self.prerelease.cmp(&other.prerelease),
            })
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)?;
        for (i, id) in self.prerelease.iter().enumerate() {
            f.write_str(if i == 0 { "-" } else { "." })?;
            write!(f, "{id}")?;
        }
        for (i, id) in self.build.iter().enumerate() {
            f.write_str(if i == 0 { "+" } else { "." })?;
            f.write_str(id)?;
        }
        Ok(())
    }
}

impl FromStr for Version {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Version::parse(s)
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Version::parse(&text).map_err(serde::de::Error::custom)
    }
}
