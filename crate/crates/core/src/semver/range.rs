//! npm-style version ranges.
//!
//! Ranges are desugared at parse time into a disjunction of comparator
//! conjunctions: `~1.1.0` becomes `>=1.1.0 <1.2.0`, `^0.2.3` becomes
//! `>=0.2.3 <0.3.0`, `1.2.x` becomes `>=1.2.0 <1.3.0`, and so on. Matching
//! then only ever deals with the five primitive operators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::version::{Identifier, Version, VersionError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RangeError {
    #[error("malformed range `{input}`: {reason}")]
    Malformed { input: String, reason: String },
}

fn malformed(input: &str, reason: impl Into<String>) -> RangeError {
    RangeError::Malformed {
        input: input.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Op {
    fn test(self, v: &Version, bound: &Version) -> bool {
        match self {
            Op::Lt => v < bound,
            Op::Le => v <= bound,
            Op::Gt => v > bound,
            Op::Ge => v >= bound,
            Op::Eq => v == bound,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Eq => "=",
        })
    }
}

/// A single primitive bound such as `>=1.2.0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Comparator {
    pub op: Op,
    pub version: Version,
}

impl Comparator {
    fn new(op: Op, version: Version) -> Comparator {
        Comparator { op, version }
    }

    fn matches(&self, v: &Version) -> bool {
        self.op.test(v, &self.version)
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.op, self.version)
    }
}

/// An AND of comparators. An empty conjunction matches every release
/// version (this is what `*` and the empty range desugar to).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Conjunction {
    pub comparators: Vec<Comparator>,
}

impl Conjunction {
    fn matches(&self, v: &Version) -> bool {
        if !self.comparators.iter().all(|c| c.matches(v)) {
            return false;
        }
        // Prerelease gate: a prerelease only matches when some comparator in
        // this conjunction explicitly names a prerelease on the same
        // major.minor.patch triple. `^1.0.0` must not pull in `1.1.0-beta`.
        if v.is_prerelease() {
            return self
                .comparators
                .iter()
                .any(|c| c.version.is_prerelease() && c.version.triple() == v.triple());
        }
        true
    }
}

impl fmt::Display for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.comparators.is_empty() {
            return f.write_str("*");
        }
        for (i, c) in self.comparators.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if c.op == Op::Eq && self.comparators.len() == 1 {
                // A lone equality renders as the bare version.
                write!(f, "{}", c.version)?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// A fully desugared range: an OR of comparator conjunctions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VersionRange {
    pub conjunctions: Vec<Conjunction>,
}

impl VersionRange {
    pub fn parse(input: &str) -> Result<VersionRange, RangeError> {
        let mut conjunctions = Vec::new();
        for alt in input.split("||") {
            conjunctions.push(parse_alternative(alt, input)?);
        }
        Ok(VersionRange { conjunctions })
    }

    pub fn matches(&self, v: &Version) -> bool {
        self.conjunctions.iter().any(|c| c.matches(v))
    }

    /// True when the range matches every release version (`*`, `x`, the
    /// empty string, `>=*`, ...).
    pub fn is_any(&self) -> bool {
        self.conjunctions.iter().any(|c| c.comparators.is_empty())
    }

    /// When the whole range is a single equality, the pinned version.
    pub fn as_exact(&self) -> Option<&Version> {
        match self.conjunctions.as_slice() {
            [conj] => match conj.comparators.as_slice() {
                [c] if c.op == Op::Eq => Some(&c.version),
                _ => None,
            },
            _ => None,
        }
    }
}

impl fmt::Display for VersionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.conjunctions.iter().enumerate() {
            if i > 0 {
                f.write_str(" || ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for VersionRange {
    type Err = RangeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VersionRange::parse(s)
    }
}

impl Serialize for VersionRange {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VersionRange {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        VersionRange::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// A version pattern with optional components: `1`, `1.2`, `1.2.x`, `*`,
/// `1.2.3-beta`. Wildcard and missing components are both `None`.
#[derive(Debug, Clone)]
struct Partial {
    major: Option<u64>,
    minor: Option<u64>,
    patch: Option<u64>,
    prerelease: Vec<Identifier>,
}

impl Partial {
    fn full_version(&self) -> Option<Version> {
        match (self.major, self.minor, self.patch) {
            (Some(major), Some(minor), Some(patch)) => Some(Version {
                major,
                minor,
                patch,
                prerelease: self.prerelease.clone(),
                build: Vec::new(),
            }),
            _ => None,
        }
    }
}

fn ver(major: u64, minor: u64, patch: u64) -> Version {
    Version::new(major, minor, patch)
}

/// The smallest possible version, `0.0.0-0`. `<0.0.0-0` matches nothing;
/// it is what impossible comparators such as `>*` desugar to.
fn impossible() -> Comparator {
    Comparator::new(
        Op::Lt,
        Version {
            major: 0,
            minor: 0,
            patch: 0,
            prerelease: vec![Identifier::Numeric(0)],
            build: Vec::new(),
        },
    )
}

#[derive(Debug)]
enum Token {
    /// An optional operator applied to a version pattern.
    Item(Option<&'static str>, Partial),
    /// The ` - ` separator of a hyphen range.
    Hyphen,
}

const OPS: [&str; 7] = ["~>", ">=", "<=", "~", "^", ">", "<"];

fn lex(alt: &str, input: &str) -> Result<Vec<Token>, RangeError> {
    let mut tokens = Vec::new();
    let mut words = alt.split_whitespace().peekable();
    while let Some(word) = words.next() {
        if word == "-" {
            tokens.push(Token::Hyphen);
            continue;
        }
        let (op, rest) = match OPS.iter().find(|op| word.starts_with(**op)) {
            Some(op) => (Some(*op), &word[op.len()..]),
            None => match word.strip_prefix('=') {
                // Leading `=` is a plain pin; strip it and keep the pattern.
                Some(rest) => (None, rest),
                None => (None, word),
            },
        };
        let rest = if rest.is_empty() {
            // Operator separated from its version by whitespace: `>= 1.2.3`.
            words
                .next()
                .ok_or_else(|| malformed(input, "dangling operator"))?
        } else {
            rest
        };
        tokens.push(Token::Item(op, parse_partial(rest, input)?));
    }
    Ok(tokens)
}

fn parse_partial(text: &str, input: &str) -> Result<Partial, RangeError> {
    let text = text.strip_prefix('=').unwrap_or(text);
    let text = text.strip_prefix(['v', 'V']).unwrap_or(text);
    if text.is_empty() {
        return Err(malformed(input, "empty version pattern"));
    }
    // Build metadata is legal in a range but never affects matching.
    let text = match text.split_once('+') {
        Some((core, _build)) => core,
        None => text,
    };
    let (core, pre) = match text.split_once('-') {
        Some((core, pre)) => (core, Some(pre)),
        None => (text, None),
    };

    let mut components = core.split('.');
    let major = parse_component(components.next(), input)?;
    let minor = match components.next() {
        Some(c) => parse_component(Some(c), input)?,
        None => None,
    };
    let patch = match components.next() {
        Some(c) => parse_component(Some(c), input)?,
        None => None,
    };
    if components.next().is_some() {
        return Err(malformed(input, "more than three components in pattern"));
    }
    // A wildcard hides everything after it: `1.x.3` means `1.x`.
    let (minor, patch) = match (major, minor) {
        (None, _) => (None, None),
        (_, None) => (minor, None),
        _ => (minor, patch),
    };

    let prerelease = match pre {
        Some(pre) => {
            if patch.is_none() {
                return Err(malformed(
                    input,
                    "prerelease requires a full major.minor.patch pattern",
                ));
            }
            // Reuse the version parser for identifier validation.
            let probe = format!("0.0.0-{pre}");
            Version::parse(&probe)
                .map_err(|e| match e {
                    VersionError::Malformed { reason, .. } => malformed(input, reason),
                    VersionError::Empty => malformed(input, "empty prerelease"),
                })?
                .prerelease
        }
        None => Vec::new(),
    };

    Ok(Partial {
        major,
        minor,
        patch,
        prerelease,
    })
}

fn parse_component(part: Option<&str>, input: &str) -> Result<Option<u64>, RangeError> {
    let part = part.ok_or_else(|| malformed(input, "missing component"))?;
    if part.is_empty() {
        return Err(malformed(input, "empty component"));
    }
    if matches!(part, "x" | "X" | "*") {
        return Ok(None);
    }
    if !part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(input, format!("invalid component `{part}`")));
    }
    part.parse()
        .map(Some)
        .map_err(|_| malformed(input, format!("component `{part}` overflows")))
}

fn parse_alternative(alt: &str, input: &str) -> Result<Conjunction, RangeError> {
    let tokens = lex(alt, input)?;
    let mut comparators = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        match &tokens[i] {
            Token::Hyphen => return Err(malformed(input, "misplaced hyphen")),
            Token::Item(op, partial) => {
                let is_hyphen = matches!(tokens.get(i + 1), Some(Token::Hyphen));
                if is_hyphen {
                    if op.is_some() {
                        return Err(malformed(input, "operator on hyphen range bound"));
                    }
                    let upper = match tokens.get(i + 2) {
                        Some(Token::Item(None, upper)) => upper,
                        _ => return Err(malformed(input, "incomplete hyphen range")),
                    };
                    desugar_hyphen(partial, upper, &mut comparators);
                    i += 3;
                } else {
                    desugar_item(*op, partial, &mut comparators, input)?;
                    i += 1;
                }
            }
        }
    }
    Ok(Conjunction { comparators })
}

fn desugar_item(
    op: Option<&'static str>,
    p: &Partial,
    out: &mut Vec<Comparator>,
    input: &str,
) -> Result<(), RangeError> {
    match op {
        None => desugar_plain(p, out),
        Some("~" | "~>") => desugar_tilde(p, out),
        Some("^") => desugar_caret(p, out),
        Some(">") => desugar_primitive(Op::Gt, p, out),
        Some(">=") => desugar_primitive(Op::Ge, p, out),
        Some("<") => desugar_primitive(Op::Lt, p, out),
        Some("<=") => desugar_primitive(Op::Le, p, out),
        Some(other) => return Err(malformed(input, format!("unknown operator `{other}`"))),
    }
    Ok(())
}

/// `1.2.3` pins, `1.2` and `1` widen to the missing components, a bare
/// wildcard matches everything.
fn desugar_plain(p: &Partial, out: &mut Vec<Comparator>) {
    match (p.major, p.minor, p.patch) {
        (None, ..) => {}
        (Some(major), None, _) => {
            out.push(Comparator::new(Op::Ge, ver(major, 0, 0)));
            out.push(Comparator::new(Op::Lt, ver(major + 1, 0, 0)));
        }
        (Some(major), Some(minor), None) => {
            out.push(Comparator::new(Op::Ge, ver(major, minor, 0)));
            out.push(Comparator::new(Op::Lt, ver(major, minor + 1, 0)));
        }
        _ => out.push(Comparator::new(Op::Eq, p.full_version().unwrap())),
    }
}

fn desugar_primitive(op: Op, p: &Partial, out: &mut Vec<Comparator>) {
    match (p.major, p.minor, p.patch) {
        (None, ..) => match op {
            // `>=*` and `<=*` match everything, `>*` and `<*` nothing.
            Op::Ge | Op::Le => {}
            _ => out.push(impossible()),
        },
        (Some(major), None, _) => match op {
            Op::Gt => out.push(Comparator::new(Op::Ge, ver(major + 1, 0, 0))),
            Op::Ge => out.push(Comparator::new(Op::Ge, ver(major, 0, 0))),
            Op::Lt => out.push(Comparator::new(Op::Lt, ver(major, 0, 0))),
            Op::Le => out.push(Comparator::new(Op::Lt, ver(major + 1, 0, 0))),
            Op::Eq => desugar_plain(p, out),
        },
        (Some(major), Some(minor), None) => match op {
            Op::Gt => out.push(Comparator::new(Op::Ge, ver(major, minor + 1, 0))),
            Op::Ge => out.push(Comparator::new(Op::Ge, ver(major, minor, 0))),
            Op::Lt => out.push(Comparator::new(Op::Lt, ver(major, minor, 0))),
            Op::Le => out.push(Comparator::new(Op::Lt, ver(major, minor + 1, 0))),
            Op::Eq => desugar_plain(p, out),
        },
        _ => out.push(Comparator::new(op, p.full_version().unwrap())),
    }
}

/// `~1.2.3` allows patch drift, `~1.2` is `1.2.x`, `~1` is `1.x`.
fn desugar_tilde(p: &Partial, out: &mut Vec<Comparator>) {
    match (p.major, p.minor, p.patch) {
        (None, ..) => {}
        (Some(_), None, _) | (Some(_), Some(_), None) => desugar_plain(p, out),
        (Some(major), Some(minor), Some(_)) => {
            out.push(Comparator::new(Op::Ge, p.full_version().unwrap()));
            out.push(Comparator::new(Op::Lt, ver(major, minor + 1, 0)));
        }
    }
}

/// `^` allows drift below the leftmost nonzero component.
fn desugar_caret(p: &Partial, out: &mut Vec<Comparator>) {
    match (p.major, p.minor, p.patch) {
        (None, ..) => {}
        (Some(major), None, _) => {
            out.push(Comparator::new(Op::Ge, ver(major, 0, 0)));
            out.push(Comparator::new(Op::Lt, ver(major + 1, 0, 0)));
        }
        (Some(major), Some(minor), None) => {
            out.push(Comparator::new(Op::Ge, ver(major, minor, 0)));
            let upper = if major > 0 {
                ver(major + 1, 0, 0)
            } else {
                ver(0, minor + 1, 0)
            };
            out.push(Comparator::new(Op::Lt, upper));
        }
        (Some(major), Some(minor), Some(patch)) => {
            out.push(Comparator::new(Op::Ge, p.full_version().unwrap()));
            let upper = if major > 0 {
                ver(major + 1, 0, 0)
            } else if minor > 0 {
                ver(0, minor + 1, 0)
            } else {
                ver(0, 0, patch + 1)
            };
            out.push(Comparator::new(Op::Lt, upper));
        }
    }
}

/// `a - b` is inclusive on both ends; partial bounds widen outward:
/// `1.2.3 - 2.3` means `>=1.2.3 <2.4.0`.
fn desugar_hyphen(lower: &Partial, upper: &Partial, out: &mut Vec<Comparator>) {
    match (lower.major, lower.minor, lower.patch) {
        (None, ..) => {}
        (Some(major), None, _) => out.push(Comparator::new(Op::Ge, ver(major, 0, 0))),
        (Some(major), Some(minor), None) => {
            out.push(Comparator::new(Op::Ge, ver(major, minor, 0)))
        }
        _ => out.push(Comparator::new(Op::Ge, lower.full_version().unwrap())),
    }
    match (upper.major, upper.minor, upper.patch) {
        (None, ..) => {}
        (Some(major), None, _) => out.push(Comparator::new(Op::Lt, ver(major + 1, 0, 0))),
        (Some(major), Some(minor), None) => {
            out.push(Comparator::new(Op::Lt, ver(major, minor + 1, 0)))
        }
        _ => out.push(Comparator::new(Op::Le, upper.full_version().unwrap())),
    }
}
