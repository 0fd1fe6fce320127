//! Ground truth for range satisfaction, independent of the production
//! parser. Ranges are generated as syntax trees, rendered to strings for
//! the implementation under test, and evaluated here by desugaring each
//! primitive to plain comparators and testing them directly.

use std::cmp::Ordering;

use rand::Rng;

const ALPHAS: [&str; 5] = ["alpha", "beta", "rc", "pre", "x"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OIdent {
    Num(u64),
    Alpha(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OVersion {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    pub pre: Vec<OIdent>,
}

impl OVersion {
    fn release(major: u64, minor: u64, patch: u64) -> OVersion {
        OVersion {
            major,
            minor,
            patch,
            pre: Vec::new(),
        }
    }

    fn triple(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.patch)
    }

    pub fn render(&self) -> String {
        let mut s = format!("{}.{}.{}", self.major, self.minor, self.patch);
        if !self.pre.is_empty() {
            s.push('-');
            let parts: Vec<String> = self
                .pre
                .iter()
                .map(|i| match i {
                    OIdent::Num(n) => n.to_string(),
                    OIdent::Alpha(a) => (*a).to_string(),
                })
                .collect();
            s.push_str(&parts.join("."));
        }
        s
    }
}

/// Precedence per the semver specification: triple first, then a release
/// outranks any prerelease, then identifiers left to right with numeric
/// ones below alphanumeric ones.
pub fn cmp_versions(a: &OVersion, b: &OVersion) -> Ordering {
    let by_triple = a.triple().cmp(&b.triple());
    if by_triple != Ordering::Equal {
        return by_triple;
    }
    match (a.pre.is_empty(), b.pre.is_empty()) {
        (true, true) => return Ordering::Equal,
        (true, false) => return Ordering::Greater,
        (false, true) => return Ordering::Less,
        (false, false) => {}
    }
    for pair in a.pre.iter().zip(b.pre.iter()) {
        let step = match pair {
            (OIdent::Num(x), OIdent::Num(y)) => x.cmp(y),
            (OIdent::Num(_), OIdent::Alpha(_)) => Ordering::Less,
            (OIdent::Alpha(_), OIdent::Num(_)) => Ordering::Greater,
            (OIdent::Alpha(x), OIdent::Alpha(y)) => x.cmp(y),
        };
        if step != Ordering::Equal {
            return step;
        }
    }
    a.pre.len().cmp(&b.pre.len())
}

#[derive(Clone, Copy, Debug)]
pub enum COp {
    Lt,
    Le,
    Gt,
    Ge,
    Exactly,
}

pub struct Comparator {
    op: COp,
    v: OVersion,
}

fn comparator_holds(c: &Comparator, v: &OVersion) -> bool {
    let ord = cmp_versions(v, &c.v);
    match c.op {
        COp::Lt => ord == Ordering::Less,
        COp::Le => ord != Ordering::Greater,
        COp::Gt => ord == Ordering::Greater,
        COp::Ge => ord != Ordering::Less,
        COp::Exactly => ord == Ordering::Equal,
    }
}

#[derive(Clone, Debug)]
pub enum Prim {
    /// `1.2.3` — a bare exact version.
    Bare(OVersion),
    /// `=1.2.3`
    Exact(OVersion),
    /// `<`, `<=`, `>`, `>=` with a full version operand.
    Cmp(COp, OVersion),
    Tilde(OVersion),
    Caret(OVersion),
    Star,
    /// `2.x`
    WildMajor(u64),
    /// `2.3.x`
    WildMinor(u64, u64),
    /// `1.2.3 - 4.5.6`
    Hyphen(OVersion, OVersion),
}

impl Prim {
    fn render(&self) -> String {
        match self {
            Prim::Bare(v) => v.render(),
            Prim::Exact(v) => format!("={}", v.render()),
            Prim::Cmp(op, v) => {
                let sign = match op {
                    COp::Lt => "<",
                    COp::Le => "<=",
                    COp::Gt => ">",
                    COp::Ge => ">=",
                    COp::Exactly => "=",
                };
                format!("{sign}{}", v.render())
            }
            Prim::Tilde(v) => format!("~{}", v.render()),
            Prim::Caret(v) => format!("^{}", v.render()),
            Prim::Star => "*".to_string(),
            Prim::WildMajor(m) => format!("{m}.x"),
            Prim::WildMinor(m, n) => format!("{m}.{n}.x"),
            Prim::Hyphen(a, b) => format!("{} - {}", a.render(), b.render()),
        }
    }

    fn desugar(&self) -> Vec<Comparator> {
        let ge = |v: OVersion| Comparator { op: COp::Ge, v };
        let lt = |v: OVersion| Comparator { op: COp::Lt, v };
        match self {
            Prim::Bare(v) | Prim::Exact(v) => vec![Comparator {
                op: COp::Exactly,
                v: v.clone(),
            }],
            Prim::Cmp(op, v) => vec![Comparator {
                op: *op,
                v: v.clone(),
            }],
            Prim::Tilde(v) => vec![
                ge(v.clone()),
                lt(OVersion::release(v.major, v.minor + 1, 0)),
            ],
            Prim::Caret(v) => {
                let upper = if v.major > 0 {
                    OVersion::release(v.major + 1, 0, 0)
                } else if v.minor > 0 {
                    OVersion::release(0, v.minor + 1, 0)
                } else {
                    OVersion::release(0, 0, v.patch + 1)
                };
                vec![ge(v.clone()), lt(upper)]
            }
            Prim::Star => Vec::new(),
            Prim::WildMajor(m) => vec![
                ge(OVersion::release(*m, 0, 0)),
                lt(OVersion::release(m + 1, 0, 0)),
            ],
            Prim::WildMinor(m, n) => vec![
                ge(OVersion::release(*m, *n, 0)),
                lt(OVersion::release(*m, n + 1, 0)),
            ],
            Prim::Hyphen(a, b) => vec![
                ge(a.clone()),
                Comparator {
                    op: COp::Le,
                    v: b.clone(),
                },
            ],
        }
    }

    fn operands(&self) -> Vec<&OVersion> {
        match self {
            Prim::Bare(v)
            | Prim::Exact(v)
            | Prim::Cmp(_, v)
            | Prim::Tilde(v)
            | Prim::Caret(v) => vec![v],
            Prim::Hyphen(a, b) => vec![a, b],
            Prim::Star | Prim::WildMajor(_) | Prim::WildMinor(_, _) => Vec::new(),
        }
    }
}

pub struct ORange(pub Vec<Vec<Prim>>);

impl ORange {
    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|conj| {
                conj.iter()
                    .map(Prim::render)
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join(" || ")
    }

    /// A version matches when some alternative's comparators all hold and,
    /// if the version is a prerelease, that alternative names a prerelease
    /// on the same triple (the prerelease opt-in rule).
    pub fn matches(&self, v: &OVersion) -> bool {
        self.0.iter().any(|conj| {
            let comparators: Vec<Comparator> = conj.iter().flat_map(Prim::desugar).collect();
            if !comparators.iter().all(|c| comparator_holds(c, v)) {
                return false;
            }
            if v.pre.is_empty() {
                return true;
            }
            comparators
                .iter()
                .any(|c| !c.v.pre.is_empty() && c.v.triple() == v.triple())
        })
    }

    fn operands(&self) -> Vec<&OVersion> {
        self.0
            .iter()
            .flat_map(|conj| conj.iter().flat_map(Prim::operands))
            .collect()
    }
}

pub fn gen_version(rng: &mut impl Rng, allow_pre: bool) -> OVersion {
    let mut v = OVersion::release(rng.gen_range(0..4), rng.gen_range(0..4), rng.gen_range(0..4));
    if allow_pre && rng.gen_bool(0.25) {
        for _ in 0..rng.gen_range(1..=2) {
            v.pre.push(if rng.gen_bool(0.5) {
                OIdent::Num(rng.gen_range(0..5))
            } else {
                OIdent::Alpha(ALPHAS[rng.gen_range(0..ALPHAS.len())])
            });
        }
    }
    v
}

fn gen_prim(rng: &mut impl Rng) -> Prim {
    match rng.gen_range(0..13) {
        0 => Prim::Bare(gen_version(rng, true)),
        1 => Prim::Exact(gen_version(rng, true)),
        2 | 3 => {
            let op = [COp::Lt, COp::Le, COp::Gt, COp::Ge][rng.gen_range(0..4)];
            Prim::Cmp(op, gen_version(rng, true))
        }
        4 | 5 => Prim::Tilde(gen_version(rng, true)),
        6 | 7 => Prim::Caret(gen_version(rng, true)),
        8 => Prim::Star,
        9 => Prim::WildMajor(rng.gen_range(0..4)),
        10 => Prim::WildMinor(rng.gen_range(0..4), rng.gen_range(0..4)),
        _ => {
            let a = gen_version(rng, true);
            let b = gen_version(rng, true);
            Prim::Hyphen(a, b)
        }
    }
}

pub fn gen_range(rng: &mut impl Rng) -> ORange {
    let alternatives = (0..rng.gen_range(1..=2))
        .map(|_| (0..rng.gen_range(1..=2)).map(|_| gen_prim(rng)).collect())
        .collect();
    ORange(alternatives)
}

/// Probes cluster around the range's own operands: exact copies, copies
/// with the prerelease stripped or swapped, and small patch steps, so the
/// boundaries and the prerelease gate both get exercised.
pub fn gen_probe(rng: &mut impl Rng, range: &ORange) -> OVersion {
    let operands = range.operands();
    if operands.is_empty() || rng.gen_bool(0.4) {
        return gen_version(rng, true);
    }
    let mut probe = operands[rng.gen_range(0..operands.len())].clone();
    match rng.gen_range(0..5) {
        0 => {}
        1 => probe.pre.clear(),
        2 => probe.pre = vec![OIdent::Alpha("alpha"), OIdent::Num(rng.gen_range(0..3))],
        3 => probe.patch += 1,
        _ => probe.patch = probe.patch.saturating_sub(1),
    }
    probe
}
