//! Good sequences `b`, growth sequences `p` and good pairs `(b, p)`.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use thiserror::Error;

/// Derived inequalities are checked with this relative slack.
pub const REL_TOL: f64 = 1e-12;

/// Number of cached terms of a sequence.
const CACHE: usize = 160;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("ratio bound violated: sup b_(k+1)/b_k = {0} is not below 1/25")]
    RatioTooLarge(f64),
    #[error("sequence terms must be positive and finite")]
    NotPositive,
    #[error("p_{k} = {value} is too large to build a good pair")]
    PTooLarge { k: usize, value: String },
    #[error("p_1 must be at least 2")]
    PTooSmall,
    #[error("at least one term is required")]
    Empty,
    #[error("cannot parse scale description {0:?}")]
    Parse(String),
}

/// Finite description of a decreasing positive sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BRepr {
    /// `b_k = c·q^k`.
    Geometric { c: f64, q: f64 },
    /// `b_0 = b0`, `b_k = b_(k-1)·q[k-1]` for `k ≤ q.len()`, then ratio `tail`.
    Ratios { b0: f64, q: Vec<f64>, tail: f64 },
}

/// A sequence with `sup b_(k+1)/b_k < 1/25`, with its constants `M_b` and
/// `λ_b = 25·M_b`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "BRepr", into = "BRepr")]
pub struct GoodSequence {
    repr: BRepr,
    m_b: f64,
    lambda_b: f64,
    cache: Vec<f64>,
}

impl PartialEq for GoodSequence {
    fn eq(&self, other: &Self) -> bool {
        self.repr == other.repr
    }
}

impl From<GoodSequence> for BRepr {
    fn from(b: GoodSequence) -> BRepr {
        b.repr
    }
}

impl TryFrom<BRepr> for GoodSequence {
    type Error = ScaleError;
    fn try_from(repr: BRepr) -> Result<Self, ScaleError> {
        GoodSequence::from_repr(repr)
    }
}

/// `geometric(c, q)`: `b_k = c·q^k`, good when `0 < q < 1/25`.
pub fn geometric_good(c: f64, q: f64) -> Result<GoodSequence, ScaleError> {
    GoodSequence::from_repr(BRepr::Geometric { c, q })
}

impl GoodSequence {
    pub fn from_repr(repr: BRepr) -> Result<Self, ScaleError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let m_b = match &repr {
            BRepr::Geometric { c, q } => {
                if !positive(*c) || !positive(*q) {
                    return Err(ScaleError::NotPositive);
                }
                *q
            }
            BRepr::Ratios { b0, q, tail } => {
                if !positive(*b0) || !positive(*tail) || !q.iter().all(|x| positive(*x)) {
                    return Err(ScaleError::NotPositive);
                }
                q.iter().copied().fold(*tail, f64::max)
            }
        };
        if m_b >= 1.0 / 25.0 {
            return Err(ScaleError::RatioTooLarge(m_b));
        }
        let mut b = GoodSequence {
            repr,
            m_b,
            lambda_b: 25.0 * m_b,
            cache: Vec::new(),
        };
        b.cache = (0..CACHE as u64).map(|k| b.compute(k)).collect();
        if b.cache.iter().take(64).any(|x| !positive(*x)) {
            return Err(ScaleError::NotPositive);
        }
        Ok(b)
    }

    pub fn repr(&self) -> &BRepr {
        &self.repr
    }

    /// `M_b = sup b_(k+1)/b_k`, exact on the representation.
    pub fn m_b(&self) -> f64 {
        self.m_b
    }

    pub fn lambda_b(&self) -> f64 {
        self.lambda_b
    }

    fn ratio(&self, k: u64) -> f64 {
        match &self.repr {
            BRepr::Geometric { q, .. } => *q,
            BRepr::Ratios { q, tail, .. } => q.get(k as usize - 1).copied().unwrap_or(*tail),
        }
    }

    fn compute(&self, k: u64) -> f64 {
        match &self.repr {
            BRepr::Geometric { c, q } => c * q.powi(k.min(i32::MAX as u64) as i32),
            BRepr::Ratios { b0, .. } => (1..=k).fold(*b0, |acc, i| acc * self.ratio(i)),
        }
    }

    /// The term `b_k`.
    pub fn b(&self, k: u64) -> f64 {
        match self.cache.get(k as usize) {
            Some(v) => *v,
            None => self.compute(k),
        }
    }

    /// The sequence `b^i = (b_(i+k))_k`.
    pub fn shift(&self, i: u64) -> GoodSequence {
        let repr = match &self.repr {
            BRepr::Geometric { c, q } => BRepr::Geometric {
                c: c * q.powi(i as i32),
                q: *q,
            },
            BRepr::Ratios { q, tail, .. } => BRepr::Ratios {
                b0: self.b(i),
                q: q.iter().skip(i as usize).copied().collect(),
                tail: *tail,
            },
        };
        GoodSequence::from_repr(repr).expect("shifts of good sequences are good")
    }

    /// `sup_k b'_k / b_k` for a sequence `b'` compared against `self`.
    pub fn ratio_sup(&self, other: &GoodSequence) -> f64 {
        if let (BRepr::Geometric { c, q }, BRepr::Geometric { c: c2, q: q2 }) =
            (&self.repr, &other.repr)
        {
            if q2 <= q {
                return c2 / c;
            }
        }
        (0..96).map(|k| other.b(k) / self.b(k)).fold(0.0, f64::max)
    }

    /// Parses `geom:<c>/<den>` (ratio `1/den`), `geom:c=<x>,q=<y>` or
    /// `ratios:<b0>;<q1>,<q2>,…;<tail>`. Numbers may be written as fractions.
    pub fn parse_cli(s: &str) -> Result<GoodSequence, ScaleError> {
        let err = || ScaleError::Parse(s.to_string());
        let (kind, body) = s.split_once(':').ok_or_else(err)?;
        match kind {
            "geom" | "geometric" => {
                if body.contains('=') {
                    let mut c = None;
                    let mut q = None;
                    for part in body.split(',') {
                        let (k, v) = part.split_once('=').ok_or_else(err)?;
                        let v = parse_number(v).ok_or_else(err)?;
                        match k.trim() {
                            "c" => c = Some(v),
                            "q" => q = Some(v),
                            _ => return Err(err()),
                        }
                    }
                    geometric_good(c.ok_or_else(err)?, q.ok_or_else(err)?)
                } else {
                    let (c, den) = body.split_once('/').ok_or_else(err)?;
                    let c = parse_number(c).ok_or_else(err)?;
                    let den = parse_number(den).ok_or_else(err)?;
                    geometric_good(c, 1.0 / den)
                }
            }
            "ratios" => {
                let parts: Vec<&str> = body.split(';').collect();
                if parts.len() != 3 {
                    return Err(err());
                }
                let b0 = parse_number(parts[0]).ok_or_else(err)?;
                let q = if parts[1].trim().is_empty() {
                    Vec::new()
                } else {
                    parts[1]
                        .split(',')
                        .map(|x| parse_number(x).ok_or_else(err))
                        .collect::<Result<Vec<_>, _>>()?
                };
                let tail = parse_number(parts[2]).ok_or_else(err)?;
                GoodSequence::from_repr(BRepr::Ratios { b0, q, tail })
            }
            _ => Err(err()),
        }
    }
}

/// Parses `x` or `a/b`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => s.parse().ok(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GoodReport {
    pub m_b: f64,
    pub lambda_b: f64,
    pub ratio_bound_holds: bool,
    pub checked_terms: u64,
    /// Indices `k` where `b_k ≤ λ_b/20 · (b_(k-1) − 2b_k − b_(k+1))` fails.
    pub derived_failures: Vec<u64>,
}

impl GoodReport {
    pub fn pass(&self) -> bool {
        self.ratio_bound_holds && self.derived_failures.is_empty()
    }
}

/// Checks the ratio bound and the derived separation inequality for `k ≤ upto`.
pub fn validate_good(b: &GoodSequence, upto: u64) -> GoodReport {
    let lambda = b.lambda_b();
    let derived_failures = (1..=upto)
        .filter(|&k| {
            let lhs = b.b(k);
            let rhs = lambda / 20.0 * (b.b(k - 1) - 2.0 * b.b(k) - b.b(k + 1));
            lhs > rhs * (1.0 + REL_TOL)
        })
        .collect();
    GoodReport {
        m_b: b.m_b(),
        lambda_b: lambda,
        ratio_bound_holds: b.m_b() < 1.0 / 25.0,
        checked_terms: upto,
        derived_failures,
    }
}

/// How a growth sequence is generated from `p_1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PMode {
    /// `p_(n+1) = p_n^m`.
    PowerM { m: u32 },
    /// `p_(n+1) = p_n^n`.
    PowerN,
    /// Explicit terms; the last one repeats.
    List { terms: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PSequence {
    pub p1: u64,
    pub mode: PMode,
}

/// The growth sequence used for order `m`: `p_1` and the power rule `m`.
pub fn p_for_order(m: u32, p1: u64) -> PSequence {
    PSequence {
        p1,
        mode: PMode::PowerM { m },
    }
}

impl PSequence {
    /// `p_1, …, p_n`.
    pub fn terms(&self, n: usize) -> Vec<BigUint> {
        let mut out: Vec<BigUint> = Vec::with_capacity(n);
        for i in 1..=n {
            let next = if i == 1 {
                match &self.mode {
                    PMode::List { terms } => BigUint::from(*terms.first().unwrap_or(&self.p1)),
                    _ => BigUint::from(self.p1),
                }
            } else {
                let prev = &out[i - 2];
                match &self.mode {
                    PMode::PowerM { m } => prev.pow(*m),
                    PMode::PowerN => prev.pow((i - 1) as u32),
                    PMode::List { terms } => {
                        BigUint::from(*terms.get(i - 1).or(terms.last()).unwrap_or(&self.p1))
                    }
                }
            };
            out.push(next);
        }
        out
    }

    /// Parses `power:<p1>:m=<m>`, `powern:<p1>` or `list:<a>,<b>,…`.
    pub fn parse_cli(s: &str) -> Result<PSequence, ScaleError> {
        let err = || ScaleError::Parse(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["power", p1, m] => {
                let m = m.trim_start_matches("m=").parse().map_err(|_| err())?;
                Ok(PSequence {
                    p1: p1.parse().map_err(|_| err())?,
                    mode: PMode::PowerM { m },
                })
            }
            ["powern", p1] => Ok(PSequence {
                p1: p1.parse().map_err(|_| err())?,
                mode: PMode::PowerN,
            }),
            ["list", xs] => {
                let terms = xs
                    .split(',')
                    .map(|x| x.trim().parse::<u64>().map_err(|_| err()))
                    .collect::<Result<Vec<_>, _>>()?;
                let p1 = *terms.first().ok_or_else(err)?;
                Ok(PSequence {
                    p1,
                    mode: PMode::List { terms },
                })
            }
            _ => Err(err()),
        }
    }
}

/// A good sequence paired with a growth sequence, certified for `k ≤ k_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodPair {
    pub b: GoodSequence,
    pub p: PSequence,
    pub k_max: usize,
}

impl GoodPair {
    pub fn p_terms(&self) -> Vec<BigUint> {
        self.p.terms(self.k_max)
    }

    /// `p_k` as a machine integer, when it fits.
    pub fn p_small(&self, k: usize) -> Option<u64> {
        self.p.terms(k).last()?.to_u64()
    }
}

/// Largest `x ≤ bound / p` with `x·p ≤ bound` in floating point.
fn div_down(bound: f64, p: f64) -> f64 {
    let mut q = bound / p;
    while q * p > bound && q > 0.0 {
        q = f64::from_bits(q.to_bits() - 1);
    }
    q
}

/// Builds `b` from `p` so that `8(1+4p_k)·b_k < b_(k-1)` and `p_k·b_k ≤ λ_b·b_(k-1)`
/// for `k ≤ k_max`; ratios are constant beyond `k_max`.
pub fn pair_b_for_p(p: &PSequence, k_max: usize) -> Result<GoodPair, ScaleError> {
    if k_max == 0 {
        return Err(ScaleError::Empty);
    }
    if p.p1 < 2 {
        return Err(ScaleError::PTooSmall);
    }
    let terms = p.terms(k_max);
    let mut pf = Vec::with_capacity(k_max);
    for (i, t) in terms.iter().enumerate() {
        match t.to_f64() {
            Some(v) if v.is_finite() && v < 1e300 => pf.push(v),
            _ => {
                return Err(ScaleError::PTooLarge {
                    k: i + 1,
                    value: t.to_string(),
                })
            }
        }
    }
    let cap: f64 = 1.0 / 26.0;
    let q1 = cap.min(1.0 / (16.0 * (1.0 + 4.0 * pf[0])));
    let lambda = 25.0 * q1;
    let mut q = vec![q1];
    for &pk in &pf[1..] {
        let v = cap
            .min(1.0 / (16.0 * (1.0 + 4.0 * pk)))
            .min(div_down(lambda, pk));
        if !(v > 0.0) {
            return Err(ScaleError::PTooLarge {
                k: q.len() + 1,
                value: pk.to_string(),
            });
        }
        q.push(v);
    }
    let tail = *q.last().unwrap();
    let b = GoodSequence::from_repr(BRepr::Ratios { b0: 1.0, q, tail })?;
    Ok(GoodPair {
        b,
        p: p.clone(),
        k_max,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairReport {
    pub k_max: usize,
    /// Indices where `8(1+4p_k)·b_k < b_(k-1)` fails.
    pub separation_failures: Vec<usize>,
    /// Indices where `p_k·b_k ≤ λ_b·b_(k-1)` fails.
    pub growth_failures: Vec<usize>,
}

impl PairReport {
    pub fn pass(&self) -> bool {
        self.separation_failures.is_empty() && self.growth_failures.is_empty()
    }
}

/// Checks both pair inequalities for `k = 1..=k_max`, in ratio form.
pub fn check_pair(pair: &GoodPair) -> PairReport {
    let terms = pair.p_terms();
    let lambda = pair.b.lambda_b();
    let mut separation_failures = Vec::new();
    let mut growth_failures = Vec::new();
    for (i, t) in terms.iter().enumerate() {
        let k = i + 1;
        let pk = t.to_f64().unwrap_or(f64::INFINITY);
        let ratio = pair.b.ratio(k as u64);
        if !(8.0 * (1.0 + 4.0 * pk) * ratio < 1.0) {
            separation_failures.push(k);
        }
        if !(pk * ratio <= lambda) {
            growth_failures.push(k);
        }
    }
    PairReport {
        k_max: pair.k_max,
        separation_failures,
        growth_failures,
    }
}

/// `c_n = (1 + p_1 + … + p_(n-1) + n·2^n)^m / p_n` for `n = 1..=n_max`, exactly.
pub fn nonattractor_bound(p: &PSequence, m: u32, n_max: usize) -> Vec<BigRational> {
    let terms = p.terms(n_max);
    let mut partial = BigUint::one();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let two_n = BigUint::one() << n;
        let base = &partial + BigUint::from(n) * two_n;
        let num = base.pow(m);
        let den = terms[n - 1].clone();
        out.push(BigRational::new(num.into(), den.into()));
        partial += &terms[n - 1];
    }
    out
}

/// Floating approximation of an exact rational.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.numer().is_zero() {
        return 0.0;
    }
    r.to_f64().unwrap_or(f64::NAN)
}

impl FromStr for PSequence {
    type Err = ScaleError;
    fn from_str(s: &str) -> Result<Self, ScaleError> {
        PSequence::parse_cli(s)
    }
}
