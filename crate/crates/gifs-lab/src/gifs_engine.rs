//! Generalized iterated function systems on finite host clouds.
//!
//! A GIFS of order `m` is a finite family of maps `X^m → X`. Maps come in two
//! flavours: symbolic maps act on host labels and snap their output back onto
//! the host, so attractor equations can be checked exactly; numeric maps act
//! on point coordinates.

use crate::realization::{Geometry, Label, Pt, SpaceApprox};
use crate::symbolic::{Address, Entry, TreeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Tuple budget for one Hutchinson step.
pub const HUTCHINSON_BUDGET: u128 = 10_000_000;
/// Pair budget for exhaustive Lipschitz measurement.
pub const LIP_EXHAUSTIVE_BUDGET: u128 = 10_000_000;
/// Tuple budget for the tabulated branch-and-bound Lipschitz search.
pub const LIP_TABLE_BUDGET: u128 = 10_000_000;
/// Pairs drawn when neither exact regime fits.
pub const LIP_SAMPLE_PAIRS: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 0x005e_ed0f_61f5;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("empty point set")]
    EmptySet,
    #[error("a GIFS needs at least one map")]
    NoMaps,
    #[error("maps have different orders ({0} and {1})")]
    OrderMismatch(usize, usize),
    #[error("cannot lower the order of a map from {0} to {1}")]
    CannotLower(usize, usize),
    #[error("{tuples} tuples exceed the budget of {budget}")]
    BudgetExceeded { tuples: u128, budget: u128 },
    #[error(
        "parts are not separated enough: λ = {lambda} but the largest Lipschitz constant is {lip}"
    )]
    SeparationViolated { lambda: f64, lip: f64 },
    #[error("parts must be nonempty and pairwise disjoint")]
    BadParts,
    #[error("map {map} sends the cell {cell:?} into several components {components:?}")]
    NotWellDefined {
        map: String,
        cell: Vec<usize>,
        components: Vec<usize>,
    },
    #[error("no branch map for X_{0}")]
    MissingBranch(u32),
    #[error("target tree is not contained in the host tree at {0}")]
    NotSubtree(Address),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Symbolic,
    Numeric,
}

/// A map `X^m → X` on points of a host geometry.
pub trait GifsMap: Send + Sync {
    fn name(&self) -> &str;
    fn order(&self) -> usize;
    fn eval(&self, args: &[&Pt]) -> Pt;
    /// Lipschitz constant claimed by the construction, if any.
    fn claimed_lip(&self) -> Option<f64>;
    fn backend(&self) -> Backend;
}

impl fmt::Debug for dyn GifsMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{:?}, order {}]",
            self.name(),
            self.backend(),
            self.order()
        )
    }
}

pub type LabelRule = Arc<dyn Fn(&[&Label]) -> Label + Send + Sync>;
pub type LabelFn = Arc<dyn Fn(&Label) -> Label + Send + Sync>;
pub type PointRule = Arc<dyn Fn(&[&Pt]) -> Pt + Send + Sync>;

/// A map defined on host labels; outputs are snapped onto the host.
#[derive(Clone)]
pub struct SymbolicMap {
    pub name: String,
    pub order: usize,
    pub host: Arc<SpaceApprox>,
    pub rule: LabelRule,
    pub claimed: Option<f64>,
}

impl SymbolicMap {
    pub fn new(
        name: impl Into<String>,
        order: usize,
        host: Arc<SpaceApprox>,
        rule: LabelRule,
        claimed: Option<f64>,
    ) -> SymbolicMap {
        SymbolicMap {
            name: name.into(),
            order,
            host,
            rule,
            claimed,
        }
    }

    pub fn unary(
        name: impl Into<String>,
        host: Arc<SpaceApprox>,
        f: LabelFn,
        claimed: Option<f64>,
    ) -> SymbolicMap {
        SymbolicMap::new(
            name,
            1,
            host,
            Arc::new(move |a: &[&Label]| f(a[0])),
            claimed,
        )
    }

    pub fn eval_labels(&self, args: &[&Label]) -> Label {
        self.host.snap(&(self.rule)(args))
    }

    fn to_label(&self, p: &Pt) -> Label {
        match self.host.label_of(p) {
            Some(l) => l.clone(),
            None => {
                let i = nearest_brute(p, &self.host.pts(), &self.host.geometry).0;
                self.host.points[i].label.clone()
            }
        }
    }
}

impl GifsMap for SymbolicMap {
    fn name(&self) -> &str {
        &self.name
    }
    fn order(&self) -> usize {
        self.order
    }
    fn eval(&self, args: &[&Pt]) -> Pt {
        let labels: Vec<Label> = args.iter().map(|p| self.to_label(p)).collect();
        let refs: Vec<&Label> = labels.iter().collect();
        let out = self.eval_labels(&refs);
        self.host
            .pt_of(&out)
            .cloned()
            .unwrap_or_else(|| panic!("{} produced off-host label {out:?}", self.name))
    }
    fn claimed_lip(&self) -> Option<f64> {
        self.claimed
    }
    fn backend(&self) -> Backend {
        Backend::Symbolic
    }
}

/// A map defined directly on points.
#[derive(Clone)]
pub struct NumericMap {
    pub name: String,
    pub order: usize,
    pub rule: PointRule,
    pub claimed: Option<f64>,
}

impl NumericMap {
    pub fn new(
        name: impl Into<String>,
        order: usize,
        rule: PointRule,
        claimed: Option<f64>,
    ) -> NumericMap {
        NumericMap {
            name: name.into(),
            order,
            rule,
            claimed,
        }
    }

    /// A map on plain coordinates.
    pub fn plain<F>(name: impl Into<String>, order: usize, claimed: Option<f64>, f: F) -> NumericMap
    where
        F: Fn(&[&[f64]]) -> Vec<f64> + Send + Sync + 'static,
    {
        let rule: PointRule = Arc::new(move |args: &[&Pt]| {
            let coords: Vec<&[f64]> = args.iter().map(|p| p.w.as_slice()).collect();
            Pt::plain(f(&coords))
        });
        NumericMap::new(name, order, rule, claimed)
    }
}

impl GifsMap for NumericMap {
    fn name(&self) -> &str {
        &self.name
    }
    fn order(&self) -> usize {
        self.order
    }
    fn eval(&self, args: &[&Pt]) -> Pt {
        (self.rule)(args)
    }
    fn claimed_lip(&self) -> Option<f64> {
        self.claimed
    }
    fn backend(&self) -> Backend {
        Backend::Numeric
    }
}

/// `f̃(x_1, …, x_m) = f(x_1, …, x_k)`.
struct Lifted {
    inner: Arc<dyn GifsMap>,
    order: usize,
}

impl GifsMap for Lifted {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn order(&self) -> usize {
        self.order
    }
    fn eval(&self, args: &[&Pt]) -> Pt {
        self.inner.eval(&args[..self.inner.order()])
    }
    fn claimed_lip(&self) -> Option<f64> {
        self.inner.claimed_lip()
    }
    fn backend(&self) -> Backend {
        self.inner.backend()
    }
}

/// Raises the order of a map by ignoring the extra arguments.
pub fn lift_order(f: Arc<dyn GifsMap>, m: usize) -> Result<Arc<dyn GifsMap>, EngineError> {
    match f.order().cmp(&m) {
        std::cmp::Ordering::Equal => Ok(f),
        std::cmp::Ordering::Greater => Err(EngineError::CannotLower(f.order(), m)),
        std::cmp::Ordering::Less => Ok(Arc::new(Lifted { inner: f, order: m })),
    }
}

/// A finite family of maps of a common order.
#[derive(Clone)]
pub struct Gifs {
    pub maps: Vec<Arc<dyn GifsMap>>,
}

impl fmt::Debug for Gifs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.maps.iter()).finish()
    }
}

impl Gifs {
    pub fn new(maps: Vec<Arc<dyn GifsMap>>) -> Result<Gifs, EngineError> {
        let first = maps.first().ok_or(EngineError::NoMaps)?.order();
        if let Some(bad) = maps.iter().find(|f| f.order() != first) {
            return Err(EngineError::OrderMismatch(first, bad.order()));
        }
        Ok(Gifs { maps })
    }

    /// Lifts every map to the largest order present.
    pub fn lifted(maps: Vec<Arc<dyn GifsMap>>) -> Result<Gifs, EngineError> {
        let m = maps
            .iter()
            .map(|f| f.order())
            .max()
            .ok_or(EngineError::NoMaps)?;
        Gifs::new(
            maps.into_iter()
                .map(|f| lift_order(f, m))
                .collect::<Result<_, _>>()?,
        )
    }

    pub fn order(&self) -> usize {
        self.maps[0].order()
    }

    /// Largest claimed Lipschitz constant (`None` if some map claims none).
    pub fn claimed_lip(&self) -> Option<f64> {
        self.maps
            .iter()
            .map(|f| f.claimed_lip())
            .try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l)))
    }
}

fn tuple_count(n: usize, m: usize) -> u128 {
    (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX)
}

/// Calls `visit` on every `m`-tuple of indices below `n`, in lexicographic order.
pub fn for_each_tuple(n: usize, m: usize, mut visit: impl FnMut(&[usize])) {
    if n == 0 {
        return;
    }
    let mut idx = vec![0usize; m];
    loop {
        visit(&idx);
        let mut pos = m;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Binary tree of balls over a point set, split at the largest gap between
/// consecutive points in label order.
pub struct BallTree {
    pub nodes: Vec<BallNode>,
    pub order: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct BallNode {
    pub lo: usize,
    pub hi: usize,
    pub center: usize,
    pub radius: f64,
    pub kids: Option<(u32, u32)>,
}

impl BallTree {
    pub fn build(pts: &[Pt], geom: &Geometry) -> BallTree {
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| pts[a].cmp(&pts[b]));
        let gaps: Vec<f64> = order
            .windows(2)
            .map(|w| geom.dist(&pts[w[0]], &pts[w[1]]))
            .collect();
        let mut tree = BallTree {
            nodes: Vec::new(),
            order,
        };
        if !pts.is_empty() {
            tree.split(0, pts.len(), &gaps, pts, geom);
        }
        tree
    }

    fn split(&mut self, lo: usize, hi: usize, gaps: &[f64], pts: &[Pt], geom: &Geometry) -> u32 {
        let center = self.order[(lo + hi - 1) / 2];
        let radius = self.order[lo..hi]
            .iter()
            .map(|&i| geom.dist(&pts[center], &pts[i]))
            .fold(0.0, f64::max);
        let id = self.nodes.len() as u32;
        self.nodes.push(BallNode {
            lo,
            hi,
            center,
            radius,
            kids: None,
        });
        if hi - lo > 1 {
            // gaps[s - 1] separates order[s - 1] and order[s]; prefer balanced cuts on ties.
            let mid = (lo + hi) as f64 / 2.0;
            let cut = (lo + 1..hi)
                .max_by(|&a, &b| {
                    gaps[a - 1]
                        .total_cmp(&gaps[b - 1])
                        .then_with(|| (b as f64 - mid).abs().total_cmp(&(a as f64 - mid).abs()))
                })
                .unwrap();
            let a = self.split(lo, cut, gaps, pts, geom);
            let b = self.split(cut, hi, gaps, pts, geom);
            self.nodes[id as usize].kids = Some((a, b));
        }
        id
    }

    /// Exact nearest neighbour: (index, distance).
    pub fn nearest(&self, q: &Pt, pts: &[Pt], geom: &Geometry) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut stack = vec![(0u32, 0.0f64)];
        while let Some((id, lb)) = stack.pop() {
            if lb >= best.1 {
                continue;
            }
            let node = &self.nodes[id as usize];
            let dc = geom.dist(q, &pts[node.center]);
            if dc < best.1 {
                best = (node.center, dc);
            }
            if let Some((a, b)) = node.kids {
                let la = self.lower_bound(a, q, pts, geom);
                let lb2 = self.lower_bound(b, q, pts, geom);
                // Visit the closer child first.
                if la.1 <= lb2.1 {
                    stack.push((b, lb2.1));
                    stack.push((a, la.1));
                } else {
                    stack.push((a, la.1));
                    stack.push((b, lb2.1));
                }
            }
        }
        best
    }

    fn lower_bound(&self, id: u32, q: &Pt, pts: &[Pt], geom: &Geometry) -> (u32, f64) {
        let node = &self.nodes[id as usize];
        (id, (geom.dist(q, &pts[node.center]) - node.radius).max(0.0))
    }
}

fn nearest_brute(q: &Pt, pts: &[Pt], geom: &Geometry) -> (usize, f64) {
    pts.iter()
        .enumerate()
        .map(|(i, p)| (i, geom.dist(q, p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((usize::MAX, f64::INFINITY))
}

fn plain_1d(pts: &[Pt], geom: &Geometry) -> Option<Vec<f64>> {
    let plain = geom.frames.len() == 1
        && matches!(geom.frames[0], crate::realization::Frame::Plain { dim: 1 });
    if !plain {
        return None;
    }
    let mut xs: Vec<f64> = pts.iter().map(|p| p.w[0]).collect();
    xs.sort_by(f64::total_cmp);
    Some(xs)
}

fn directed_1d(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .map(|&x| {
            let i = b.partition_point(|&y| y < x);
            let right = b.get(i).map(|&y| y - x).unwrap_or(f64::INFINITY);
            let left = if i > 0 { x - b[i - 1] } else { f64::INFINITY };
            right.min(left)
        })
        .fold(0.0, f64::max)
}

fn directed(a: &[Pt], b: &[Pt], geom: &Geometry) -> f64 {
    if (a.len() as u128) * (b.len() as u128) <= 2_000_000 {
        let mut worst = 0.0f64;
        for p in a {
            let mut best = f64::INFINITY;
            for q in b {
                best = best.min(geom.dist(p, q));
                if best <= worst {
                    break;
                }
            }
            worst = worst.max(best);
        }
        return worst;
    }
    let tree = BallTree::build(b, geom);
    a.iter()
        .map(|p| tree.nearest(p, b, geom).1)
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two finite nonempty sets.
pub fn hausdorff(a: &[Pt], b: &[Pt], geom: &Geometry) -> Result<f64, EngineError> {
    if a.is_empty() || b.is_empty() {
        return Err(EngineError::EmptySet);
    }
    if let (Some(xa), Some(xb)) = (plain_1d(a, geom), plain_1d(b, geom)) {
        return Ok(directed_1d(&xa, &xb).max(directed_1d(&xb, &xa)));
    }
    Ok(directed(a, b, geom).max(directed(b, a, geom)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipRegime {
    /// All pairs of distinct tuples.
    Exhaustive,
    /// Exact maximum by branch and bound over a ball tree of tuples.
    BranchAndBound,
    /// Seeded random pairs; a lower estimate.
    Sampled,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipReport {
    pub name: String,
    pub value: f64,
    pub regime: LipRegime,
    pub claimed: Option<f64>,
    pub tuples: u128,
    pub pairs_evaluated: u64,
    pub seed: Option<u64>,
}

impl LipReport {
    /// Whether the measured value respects the claim (relative slack 1e-9).
    pub fn within_claim(&self) -> bool {
        self.claimed
            .is_none_or(|c| self.value <= c * (1.0 + 1e-9) + 1e-300)
    }
}

struct DistCache<'a> {
    pts: &'a [Pt],
    geom: &'a Geometry,
    table: Option<Vec<f64>>,
}

impl<'a> DistCache<'a> {
    fn new(pts: &'a [Pt], geom: &'a Geometry) -> Self {
        let n = pts.len();
        let table = (n <= 2500).then(|| {
            let mut t = vec![0.0; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    let d = geom.dist(&pts[i], &pts[j]);
                    t[i * n + j] = d;
                    t[j * n + i] = d;
                }
            }
            t
        });
        DistCache { pts, geom, table }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        match &self.table {
            Some(t) => t[i * self.pts.len() + j],
            None => self.geom.dist(&self.pts[i], &self.pts[j]),
        }
    }
}

struct ImageTable {
    ids: Vec<u32>,
    images: Vec<Pt>,
}

fn tabulate(f: &dyn GifsMap, sample: &[Pt]) -> ImageTable {
    let m = f.order();
    let mut ids = Vec::with_capacity(tuple_count(sample.len(), m) as usize);
    let mut images = Vec::new();
    let mut seen: HashMap<Pt, u32> = HashMap::new();
    for_each_tuple(sample.len(), m, |t| {
        let args: Vec<&Pt> = t.iter().map(|&i| &sample[i]).collect();
        let img = f.eval(&args);
        let id = *seen.entry(img.clone()).or_insert_with(|| {
            images.push(img);
            (images.len() - 1) as u32
        });
        ids.push(id);
    });
    ImageTable { ids, images }
}

fn tuple_index(t: &[usize], n: usize) -> usize {
    t.iter().fold(0, |acc, &i| acc * n + i)
}

fn ratio_of(
    s: &[usize],
    t: &[usize],
    dist: &DistCache,
    img_s: &Pt,
    img_t: &Pt,
    geom: &Geometry,
) -> Option<f64> {
    let dm = s
        .iter()
        .zip(t)
        .map(|(&a, &b)| dist.get(a, b))
        .fold(0.0, f64::max);
    (dm > 0.0).then(|| geom.dist(img_s, img_t) / dm)
}

/// Worker threads for pairwise loops: `GIFS_LAB_THREADS` when set to a
/// positive integer, otherwise the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("GIFS_LAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Largest `d(f(x), f(y)) / d_max(x, y)` over distinct tuples of `sample`.
///
/// Exhaustive when the number of tuple pairs is small, exact branch and bound
/// when the image table fits, seeded sampling otherwise.
pub fn lipschitz_estimate(
    f: &dyn GifsMap,
    sample: &[Pt],
    geom: &Geometry,
    seed: u64,
) -> Result<LipReport, EngineError> {
    if sample.is_empty() {
        return Err(EngineError::EmptySet);
    }
    let n = sample.len();
    let m = f.order();
    let tuples = tuple_count(n, m);
    let dist = DistCache::new(sample, geom);
    let mut report = LipReport {
        name: f.name().to_string(),
        value: 0.0,
        regime: LipRegime::Exhaustive,
        claimed: f.claimed_lip(),
        tuples,
        pairs_evaluated: 0,
        seed: None,
    };
    if tuples.saturating_mul(tuples) <= LIP_EXHAUSTIVE_BUDGET {
        let table = tabulate(f, sample);
        let all: Vec<Vec<usize>> = {
            let mut v = Vec::new();
            for_each_tuple(n, m, |t| v.push(t.to_vec()));
            v
        };
        let rows = |start: usize, step: usize| {
            let (mut best, mut pairs) = (0.0f64, 0u64);
            for s in (start..all.len()).step_by(step) {
                for t in s + 1..all.len() {
                    let (a, b) = (
                        &table.images[table.ids[s] as usize],
                        &table.images[table.ids[t] as usize],
                    );
                    if let Some(r) = ratio_of(&all[s], &all[t], &dist, a, b, geom) {
                        best = best.max(r);
                    }
                    pairs += 1;
                }
            }
            (best, pairs)
        };
        let workers = thread_count().min(all.len().max(1));
        let parts: Vec<(f64, u64)> = if workers <= 1 || tuples * tuples < 1 << 16 {
            vec![rows(0, 1)]
        } else {
            std::thread::scope(|sc| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| sc.spawn(move || rows(w, workers)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker panicked"))
                    .collect()
            })
        };
        for (best, pairs) in parts {
            report.value = report.value.max(best);
            report.pairs_evaluated += pairs;
        }
        return Ok(report);
    }
    if tuples <= LIP_TABLE_BUDGET && m <= 6 {
        let table = tabulate(f, sample);
        let mut bb = BranchAndBound::new(sample, geom, &dist, &table, m);
        let seeded = sampled_max(f, sample, geom, &dist, seed, 20_000);
        bb.best = seeded;
        bb.run();
        report.value = bb.best;
        report.regime = LipRegime::BranchAndBound;
        report.pairs_evaluated = bb.leaf_pairs;
        return Ok(report);
    }
    report.value = sampled_max(f, sample, geom, &dist, seed, LIP_SAMPLE_PAIRS);
    report.regime = LipRegime::Sampled;
    report.pairs_evaluated = LIP_SAMPLE_PAIRS as u64;
    report.seed = Some(seed);
    Ok(report)
}

fn sampled_max(
    f: &dyn GifsMap,
    sample: &[Pt],
    geom: &Geometry,
    dist: &DistCache,
    seed: u64,
    pairs: usize,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sample.len();
    let m = f.order();
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let s: Vec<usize> = (0..m).map(|_| rng.gen_range(0..n)).collect();
        let mut t = s.clone();
        // Perturb a random nonempty subset of coordinates so that close pairs are sampled too.
        for x in t.iter_mut() {
            if rng.gen_bool(0.5) {
                *x = rng.gen_range(0..n);
            }
        }
        let i = rng.gen_range(0..m);
        if t == s {
            t[i] = rng.gen_range(0..n);
        }
        let fs = f.eval(&s.iter().map(|&i| &sample[i]).collect::<Vec<_>>());
        let ft = f.eval(&t.iter().map(|&i| &sample[i]).collect::<Vec<_>>());
        if let Some(r) = ratio_of(&s, &t, dist, &fs, &ft, geom) {
            best = best.max(r);
        }
    }
    best
}

type Key = u128;

struct BranchAndBound<'a> {
    tree: BallTree,
    geom: &'a Geometry,
    dist: &'a DistCache<'a>,
    table: &'a ImageTable,
    n: usize,
    m: usize,
    memo: HashMap<Key, (u32, f64)>,
    best: f64,
    leaf_pairs: u64,
}

impl<'a> BranchAndBound<'a> {
    fn new(
        sample: &'a [Pt],
        geom: &'a Geometry,
        dist: &'a DistCache<'a>,
        table: &'a ImageTable,
        m: usize,
    ) -> Self {
        BranchAndBound {
            tree: BallTree::build(sample, geom),
            geom,
            dist,
            table,
            n: sample.len(),
            m,
            memo: HashMap::new(),
            best: 0.0,
            leaf_pairs: 0,
        }
    }

    fn pack(&self, ids: &[u32]) -> Key {
        ids.iter().fold(0u128, |acc, &i| (acc << 21) | i as u128)
    }

    fn unpack(&self, key: Key) -> Vec<u32> {
        (0..self.m)
            .rev()
            .map(|i| ((key >> (21 * i)) & 0x1f_ffff) as u32)
            .collect()
    }

    fn node(&self, id: u32) -> &BallNode {
        &self.tree.nodes[id as usize]
    }

    fn center_image(&self, ids: &[u32]) -> u32 {
        let t: Vec<usize> = ids.iter().map(|&i| self.node(i).center).collect();
        self.table.ids[tuple_index(&t, self.n)]
    }

    fn img_dist(&self, a: u32, b: u32) -> f64 {
        if a == b {
            0.0
        } else {
            self.geom.dist(
                &self.table.images[a as usize],
                &self.table.images[b as usize],
            )
        }
    }

    /// Coordinate with the largest splittable ball, if any.
    fn split_coord(&self, ids: &[u32]) -> Option<usize> {
        (0..ids.len())
            .filter(|&i| self.node(ids[i]).kids.is_some())
            .max_by(|&a, &b| {
                self.node(ids[a])
                    .radius
                    .total_cmp(&self.node(ids[b]).radius)
                    .then(b.cmp(&a))
            })
    }

    fn children(&self, ids: &[u32], i: usize) -> [Vec<u32>; 2] {
        let (a, b) = self.node(ids[i]).kids.expect("splittable");
        let mut x = ids.to_vec();
        let mut y = ids.to_vec();
        x[i] = a;
        y[i] = b;
        [x, y]
    }

    /// Image ball of a product node: center image and a radius bound.
    fn image_ball(&mut self, ids: &[u32]) -> (u32, f64) {
        let key = self.pack(ids);
        if let Some(v) = self.memo.get(&key) {
            return *v;
        }
        let c = self.center_image(ids);
        let r = match self.split_coord(ids) {
            None => 0.0,
            Some(i) => {
                let mut r = 0.0f64;
                for kid in self.children(ids, i) {
                    let (ck, rk) = self.image_ball(&kid);
                    r = r.max(self.img_dist(c, ck) + rk);
                }
                r
            }
        };
        self.memo.insert(key, (c, r));
        (c, r)
    }

    fn lower(&self, a: u32, b: u32) -> f64 {
        if a == b {
            return 0.0;
        }
        let (na, nb) = (self.node(a), self.node(b));
        let d = self.dist.get(na.center, nb.center);
        if na.kids.is_none() && nb.kids.is_none() {
            d
        } else {
            (d - na.radius - nb.radius).max(0.0)
        }
    }

    fn run(&mut self) {
        let root = vec![0u32; self.m];
        let mut stack: Vec<(Key, Key)> = vec![(self.pack(&root), self.pack(&root))];
        while let Some((pk, qk)) = stack.pop() {
            let p = self.unpack(pk);
            let q = self.unpack(qk);
            if pk == qk {
                if let Some(i) = self.split_coord(&p) {
                    let [a, b] = self.children(&p, i);
                    let (ak, bk) = (self.pack(&a), self.pack(&b));
                    stack.push((ak, ak));
                    stack.push((ak, bk));
                    stack.push((bk, bk));
                }
                continue;
            }
            let lb = p
                .iter()
                .zip(&q)
                .map(|(&a, &b)| self.lower(a, b))
                .fold(0.0, f64::max);
            let (cp, rp) = self.image_ball(&p);
            let (cq, rq) = self.image_ball(&q);
            let dc = self.img_dist(cp, cq);
            let ub = dc + rp + rq;
            if ub <= 0.0 {
                continue;
            }
            let sp = self.split_coord(&p);
            let sq = self.split_coord(&q);
            if sp.is_none() && sq.is_none() {
                self.leaf_pairs += 1;
                if lb > 0.0 {
                    self.best = self.best.max(dc / lb);
                }
                continue;
            }
            if lb > 0.0 && ub <= self.best * lb {
                continue;
            }
            let rad =
                |ids: &[u32], s: Option<usize>| s.map(|i| self.node(ids[i]).radius).unwrap_or(-1.0);
            if rad(&p, sp) >= rad(&q, sq) {
                for kid in self.children(&p, sp.unwrap()) {
                    stack.push((self.pack(&kid), qk));
                }
            } else {
                for kid in self.children(&q, sq.unwrap()) {
                    stack.push((pk, self.pack(&kid)));
                }
            }
        }
    }
}

/// `⋃_f f(A^m)`, deduplicated and sorted.
pub fn hutchinson_step(g: &Gifs, a: &[Pt]) -> Result<Vec<Pt>, EngineError> {
    if a.is_empty() {
        return Err(EngineError::EmptySet);
    }
    let m = g.order();
    let tuples = tuple_count(a.len(), m);
    if tuples > HUTCHINSON_BUDGET {
        return Err(EngineError::BudgetExceeded {
            tuples,
            budget: HUTCHINSON_BUDGET,
        });
    }
    let mut out: HashSet<Pt> = HashSet::new();
    for f in &g.maps {
        for_each_tuple(a.len(), m, |t| {
            let args: Vec<&Pt> = t.iter().map(|&i| &a[i]).collect();
            out.insert(f.eval(&args));
        });
    }
    let mut v: Vec<Pt> = out.into_iter().collect();
    v.sort();
    Ok(v)
}

/// Greedy `δ`-net in the given order.
pub fn delta_net(points: &[Pt], delta: f64, geom: &Geometry) -> Vec<Pt> {
    let mut kept: Vec<Pt> = Vec::new();
    for p in points {
        if kept.iter().all(|q| geom.dist(p, q) > delta) {
            kept.push(p.clone());
        }
    }
    kept
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub hausdorff_step: f64,
    pub set_size: usize,
}

#[derive(Clone, Debug)]
pub struct IterationResult {
    pub set: Vec<Pt>,
    pub history: Vec<HistoryRow>,
    pub converged: bool,
    /// Bound on the Hausdorff distance from the final set to the attractor:
    /// `(tol + δ)/(1 − λ)` when all maps claim a common contraction `λ < 1`.
    pub certificate: f64,
}

/// Iterates the Hutchinson operator from `seed` until consecutive sets are
/// within `tol`, optionally thinning every iterate to a `δ`-net.
pub fn iterate_to_attractor(
    g: &Gifs,
    seed: &[Pt],
    geom: &Geometry,
    tol: f64,
    max_iter: usize,
    delta: f64,
) -> Result<IterationResult, EngineError> {
    let mut a = seed.to_vec();
    if a.is_empty() {
        return Err(EngineError::EmptySet);
    }
    let mut history = Vec::new();
    let mut converged = false;
    let mut last_step = f64::INFINITY;
    for iter in 1..=max_iter {
        let mut next = hutchinson_step(g, &a)?;
        if delta > 0.0 {
            next = delta_net(&next, delta, geom);
        }
        let h = hausdorff(&a, &next, geom)?;
        history.push(HistoryRow {
            iter,
            hausdorff_step: h,
            set_size: next.len(),
        });
        a = next;
        last_step = h;
        if h <= tol {
            converged = true;
            break;
        }
    }
    let certificate = match g.claimed_lip() {
        Some(l) if l < 1.0 => (last_step + delta) / (1.0 - l),
        _ => f64::INFINITY,
    };
    Ok(IterationResult {
        set: a,
        history,
        converged,
        certificate,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttractorCheck {
    pub exact: bool,
    pub host_size: usize,
    pub image_size: usize,
    pub missing: usize,
    pub extra: usize,
}

/// Whether `⋃_f f(H^m) = H` holds exactly on the host cloud.
pub fn check_exact_attractor(g: &Gifs, host: &[Pt]) -> Result<AttractorCheck, EngineError> {
    let image = hutchinson_step(g, host)?;
    let hs: HashSet<&Pt> = host.iter().collect();
    let is: HashSet<&Pt> = image.iter().collect();
    let missing = hs.difference(&is).count();
    let extra = is.difference(&hs).count();
    Ok(AttractorCheck {
        exact: missing == 0 && extra == 0,
        host_size: hs.len(),
        image_size: is.len(),
        missing,
        extra,
    })
}

/// `h(⋃_f f(H^m), H)`.
pub fn attractor_residual(g: &Gifs, host: &[Pt], geom: &Geometry) -> Result<f64, EngineError> {
    let image = hutchinson_step(g, host)?;
    hausdorff(&image, host, geom)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CombineReport {
    /// `max diam(part) / min dist(part_i, part_j)`.
    pub lambda: f64,
    pub max_lip: f64,
}

struct Separated {
    inner: Arc<dyn GifsMap>,
    members: Arc<HashSet<Pt>>,
    anchor: Pt,
    claimed: Option<f64>,
}

impl GifsMap for Separated {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn order(&self) -> usize {
        self.inner.order()
    }
    fn eval(&self, args: &[&Pt]) -> Pt {
        let projected: Vec<&Pt> = args
            .iter()
            .map(|p| {
                if self.members.contains(*p) {
                    *p
                } else {
                    &self.anchor
                }
            })
            .collect();
        self.inner.eval(&projected)
    }
    fn claimed_lip(&self) -> Option<f64> {
        self.claimed
    }
    fn backend(&self) -> Backend {
        self.inner.backend()
    }
}

/// Glues GIFSs living on well separated pieces: each map first projects
/// points outside its piece onto the piece's anchor (its first point).
pub fn combine_separated(
    parts: &[(Vec<Pt>, Gifs)],
    geom: &Geometry,
) -> Result<(Gifs, CombineReport), EngineError> {
    if parts.is_empty() || parts.iter().any(|(p, _)| p.is_empty()) {
        return Err(EngineError::BadParts);
    }
    let mut max_diam = 0.0f64;
    let mut min_gap = f64::INFINITY;
    for (i, (a, _)) in parts.iter().enumerate() {
        for (x, p) in a.iter().enumerate() {
            for q in &a[x + 1..] {
                max_diam = max_diam.max(geom.dist(p, q));
            }
        }
        for (b, _) in &parts[i + 1..] {
            for p in a {
                for q in b {
                    min_gap = min_gap.min(geom.dist(p, q));
                }
            }
        }
    }
    if min_gap <= 0.0 {
        return Err(EngineError::BadParts);
    }
    let lambda = if parts.len() == 1 {
        0.0
    } else {
        max_diam / min_gap
    };
    let max_lip = parts
        .iter()
        .filter_map(|(_, g)| g.claimed_lip())
        .fold(0.0, f64::max);
    if max_lip > 0.0 && lambda * max_lip >= 1.0 {
        return Err(EngineError::SeparationViolated {
            lambda,
            lip: max_lip,
        });
    }
    let m = parts.iter().map(|(_, g)| g.order()).max().unwrap();
    let mut maps: Vec<Arc<dyn GifsMap>> = Vec::new();
    for (pts, g) in parts {
        let members = Arc::new(pts.iter().cloned().collect::<HashSet<Pt>>());
        for f in &g.maps {
            let lifted = lift_order(f.clone(), m)?;
            let claimed = lifted.claimed_lip().map(|l| l * lambda.max(1.0));
            maps.push(Arc::new(Separated {
                inner: lifted,
                members: members.clone(),
                anchor: pts[0].clone(),
                claimed,
            }));
        }
    }
    Ok((Gifs::new(maps)?, CombineReport { lambda, max_lip }))
}

/// Relabelling of addresses between a tree and a shifted copy of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AddrMap {
    Identity,
    /// `β ↦ η⌢β`.
    Prefix {
        eta: Address,
    },
    /// `η⌢β ↦ β`.
    StripPrefix {
        eta: Address,
    },
    /// Global `η⌢(i+k−1)⌢β ↦` local `i⌢β`, `η⌢ω ↦ (ω)`.
    Shift2Local {
        eta: Address,
        k: u32,
    },
    /// Local `i⌢β ↦` global `η⌢(i+k−1)⌢β`, `(ω) ↦ η⌢ω`.
    Shift2Global {
        eta: Address,
        k: u32,
    },
}

impl AddrMap {
    pub fn apply(&self, a: &Address) -> Option<Address> {
        match self {
            AddrMap::Identity => Some(a.clone()),
            AddrMap::Prefix { eta } => eta.concat(a).ok(),
            AddrMap::StripPrefix { eta } => eta
                .is_prefix_of(a)
                .then(|| Address::from_slice(&a.entries()[eta.len()..])),
            AddrMap::Shift2Local { eta, k } => {
                if !eta.is_prefix_of(a) {
                    return None;
                }
                let rest = &a.entries()[eta.len()..];
                match rest.first() {
                    None => Some(Address::root()),
                    Some(Entry::Omega) => Some(Address::omega()),
                    Some(Entry::Int(j)) if *j >= *k => {
                        let mut v = vec![Entry::Int(j - k + 1)];
                        v.extend_from_slice(&rest[1..]);
                        Some(Address::from_slice(&v))
                    }
                    Some(Entry::Int(_)) => None,
                }
            }
            AddrMap::Shift2Global { eta, k } => match a.first() {
                None => Some(eta.clone()),
                Some(Entry::Omega) => Some(eta.child(Entry::Omega)),
                Some(Entry::Int(i)) => {
                    let mut v = eta.entries().to_vec();
                    v.push(Entry::Int(i + k - 1));
                    v.extend_from_slice(&a.entries()[1..]);
                    Some(Address::from_slice(&v))
                }
            },
        }
    }
}

/// `R(η) = T([η]_j)` with `j` the length of the longest prefix of `η` in
/// `target`, where `T` descends through the largest child until a leaf.
pub fn project_address(target: &TreeSpec, eta: &Address) -> Address {
    let mut j = 0;
    while j < eta.len() && target.contains(&eta.entries()[..=j]) {
        j += 1;
    }
    let mut node = eta.prefix(j);
    let mut guard = 0;
    while target.has_child(node.entries()) && guard < 64 {
        match target.largest_child(&node) {
            Some(c) => node = node.child(c),
            None => break,
        }
        guard += 1;
    }
    node
}

/// The projection `x_η ↦ y_(R(η))` onto a subtree, as a symbolic map on the
/// host: `domain` rewrites host addresses into the coordinates of `target`,
/// `embed` sends target addresses back into host addresses.
pub fn projection_map(
    name: impl Into<String>,
    host: Arc<SpaceApprox>,
    target: TreeSpec,
    domain: AddrMap,
    embed: AddrMap,
    claimed: Option<f64>,
) -> Result<SymbolicMap, EngineError> {
    if let Some((tree, window)) = host.truncation() {
        let tree = tree.clone();
        for ba in crate::symbolic::enumerate_boundary(&target, window.depth, window.width)
            .unwrap_or_default()
        {
            if let Some(global) = embed.apply(&ba.addr) {
                for k in 0..=global.len() {
                    if !tree.contains(&global.entries()[..k]) {
                        return Err(EngineError::NotSubtree(global.clone()));
                    }
                }
            }
        }
    }
    let f: LabelFn = Arc::new(move |l: &Label| {
        let a = l.addr().cloned().unwrap_or_else(Address::omega);
        let local = domain.apply(&a).unwrap_or_else(Address::omega);
        let r = project_address(&target, &local);
        Label::Addr(embed.apply(&r).unwrap_or(r))
    });
    Ok(SymbolicMap::unary(name, host, f, claimed))
}

/// `F(x, y) = h_(k+1)(x)` for `y ∈ X_k` and `F(x, y) = x_ω` for `y ∈ X_ω`.
pub fn assemble_f(
    name: impl Into<String>,
    host: Arc<SpaceApprox>,
    branches: HashMap<u32, LabelFn>,
    omega: Label,
    claimed: Option<f64>,
) -> Result<SymbolicMap, EngineError> {
    for p in &host.points {
        if let Some(Entry::Int(k)) = p.label.addr().and_then(Address::first) {
            if !branches.contains_key(&(k + 1)) {
                return Err(EngineError::MissingBranch(k + 1));
            }
        }
    }
    let rule: LabelRule =
        Arc::new(
            move |args: &[&Label]| match args[1].addr().and_then(Address::first) {
                Some(Entry::Int(k)) => branches[&(k + 1)](args[0]),
                _ => omega.clone(),
            },
        );
    Ok(SymbolicMap::new(name, 2, host, rule, claimed))
}

/// How close two points must be to share a component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapRule {
    /// Link points at distance `≤ gap`.
    Absolute { gap: f64 },
    /// Link points at distance `≤ ratio · min(local scale of either point)`,
    /// where the local scale is the diameter of the interval carrying the point.
    Relative { ratio: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentAssignment {
    pub component_of: Vec<usize>,
    /// Index of the smallest point of each component; components are ordered
    /// by their representative.
    pub representatives: Vec<usize>,
}

impl ComponentAssignment {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.component_of.len())
            .filter(|&i| self.component_of[i] == c)
            .collect()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-linkage components of a cloud.
pub fn component_quotient(cloud: &[Pt], geom: &Geometry, rule: GapRule) -> ComponentAssignment {
    let n = cloud.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let scales: Vec<f64> = match rule {
        GapRule::Relative { .. } => cloud.iter().map(|p| geom.local_scale(p)).collect(),
        GapRule::Absolute { .. } => Vec::new(),
    };
    for i in 0..n {
        for j in i + 1..n {
            let threshold = match rule {
                GapRule::Absolute { gap } => gap,
                GapRule::Relative { ratio } => ratio * scales[i].min(scales[j]),
            };
            if geom.dist(&cloud[i], &cloud[j]) <= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut rep: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let e = rep.entry(roots[i]).or_insert(i);
        if cloud[i] < cloud[*e] {
            *e = i;
        }
    }
    let mut reps: Vec<usize> = rep.values().copied().collect();
    reps.sort_by(|&a, &b| cloud[a].cmp(&cloud[b]));
    let id_of_root: HashMap<usize, usize> = reps
        .iter()
        .enumerate()
        .map(|(c, &r)| (roots[r], c))
        .collect();
    ComponentAssignment {
        component_of: roots.iter().map(|r| id_of_root[r]).collect(),
        representatives: reps,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuotientMap {
    pub name: String,
    pub order: usize,
    /// Component tuple ↦ component.
    pub table: Vec<(Vec<usize>, usize)>,
}

/// The GIFS induced on components.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuotientGifs {
    pub components: usize,
    pub maps: Vec<QuotientMap>,
    /// Largest distance from an image point to the cloud point that decided
    /// its component.
    pub max_assignment_distance: f64,
}

impl QuotientGifs {
    pub fn covered(&self) -> BTreeSet<usize> {
        self.maps
            .iter()
            .flat_map(|m| m.table.iter().map(|(_, c)| *c))
            .collect()
    }

    /// Whether the union of the induced images is every component.
    pub fn attractor_exact(&self) -> bool {
        self.covered().len() == self.components
    }
}

/// Induces the component maps of `g`, checking that every cell
/// `C_1 × … × C_m` lands in a single component. Image points are assigned to
/// the component of their nearest cloud point.
pub fn quotient_gifs(
    g: &Gifs,
    cloud: &[Pt],
    assignment: &ComponentAssignment,
    geom: &Geometry,
) -> Result<QuotientGifs, EngineError> {
    let m = g.order();
    let tuples = tuple_count(cloud.len(), m);
    if tuples > HUTCHINSON_BUDGET {
        return Err(EngineError::BudgetExceeded {
            tuples,
            budget: HUTCHINSON_BUDGET,
        });
    }
    let tree = BallTree::build(cloud, geom);
    let mut assigned: HashMap<Pt, usize> = HashMap::new();
    let mut max_assignment_distance = 0.0f64;
    let mut maps = Vec::new();
    for f in &g.maps {
        let mut table: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut conflict: Option<(Vec<usize>, Vec<usize>)> = None;
        for_each_tuple(cloud.len(), m, |t| {
            if conflict.is_some() {
                return;
            }
            let args: Vec<&Pt> = t.iter().map(|&i| &cloud[i]).collect();
            let img = f.eval(&args);
            let comp = match assigned.get(&img) {
                Some(c) => *c,
                None => {
                    let (i, d) = tree.nearest(&img, cloud, geom);
                    max_assignment_distance = max_assignment_distance.max(d);
                    let c = assignment.component_of[i];
                    assigned.insert(img, c);
                    c
                }
            };
            let cell: Vec<usize> = t.iter().map(|&i| assignment.component_of[i]).collect();
            match table.get(&cell) {
                Some(&c) if c != comp => conflict = Some((cell, vec![c, comp])),
                Some(_) => {}
                None => {
                    table.insert(cell, comp);
                }
            }
        });
        if let Some((cell, components)) = conflict {
            return Err(EngineError::NotWellDefined {
                map: f.name().to_string(),
                cell,
                components,
            });
        }
        let mut table: Vec<(Vec<usize>, usize)> = table.into_iter().collect();
        table.sort();
        maps.push(QuotientMap {
            name: f.name().to_string(),
            order: m,
            table,
        });
    }
    Ok(QuotientGifs {
        components: assignment.len(),
        maps,
        max_assignment_distance,
    })
}
