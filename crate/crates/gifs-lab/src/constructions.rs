//! Named GIFS constructions on realized spaces, and their verification.
//!
//! Every construction lives on a weight-capped truncation window
//! (`depth D`, `width N`, total integer weight `≤ N`). All maps built here
//! raise the weight of addresses, so the window contains a preimage of each
//! of its points and the symbolic attractor equation can hold exactly.

use crate::gifs_engine::{
    self, assemble_f, attractor_residual, check_exact_attractor, combine_separated,
    component_quotient, hausdorff, lift_order, lipschitz_estimate, project_address, quotient_gifs,
    AttractorCheck, Backend, CombineReport, EngineError, GapRule, Gifs, GifsMap, LabelFn,
    LabelRule, LipReport, NumericMap, PointRule, SymbolicMap,
};
use crate::realization::{
    node_diam, plain_cloud, realize_bp_space_in, realize_s_space_in, realize_z_space_in,
    verify_space_conditions, Label, Pt, RealizationError, SpaceApprox, SpaceReport, TemplateCloud,
};
pub use crate::scales::nonattractor_bound;
use crate::scales::{rational_to_f64, GoodPair, GoodSequence, ScaleError};
use crate::symbolic::{
    enumerate_truncation, Address, Entry, OrdinalIndex, SymbolicError, TreeSpec, Truncation,
};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use thiserror::Error;

/// Gap rule used to split component-space clouds into their copies: points
/// closer than half the diameter of their interval are linked.
pub const COMPONENT_GAP: GapRule = GapRule::Relative { ratio: 0.5 };

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error(transparent)]
    Realization(#[from] RealizationError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error("n must be at least 1")]
    ZeroN,
    #[error("sandwich condition fails: {0}")]
    SandwichViolated(String),
    #[error("the order m must be at least 2, got {0}")]
    OrderTooSmall(usize),
    #[error("M misses the level X_{0}")]
    MissesLevel(String),
    #[error("cluster Y_{k} needs {need} points but G_{prev} has only {have} tuples", prev = k - 1)]
    Cardinality { k: u32, need: u128, have: u128 },
    #[error("the M bundle does not live on the requested host: {0}")]
    HostMismatch(String),
    #[error("template GIFS: {0}")]
    BadTemplate(String),
    #[error("the point set K is empty")]
    EmptyK,
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("points of K must share one dimension")]
    RaggedK,
}

type Result<T> = std::result::Result<T, ConstructionError>;

/// An affine map `(z_1, …, z_m) ↦ Σ c_j·z_j + shift` on template coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMapSpec {
    pub coeffs: Vec<f64>,
    pub shift: Vec<f64>,
}

/// A serializable GIFS of affine maps acting on a template cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineGifs {
    pub maps: Vec<AffineMapSpec>,
}

impl AffineGifs {
    /// `z ↦ z/4 + i/4` for `i = 0..3`, lifted to order 2: the segment `[0, 1]`.
    pub fn quarters() -> AffineGifs {
        AffineGifs {
            maps: (0..4)
                .map(|i| AffineMapSpec {
                    coeffs: vec![0.25, 0.0],
                    shift: vec![i as f64 / 4.0],
                })
                .collect(),
        }
    }

    pub fn to_gifs(&self) -> Result<Gifs> {
        let mut maps: Vec<Arc<dyn GifsMap>> = Vec::new();
        for (i, spec) in self.maps.iter().enumerate() {
            if spec.coeffs.is_empty() || spec.shift.is_empty() {
                return Err(ConstructionError::BadTemplate(format!("map {i} is empty")));
            }
            let lip = spec.coeffs.iter().map(|c| c.abs()).sum::<f64>();
            let s = spec.clone();
            maps.push(Arc::new(NumericMap::plain(
                format!("f_{}", i + 1),
                spec.coeffs.len(),
                Some(lip),
                move |z| {
                    let mut out = s.shift.clone();
                    for (c, zj) in s.coeffs.iter().zip(z) {
                        for (o, x) in out.iter_mut().zip(zj.iter()) {
                            *o += c * x;
                        }
                    }
                    out
                },
            )));
        }
        Ok(Gifs::new(maps)?)
    }
}

/// Everything needed to rebuild a bundle deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BundleRecipe {
    Scattered {
        alpha: OrdinalIndex,
        n: u32,
        b: GoodSequence,
        depth: u32,
        width: u32,
    },
    Sandwiched {
        tree: TreeSpec,
        b: GoodSequence,
        depth: u32,
        width: u32,
    },
    Mixed {
        m_bundle: Box<BundleRecipe>,
        pair: GoodPair,
        m: usize,
        depth: u32,
        width: u32,
    },
    ComponentSpace {
        template: TemplateCloud,
        template_gifs: AffineGifs,
        b: GoodSequence,
        depth: u32,
        width: u32,
    },
    Densify {
        points: Vec<Vec<f64>>,
        epsilon: f64,
        template: Box<BundleRecipe>,
    },
}

impl BundleRecipe {
    pub fn build(&self) -> Result<Bundle> {
        Ok(match self {
            BundleRecipe::Scattered {
                alpha,
                n,
                b,
                depth,
                width,
            } => Bundle::Scattered(gifs_scattered(*alpha, *n, b, *depth, *width)?),
            BundleRecipe::Sandwiched {
                tree,
                b,
                depth,
                width,
            } => Bundle::Scattered(gifs_sandwiched(tree, b, *depth, *width)?),
            BundleRecipe::Mixed {
                m_bundle,
                pair,
                m,
                depth,
                width,
            } => {
                let base = match m_bundle.build()? {
                    Bundle::Scattered(s) => s,
                    Bundle::Mixed(_) => {
                        return Err(ConstructionError::HostMismatch(
                            "M must be a scattered bundle".into(),
                        ))
                    }
                };
                Bundle::Mixed(gifs_mixed(&base, pair, *m, *depth, *width)?)
            }
            BundleRecipe::ComponentSpace {
                template,
                template_gifs,
                b,
                depth,
                width,
            } => {
                let g = template_gifs.to_gifs()?;
                let mut bundle = gifs_component_space(template, &g, b, *depth, *width)?;
                bundle.recipe = self.clone();
                Bundle::Scattered(bundle)
            }
            BundleRecipe::Densify {
                points,
                epsilon,
                template,
            } => {
                let t = template.build()?;
                let d = densify(points, *epsilon, t.space(), t.gifs())?;
                Bundle::Scattered(ScatteredGifsBundle {
                    recipe: self.clone(),
                    space: Arc::new(d.space),
                    gifs: d.gifs,
                    witnesses: BTreeMap::new(),
                })
            }
        })
    }

    /// Short name of the construction.
    pub fn kind(&self) -> &'static str {
        match self {
            BundleRecipe::Scattered { .. } => "scattered",
            BundleRecipe::Sandwiched { .. } => "sandwiched",
            BundleRecipe::Mixed { .. } => "mixed",
            BundleRecipe::ComponentSpace { .. } => "component-space",
            BundleRecipe::Densify { .. } => "densify",
        }
    }
}

/// A host space with a GIFS whose attractor is the host.
#[derive(Clone)]
pub struct ScatteredGifsBundle {
    pub recipe: BundleRecipe,
    pub space: Arc<SpaceApprox>,
    pub gifs: Gifs,
    /// The construction's named maps, as they appear in the proofs.
    pub witnesses: BTreeMap<String, Arc<dyn GifsMap>>,
}

/// A cluster space `M ∪ Y` with an order-`m` GIFS.
#[derive(Clone)]
pub struct MixedGifsBundle {
    pub recipe: BundleRecipe,
    pub space: Arc<SpaceApprox>,
    pub gifs: Gifs,
    pub witnesses: BTreeMap<String, Arc<dyn GifsMap>>,
    /// `c_n` for `n = 1..N` at order `m − 1`.
    pub bound_profile: Vec<f64>,
    /// Indices of the points of `Y` (clusters and `x_ω`).
    pub y_indices: Vec<usize>,
}

impl std::fmt::Debug for ScatteredGifsBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScatteredGifsBundle")
            .field("kind", &self.recipe.kind())
            .field("points", &self.space.len())
            .field("maps", &self.gifs.maps.len())
            .finish()
    }
}

impl std::fmt::Debug for MixedGifsBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MixedGifsBundle")
            .field("points", &self.space.len())
            .field("maps", &self.gifs.maps.len())
            .field("bound_profile", &self.bound_profile)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum Bundle {
    Scattered(ScatteredGifsBundle),
    Mixed(MixedGifsBundle),
}

impl Bundle {
    pub fn recipe(&self) -> &BundleRecipe {
        match self {
            Bundle::Scattered(b) => &b.recipe,
            Bundle::Mixed(b) => &b.recipe,
        }
    }

    pub fn space(&self) -> &SpaceApprox {
        match self {
            Bundle::Scattered(b) => &b.space,
            Bundle::Mixed(b) => &b.space,
        }
    }

    pub fn gifs(&self) -> &Gifs {
        match self {
            Bundle::Scattered(b) => &b.gifs,
            Bundle::Mixed(b) => &b.gifs,
        }
    }

    pub fn witnesses(&self) -> &BTreeMap<String, Arc<dyn GifsMap>> {
        match self {
            Bundle::Scattered(b) => &b.witnesses,
            Bundle::Mixed(b) => &b.witnesses,
        }
    }
}

fn addr_of(l: &Label) -> Address {
    l.addr().cloned().unwrap_or_else(Address::omega)
}

fn int(k: u32) -> Entry {
    Entry::Int(k)
}

fn first_int(a: &Address) -> Option<u32> {
    a.first().and_then(Entry::as_int)
}

/// The address of the point a truncated path stands for: `max I_ξ` is the
/// point `x_(ξ⌢1⌢1⌢…)`, followed as long as the tree allows.
pub fn ideal_address(tree: &TreeSpec, a: &Address) -> Address {
    let mut node = a.clone();
    while !node.ends_with_omega()
        && tree.has_child(node.entries())
        && tree.contains(node.child(int(1)).entries())
    {
        node = node.child(int(1));
        if node.len() > 256 {
            break;
        }
    }
    node
}

fn window(depth: u32, width: u32) -> Truncation {
    Truncation::weight_capped(depth, width, width)
}

fn with_prefix(k: u32, a: &Address) -> Address {
    a.prepend(int(k))
}

fn strip_first(a: &Address) -> Address {
    a.tail()
}

/// `Shift2Local(∅, k)`: `i ↦ i − k + 1` on the first entry.
fn shift_local(a: &Address, k: u32) -> Address {
    gifs_engine::AddrMap::Shift2Local {
        eta: Address::root(),
        k,
    }
    .apply(a)
    .unwrap_or_else(Address::omega)
}

fn shift_global(a: &Address, k: u32) -> Address {
    gifs_engine::AddrMap::Shift2Global {
        eta: Address::root(),
        k,
    }
    .apply(a)
    .unwrap_or_else(Address::omega)
}

/// `h_k(x) = k⌢R(x)`, with `R` the projection of `Λ^α` onto `Λ^(α_k)`.
fn h_alpha(alpha: OrdinalIndex, k: u32, x: &Address) -> Address {
    let target = TreeSpec::alpha(alpha.ladder(k).expect("α > 0"));
    with_prefix(k, &project_address(&target, x))
}

/// The scattered map `F` in the coordinates of `Λ^α`: `F(x, y) = h_(k+1)(x)`
/// for `y ∈ X_k`, and `x_ω` for `y = x_ω`.
pub fn scattered_f_address(alpha: OrdinalIndex, x: &Address, y: &Address) -> Address {
    match first_int(y) {
        Some(k) => h_alpha(alpha, k + 1, x),
        None => Address::omega(),
    }
}

fn smallest_under(space: &SpaceApprox, k: Entry) -> Option<Address> {
    space
        .points
        .iter()
        .filter_map(|p| p.label.addr())
        .filter(|a| a.first() == Some(k))
        .min()
        .cloned()
}

fn sym(
    name: &str,
    order: usize,
    host: &Arc<SpaceApprox>,
    claimed: Option<f64>,
    rule: impl Fn(&[Address]) -> Address + Send + Sync + 'static,
) -> Arc<dyn GifsMap> {
    let r: LabelRule = Arc::new(move |args: &[&Label]| {
        let addrs: Vec<Address> = args.iter().map(|l| addr_of(l)).collect();
        Label::Addr(rule(&addrs))
    });
    Arc::new(SymbolicMap::new(name, order, host.clone(), r, claimed))
}

fn finish(
    recipe: BundleRecipe,
    space: Arc<SpaceApprox>,
    named: Vec<Arc<dyn GifsMap>>,
) -> Result<ScatteredGifsBundle> {
    let witnesses = named
        .iter()
        .map(|f| (f.name().to_string(), f.clone()))
        .collect();
    let gifs = Gifs::lifted(named)?;
    Ok(ScatteredGifsBundle {
        recipe,
        space,
        gifs,
        witnesses,
    })
}

/// The two-map GIFS of order 2 on the `(Λ^(α,n), b, s)`-space: `F, G` for
/// `n = 1`, `P, Q` for `n ≥ 2`.
pub fn gifs_scattered(
    alpha: OrdinalIndex,
    n: u32,
    b: &GoodSequence,
    depth: u32,
    width: u32,
) -> Result<ScatteredGifsBundle> {
    if n == 0 {
        return Err(ConstructionError::ZeroN);
    }
    let tree = TreeSpec::alpha_n(alpha, n);
    let space = Arc::new(realize_s_space_in(&tree, b, &window(depth, width), 0.0)?);
    let recipe = BundleRecipe::Scattered {
        alpha,
        n,
        b: b.clone(),
        depth,
        width,
    };
    let lam = b.lambda_b();
    if alpha == OrdinalIndex::Fin(0) {
        return scattered_discrete(recipe, space, n);
    }
    let t = tree.clone();
    let ideal = move |a: &Address| ideal_address(&t, a);
    if n == 1 {
        let id = ideal.clone();
        let f = sym("F", 2, &space, Some(lam / 2.0), move |a| {
            scattered_f_address(alpha, &id(&a[0]), &id(&a[1]))
        });
        let g = sym("G", 1, &space, Some(lam / 4.0), move |a| {
            h_alpha(alpha, 1, &ideal(&a[0]))
        });
        return finish(recipe, space, vec![f, g]);
    }
    let alpha1 = alpha.ladder(1)?;
    let in_x1 = |a: &Address| first_int(a) == Some(1);
    let z_p = smallest_under(&space, int(1)).expect("X_1 is realized");
    let id = ideal.clone();
    let p = sym("P", 2, &space, Some(lam), move |a| {
        let (x, y) = (id(&a[0]), id(&a[1]));
        if in_x1(&x) && in_x1(&y) {
            with_prefix(
                1,
                &scattered_f_address(alpha, &strip_first(&x), &strip_first(&y)),
            )
        } else if !in_x1(&x) {
            let r = project_address(&TreeSpec::alpha(alpha1), &shift_local(&x, 2));
            Address::ints(&[1, 1]).concat(&r).expect("finite prefix")
        } else {
            z_p.clone()
        }
    });
    let q = if n == 2 {
        let z_q = smallest_under(&space, int(2)).expect("X_2 is realized");
        sym("Q", 2, &space, Some(lam), move |a| {
            let (x, y) = (ideal(&a[0]), ideal(&a[1]));
            if !in_x1(&x) && !in_x1(&y) {
                shift_global(
                    &scattered_f_address(alpha, &shift_local(&x, 2), &shift_local(&y, 2)),
                    2,
                )
            } else if in_x1(&x) {
                with_prefix(
                    2,
                    &project_address(&TreeSpec::alpha(alpha1), &strip_first(&x)),
                )
            } else {
                z_q.clone()
            }
        })
    } else {
        let z_q = smallest_under(&space, int(n - 1)).expect("X_(n-1) is realized");
        sym("Q", 2, &space, Some(lam), move |a| {
            let (x, y) = (ideal(&a[0]), ideal(&a[1]));
            match (first_int(&x), first_int(&y)) {
                (Some(i), Some(1)) if i <= n - 2 => with_prefix(i + 1, &strip_first(&x)),
                (Some(1), _) => shift_global(&strip_first(&x), n),
                _ => z_q.clone(),
            }
        })
    };
    finish(recipe, space, vec![p, q])
}

/// `Λ^(0,n)` is a set of `n` points: `P ≡ x_(1)` and `Q` steps along
/// `x_(1), …, x_(n−1), x_ω` (no contraction is claimed for a discrete set).
fn scattered_discrete(
    recipe: BundleRecipe,
    space: Arc<SpaceApprox>,
    n: u32,
) -> Result<ScatteredGifsBundle> {
    if n == 1 {
        let f = sym("F", 2, &space, Some(0.0), |_| Address::root());
        let g = sym("G", 1, &space, Some(0.0), |_| Address::root());
        return finish(recipe, space, vec![f, g]);
    }
    let p = sym("P", 2, &space, None, |_| Address::ints(&[1]));
    let q = sym("Q", 2, &space, None, move |a| match first_int(&a[0]) {
        Some(i) if i + 1 < n => Address::ints(&[i + 1]),
        _ => Address::omega(),
    });
    finish(recipe, space, vec![p, q])
}

fn dec(e: Entry) -> Entry {
    match e {
        Entry::Int(j) => Entry::Int(j.saturating_sub(1).max(1)),
        Entry::Omega => Entry::Omega,
    }
}

/// The surgery `s_k` on a sequence without 1s (`k = None` is the limit
/// `k → ∞`): add 2 to the first entry and, when `|η| ≥ k`, subtract 1 from
/// the `k`-th entry (`ω ± c = ω`).
pub fn s_k_address(eta: &Address, k: Option<u32>) -> Address {
    let mut v = eta.entries().to_vec();
    if v.is_empty() {
        return eta.clone();
    }
    if let Entry::Int(j) = v[0] {
        v[0] = Entry::Int(j + 2);
    }
    if let Some(k) = k {
        let k = k as usize;
        if k >= 2 && v.len() >= k {
            v[k - 1] = dec(v[k - 1]);
        }
    }
    Address::from_slice(&v)
}

/// The surgery `s^i_k`: subtract 1 from the `(k−1)`-th entry when
/// `|η| ≥ k − 1`, then prepend `i`.
pub fn s_ik_address(i: u32, eta: &Address, k: Option<u32>) -> Address {
    let mut v = eta.entries().to_vec();
    if let Some(k) = k {
        let k = k as usize;
        if k >= 2 && v.len() >= k - 1 {
            v[k - 2] = dec(v[k - 2]);
        }
    }
    Address::from_slice(&v).prepend(int(i))
}

fn all_nodes(tree: &TreeSpec, w: &Truncation) -> Result<BTreeSet<Address>> {
    let mut out = BTreeSet::new();
    for ba in enumerate_truncation(tree, w)? {
        for k in 0..=ba.addr.len() {
            out.insert(ba.addr.prefix(k));
        }
    }
    Ok(out)
}

/// Checks `Λ_s ⊆ Λ_M ⊆ Λ_r` on the truncation window.
pub fn check_sandwich(m_tree: &TreeSpec, w: &Truncation) -> Result<()> {
    for a in all_nodes(&TreeSpec::LambdaS, w)? {
        if !m_tree.contains(a.entries()) {
            return Err(ConstructionError::SandwichViolated(format!(
                "Λ_s node {a} is missing from Λ_M"
            )));
        }
    }
    for a in all_nodes(m_tree, w)? {
        if !TreeSpec::LambdaR.contains(a.entries()) {
            return Err(ConstructionError::SandwichViolated(format!(
                "Λ_M node {a} lies outside Λ_r"
            )));
        }
    }
    Ok(())
}

/// The four-map GIFS (three maps of order 2, one of order 1) whose attractor
/// is the compact set `M` with `Λ_s ⊆ Λ_M ⊆ Λ_r`.
pub fn gifs_sandwiched(
    m_tree: &TreeSpec,
    b: &GoodSequence,
    depth: u32,
    width: u32,
) -> Result<ScatteredGifsBundle> {
    let w = window(depth, width);
    check_sandwich(m_tree, &w)?;
    let space = Arc::new(realize_s_space_in(m_tree, b, &w, 0.0)?);
    let recipe = BundleRecipe::Sandwiched {
        tree: m_tree.clone(),
        b: b.clone(),
        depth,
        width,
    };
    let lam = b.lambda_b();
    let host = space.clone();
    let r = Arc::new(move |a: &Address| host.snap_addr(&project_address(&TreeSpec::LambdaS, a)));
    let mt = m_tree.clone();
    let r_prime = Arc::new(move |a: &Address| project_address(&mt, a));
    let mut maps = Vec::new();
    for i in 2..=4u32 {
        let (r, rp) = (r.clone(), r_prime.clone());
        maps.push(sym(&format!("G_{i}"), 2, &space, Some(lam), move |a| {
            let (x, y) = (r(&a[0]), r(&a[1]));
            let k = first_int(&y);
            let s = if i == 4 {
                s_k_address(&x, k)
            } else {
                s_ik_address(i, &x, k)
            };
            rp(&s)
        }));
    }
    maps.push(sym("F", 1, &space, Some(lam), move |a| {
        r_prime(&with_prefix(1, &r(&a[0])))
    }));
    finish(recipe, space, maps)
}

/// Applies `proj` to every argument before `inner`.
struct Precomposed {
    name: String,
    inner: Arc<dyn GifsMap>,
    proj: Arc<dyn Fn(&Pt) -> Pt + Send + Sync>,
    claimed: Option<f64>,
}

impl GifsMap for Precomposed {
    fn name(&self) -> &str {
        &self.name
    }
    fn order(&self) -> usize {
        self.inner.order()
    }
    fn eval(&self, args: &[&Pt]) -> Pt {
        let p: Vec<Pt> = args.iter().map(|x| (self.proj)(x)).collect();
        let refs: Vec<&Pt> = p.iter().collect();
        self.inner.eval(&refs)
    }
    fn claimed_lip(&self) -> Option<f64> {
        self.claimed
    }
    fn backend(&self) -> Backend {
        self.inner.backend()
    }
}

/// Position of a cluster point in the order `Y_1 < Y_2 < …`, points by index.
fn cluster_rank(k: u32, i: u32, sums: &[u128]) -> u128 {
    sums[k as usize - 1] + u128::from(i - 1)
}

/// Lexicographic rank of `t` among the tuples of `G_K` (tuples over
/// `Y_1 ∪ … ∪ Y_K` whose largest cluster index is `K`). `t` holds positions
/// in the order of [`cluster_rank`]; `lo = |Y_1 ∪ … ∪ Y_(K−1)|`, `hi = lo + p_K`.
pub fn lex_rank_in_level(t: &[u128], lo: u128, hi: u128) -> u128 {
    let m = t.len();
    let mut rank = 0u128;
    let mut has_top = false;
    for (j, &x) in t.iter().enumerate() {
        let rem = (m - j - 1) as u32;
        let all = hi.pow(rem);
        let without_top = all - lo.pow(rem);
        let below_top = x.saturating_sub(lo);
        let below_low = x.min(lo);
        rank += below_top * all + below_low * if has_top { all } else { without_top };
        has_top |= x >= lo;
    }
    rank
}

/// The order-`m` GIFS on `M ∪ Y`: the GIFS of `M` precomposed with `π_1`,
/// the cluster map `F` precomposed with `π_2`, and `p_1` constants onto `Y_1`.
pub fn gifs_mixed(
    m_bundle: &ScatteredGifsBundle,
    pair: &GoodPair,
    m: usize,
    depth: u32,
    width: u32,
) -> Result<MixedGifsBundle> {
    if m < 2 {
        return Err(ConstructionError::OrderTooSmall(m));
    }
    let w = window(depth, width);
    let (tree, mw) = m_bundle
        .space
        .truncation()
        .ok_or_else(|| ConstructionError::HostMismatch("no tree".into()))?;
    let tree = tree.clone();
    if mw != w {
        return Err(ConstructionError::HostMismatch(format!(
            "window {mw:?} differs from {w:?}"
        )));
    }
    if m_bundle.space.b() != Some(&pair.b) {
        return Err(ConstructionError::HostMismatch(
            "scale sequences differ".into(),
        ));
    }
    if m_bundle.gifs.order() > m {
        return Err(EngineError::CannotLower(m_bundle.gifs.order(), m).into());
    }
    let space = Arc::new(realize_bp_space_in(&tree, pair, &w, 0.0)?);
    let kmax = width.min(pair.k_max as u32);
    let m_addrs: Vec<Address> = m_bundle
        .space
        .points
        .iter()
        .map(|p| addr_of(&p.label))
        .collect();
    for k in (2..=kmax).map(int).chain(std::iter::once(Entry::Omega)) {
        if !m_addrs.iter().any(|a| a.first() == Some(k)) {
            return Err(ConstructionError::MissesLevel(k.to_string()));
        }
    }
    let p: Vec<u128> = pair
        .p
        .terms(kmax as usize)
        .iter()
        .map(|t| t.to_u128().unwrap_or(u128::MAX))
        .collect();
    let mut sums = vec![0u128];
    for pk in &p {
        sums.push(sums.last().unwrap().saturating_add(*pk));
    }
    for k in 2..=kmax {
        let (lo, hi) = (sums[k as usize - 2], sums[k as usize - 1]);
        let have = hi
            .checked_pow(m as u32)
            .and_then(|a| lo.checked_pow(m as u32).map(|b| a - b))
            .unwrap_or(u128::MAX);
        if have < p[k as usize - 1] {
            return Err(ConstructionError::Cardinality {
                k,
                need: p[k as usize - 1],
                have,
            });
        }
    }
    let lam = pair.b.lambda_b();
    let m_lip = m_bundle.gifs.claimed_lip().unwrap_or(lam);
    let x_omega = Label::Addr(Address::omega());

    // π_1: clusters go to a fixed point of the matching level of M.
    let z_of = |k: u32| -> Address {
        (k..=kmax)
            .find_map(|j| smallest_under(&m_bundle.space, int(j)))
            .unwrap_or_else(Address::omega)
    };
    let mut pi1_table: HashMap<Pt, Pt> = HashMap::new();
    for hp in &space.points {
        if let Label::Cluster { k, .. } = hp.label {
            let target = space
                .pt_of(&Label::Addr(z_of(k)))
                .expect("z_k is a host point")
                .clone();
            pi1_table.insert(hp.pt.clone(), target);
        }
    }
    let pi1_table = Arc::new(pi1_table);
    let pi1: Arc<dyn Fn(&Pt) -> Pt + Send + Sync> =
        Arc::new(move |x: &Pt| pi1_table.get(x).cloned().unwrap_or_else(|| x.clone()));

    let mut maps: Vec<Arc<dyn GifsMap>> = Vec::new();
    let mut witnesses: BTreeMap<String, Arc<dyn GifsMap>> = BTreeMap::new();
    for f in &m_bundle.gifs.maps {
        let lifted = lift_order(f.clone(), m)?;
        let claimed = f.claimed_lip().map(|l| 2.0 * l);
        maps.push(Arc::new(Precomposed {
            name: format!("{}∘π_1", f.name()),
            inner: lifted,
            proj: pi1.clone(),
            claimed,
        }));
    }

    // π_2 on labels, then the cluster map F.
    let pi2 = move |l: &Label| -> Label {
        match l {
            Label::Cluster { .. } => l.clone(),
            other => match first_int(&addr_of(other)) {
                Some(k) if k <= kmax => Label::Cluster { k, i: 1 },
                _ => Label::Addr(Address::omega()),
            },
        }
    };
    let f_rule = {
        let sums = sums.clone();
        let p = p.clone();
        let x_omega = x_omega.clone();
        Arc::new(move |args: &[&Label]| -> Label {
            let ys: Vec<Label> = args.iter().map(|l| pi2(l)).collect();
            let mut top = 0u32;
            let mut pos = Vec::with_capacity(ys.len());
            for y in &ys {
                match y {
                    Label::Cluster { k, i } => {
                        top = top.max(*k);
                        pos.push(cluster_rank(*k, *i, &sums));
                    }
                    _ => return x_omega.clone(),
                }
            }
            let next = top + 1;
            if next > kmax {
                return x_omega.clone();
            }
            let rank = lex_rank_in_level(&pos, sums[top as usize - 1], sums[top as usize]);
            let i = rank % p[next as usize - 1];
            Label::Cluster {
                k: next,
                i: i as u32 + 1,
            }
        })
    };
    let f_y: Arc<dyn GifsMap> = Arc::new(SymbolicMap::new(
        "F",
        m,
        space.clone(),
        f_rule.clone(),
        Some(lam),
    ));
    witnesses.insert("F".into(), f_y);
    maps.push(Arc::new(SymbolicMap::new(
        "F∘π_2",
        m,
        space.clone(),
        f_rule,
        Some(2.0 * lam),
    )));
    for i in 1..=p[0] as u32 {
        let c = Label::Cluster { k: 1, i };
        let rule: LabelRule = Arc::new(move |_: &[&Label]| c.clone());
        maps.push(Arc::new(SymbolicMap::new(
            format!("G_{i}"),
            m,
            space.clone(),
            rule,
            Some(0.0),
        )));
    }
    for f in &maps {
        witnesses
            .entry(f.name().to_string())
            .or_insert_with(|| f.clone());
    }
    let gifs = Gifs::new(maps)?;
    let _ = m_lip;
    let bound_profile = nonattractor_bound(&pair.p, (m - 1) as u32, (width as usize).max(2))
        .iter()
        .map(rational_to_f64)
        .collect();
    let y_indices = space
        .points
        .iter()
        .enumerate()
        .filter(|(_, hp)| matches!(hp.label, Label::Cluster { .. }) || hp.label == x_omega)
        .map(|(i, _)| i)
        .collect();
    let recipe = BundleRecipe::Mixed {
        m_bundle: Box::new(m_bundle.recipe.clone()),
        pair: pair.clone(),
        m,
        depth,
        width,
    };
    Ok(MixedGifsBundle {
        recipe,
        space,
        gifs,
        witnesses,
        bound_profile,
        y_indices,
    })
}

/// `R_k` on addresses of `Λ^ω`: moves the leaf `ξ` into `k⌢Λ^(k−1)`.
pub fn r_k_address(k: u32, xi: &Address) -> Address {
    let e = xi.entries();
    match e.first() {
        None | Some(Entry::Omega) => Address::from_slice(&[int(k), Entry::Omega]),
        Some(Entry::Int(i)) if *i < k => xi.prepend(int(k)),
        Some(Entry::Int(i)) => {
            if e.get(1) == Some(&int(k - 1)) {
                let mut v = vec![int(k), int(*i)];
                v.extend_from_slice(&e[2..]);
                Address::from_slice(&v)
            } else {
                Address::from_slice(&[int(k), int(*i), Entry::Omega])
            }
        }
    }
}

/// Whether `g_k` is a similarity on the piece `X_ξ` (cases 1, 2 and 4 of `R_k`).
pub fn r_k_is_similarity(k: u32, xi: &Address) -> bool {
    match xi.first() {
        None | Some(Entry::Omega) => true,
        Some(Entry::Int(i)) => i < k || xi.entries().get(1) == Some(&int(k - 1)),
    }
}

/// The order-2 GIFS on the `(Λ^ω, b, Z)`-space: copies of the template GIFS
/// on `X_1` and `X_ω` (precomposed with `π_1`, `π_ω`) and `F` assembled from
/// the maps `g_k : X → X_k`.
pub fn gifs_component_space(
    template: &TemplateCloud,
    z_gifs: &Gifs,
    b: &GoodSequence,
    depth: u32,
    width: u32,
) -> Result<ScatteredGifsBundle> {
    if z_gifs.order() > 2 {
        return Err(ConstructionError::BadTemplate(format!(
            "order {} exceeds 2",
            z_gifs.order()
        )));
    }
    let tree = TreeSpec::alpha(OrdinalIndex::Omega);
    let space = Arc::new(realize_z_space_in(
        &tree,
        b,
        template,
        &window(depth, width),
        0.0,
    )?);
    let lam = b.lambda_b();
    let anchor = template.anchor_max as u32;

    let mut branches: HashMap<u32, LabelFn> = HashMap::new();
    for k in 2..=width + 2 {
        let t = tree.clone();
        let g: LabelFn = Arc::new(move |l: &Label| {
            let (xi, j) = match l {
                Label::Copy { addr, j } => (addr.clone(), *j),
                other => (ideal_address(&t, &addr_of(other)), anchor),
            };
            let target = r_k_address(k, &xi);
            if r_k_is_similarity(k, &xi) {
                Label::Copy { addr: target, j }
            } else {
                Label::Addr(target)
            }
        });
        branches.insert(k, g);
    }
    let omega = Label::Copy {
        addr: Address::omega(),
        j: anchor,
    };
    let f = assemble_f("F", space.clone(), branches, omega, Some(lam / 2.0))?;

    let mut maps: Vec<Arc<dyn GifsMap>> = Vec::new();
    let mut named: Vec<Arc<dyn GifsMap>> = vec![Arc::new(f)];
    for (leaf, tag) in [(Address::ints(&[1]), "1"), (Address::omega(), "ω")] {
        let diam = node_diam(b, &leaf);
        for zf in &z_gifs.maps {
            let zf = lift_order(zf.clone(), 2)?;
            let t = template.clone();
            let lf = leaf.clone();
            let inner = zf.clone();
            let rule: PointRule = Arc::new(move |args: &[&Pt]| {
                let zs: Vec<Pt> = args
                    .iter()
                    .map(|p| {
                        let z = if p.node == lf {
                            t.unoffset(&p.w, diam)
                        } else {
                            t.points[t.anchor_max].clone()
                        };
                        Pt::plain(z)
                    })
                    .collect();
                let refs: Vec<&Pt> = zs.iter().collect();
                let out = inner.eval(&refs);
                Pt::tree(0, lf.clone(), t.offset(&out.w, diam))
            });
            let claimed = zf.claimed_lip().map(|l| 3.0 * l);
            named.push(Arc::new(NumericMap::new(
                format!("{}^{tag}", zf.name()),
                2,
                rule,
                claimed,
            )));
        }
    }
    maps.extend(named.iter().cloned());
    let recipe = BundleRecipe::ComponentSpace {
        template: template.clone(),
        template_gifs: AffineGifs { maps: Vec::new() },
        b: b.clone(),
        depth,
        width,
    };
    finish(recipe, space, maps)
}

/// A finite set of points approximated by separated small copies of a
/// template attractor.
pub struct Densified {
    pub space: SpaceApprox,
    pub gifs: Gifs,
    pub copy_diam: f64,
    pub combine: CombineReport,
    /// `h(K, result)`.
    pub hausdorff_to_k: f64,
}

/// Maps of a template conjugated by `z ↦ x + s·(z − z_0)`.
struct Placed {
    name: String,
    inner: Arc<dyn GifsMap>,
    template: Arc<SpaceApprox>,
    back: Arc<HashMap<Pt, Pt>>,
    base: Vec<f64>,
    at: Vec<f64>,
    scale: f64,
}

impl Placed {
    fn forward(&self, p: &Pt) -> Pt {
        let c = self.template.geometry.coords(p);
        let mut w = self.at.clone();
        for (i, x) in c.iter().enumerate() {
            w[i] += self.scale * (x - self.base[i]);
        }
        Pt::plain(w)
    }
}

impl GifsMap for Placed {
    fn name(&self) -> &str {
        &self.name
    }
    fn order(&self) -> usize {
        self.inner.order()
    }
    fn eval(&self, args: &[&Pt]) -> Pt {
        let tpts: Vec<Pt> = args
            .iter()
            .map(|p| {
                self.back.get(*p).cloned().unwrap_or_else(|| {
                    let pts = self.template.pts();
                    let fw: Vec<Pt> = pts.iter().map(|q| self.forward(q)).collect();
                    let g = crate::realization::Geometry::plain(self.at.len());
                    let i = (0..fw.len())
                        .min_by(|&a, &b| g.dist(&fw[a], p).total_cmp(&g.dist(&fw[b], p)))
                        .unwrap_or(0);
                    pts[i].clone()
                })
            })
            .collect();
        let refs: Vec<&Pt> = tpts.iter().collect();
        self.forward(&self.inner.eval(&refs))
    }
    fn claimed_lip(&self) -> Option<f64> {
        self.inner.claimed_lip()
    }
    fn backend(&self) -> Backend {
        Backend::Numeric
    }
}

/// Replaces every point of `K` by a copy of the template attractor of
/// diameter `0.9·min(ε/2, d_min/3)`, and glues the copies' GIFSs.
pub fn densify(
    k: &[Vec<f64>],
    epsilon: f64,
    template: &SpaceApprox,
    template_gifs: &Gifs,
) -> Result<Densified> {
    if !(epsilon > 0.0) {
        return Err(ConstructionError::BadEpsilon(epsilon));
    }
    let mut pts: Vec<Vec<f64>> = k.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    let first = pts.first().ok_or(ConstructionError::EmptyK)?;
    let dim = first.len();
    if dim == 0 || pts.iter().any(|p| p.len() != dim) {
        return Err(ConstructionError::RaggedK);
    }
    let plain = crate::realization::Geometry::plain(dim);
    let mut d_min = f64::INFINITY;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d_min = d_min.min(plain.dist(&Pt::plain(a.clone()), &Pt::plain(b.clone())));
        }
    }
    let copy_diam = 0.9 * (epsilon / 2.0).min(d_min / 3.0);
    let tpts = template.pts();
    let coords: Vec<Vec<f64>> = tpts.iter().map(|p| template.geometry.coords(p)).collect();
    if coords[0].len() > dim {
        return Err(ConstructionError::BadTemplate(format!(
            "template dimension {} exceeds {dim}",
            coords[0].len()
        )));
    }
    let mut t_diam = 0.0f64;
    for (i, p) in tpts.iter().enumerate() {
        for q in &tpts[i + 1..] {
            t_diam = t_diam.max(template.dist(p, q));
        }
    }
    let scale = if t_diam > 0.0 {
        copy_diam / t_diam
    } else {
        0.0
    };
    let base = coords[0].clone();
    let tspace = Arc::new(template.clone());
    let mut parts = Vec::new();
    for x in &pts {
        let mut back = HashMap::new();
        let mut copy = Vec::new();
        let proto = Placed {
            name: String::new(),
            inner: template_gifs.maps[0].clone(),
            template: tspace.clone(),
            back: Arc::new(HashMap::new()),
            base: base.clone(),
            at: x.clone(),
            scale,
        };
        for p in &tpts {
            let q = proto.forward(p);
            back.insert(q.clone(), p.clone());
            copy.push(q);
        }
        copy.sort();
        copy.dedup();
        let back = Arc::new(back);
        let maps: Vec<Arc<dyn GifsMap>> = template_gifs
            .maps
            .iter()
            .map(|f| {
                Arc::new(Placed {
                    name: f.name().to_string(),
                    inner: f.clone(),
                    template: tspace.clone(),
                    back: back.clone(),
                    base: base.clone(),
                    at: x.clone(),
                    scale,
                }) as Arc<dyn GifsMap>
            })
            .collect();
        parts.push((copy, Gifs::new(maps)?));
    }
    let (gifs, combine) = combine_separated(&parts, &plain)?;
    let cloud: Vec<Vec<f64>> = parts
        .iter()
        .flat_map(|(c, _)| c.iter().map(|p| p.w.clone()))
        .collect();
    let space = plain_cloud(cloud);
    let kpts: Vec<Pt> = pts.iter().map(|x| Pt::plain(x.clone())).collect();
    let hausdorff_to_k = hausdorff(&kpts, &space.pts(), &plain)?;
    Ok(Densified {
        space,
        gifs,
        copy_diam,
        combine,
        hausdorff_to_k,
    })
}

/// The quotient check of a component space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuotientReport {
    pub components: usize,
    pub attractor_exact: bool,
    /// Whether the components correspond one-to-one to the boundary of the
    /// matching `(Λ, b, s)`-space.
    pub matches_s_space: bool,
    pub max_assignment_distance: f64,
}

/// Collapses the copies of a component space and checks the induced GIFS.
pub fn quotient_check(bundle: &ScatteredGifsBundle) -> Result<QuotientReport> {
    let space = &bundle.space;
    let pts = space.pts();
    let assignment = component_quotient(&pts, &space.geometry, COMPONENT_GAP);
    let q = quotient_gifs(&bundle.gifs, &pts, &assignment, &space.geometry)?;
    let reps: BTreeSet<Address> = assignment
        .representatives
        .iter()
        .map(|&i| addr_of(&space.points[i].label))
        .collect();
    let matches_s_space = match (space.truncation(), space.b()) {
        (Some((tree, w)), Some(b)) => {
            let s = realize_s_space_in(tree, b, &w, 0.0)?;
            let addrs: BTreeSet<Address> = s.points.iter().map(|p| addr_of(&p.label)).collect();
            addrs == reps && reps.len() == assignment.len()
        }
        _ => false,
    };
    Ok(QuotientReport {
        components: q.components,
        attractor_exact: q.attractor_exact(),
        matches_s_space,
        max_assignment_distance: q.max_assignment_distance,
    })
}

/// How the attractor equation was checked.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttractorStatus {
    /// Set equality on the host cloud.
    Exact { check: AttractorCheck },
    /// Hausdorff distance between the Hutchinson image and the host, against
    /// twice the host's error bound.
    Numeric {
        residual: f64,
        allowed: f64,
        quotient: QuotientReport,
    },
}

impl AttractorStatus {
    pub fn pass(&self) -> bool {
        match self {
            AttractorStatus::Exact { check } => check.exact,
            AttractorStatus::Numeric {
                residual,
                allowed,
                quotient,
            } => residual <= allowed && quotient.attractor_exact && quotient.matches_s_space,
        }
    }
}

/// Verification record of a bundle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleReport {
    pub kind: String,
    pub points: usize,
    pub error_bound: f64,
    pub space: SpaceReport,
    pub attractor: AttractorStatus,
    pub lipschitz: Vec<LipReport>,
    pub pass: bool,
}

/// Checks the attractor equation and, when `with_lip`, measures every map's
/// Lipschitz constant against its claim.
pub fn verify_bundle(bundle: &Bundle, with_lip: bool, seed: u64) -> Result<BundleReport> {
    let space = bundle.space();
    let pts = space.pts();
    let report = verify_space_conditions(space);
    let attractor = match (bundle.recipe(), bundle) {
        (BundleRecipe::ComponentSpace { .. }, Bundle::Scattered(s)) => AttractorStatus::Numeric {
            residual: attractor_residual(bundle.gifs(), &pts, &space.geometry)?,
            allowed: 2.0 * space.error_bound,
            quotient: quotient_check(s)?,
        },
        _ => AttractorStatus::Exact {
            check: check_exact_attractor(bundle.gifs(), &pts)?,
        },
    };
    let mut lipschitz = Vec::new();
    if with_lip {
        for f in &bundle.gifs().maps {
            lipschitz.push(lipschitz_estimate(f.as_ref(), &pts, &space.geometry, seed)?);
        }
        if let Bundle::Mixed(mb) = bundle {
            if let Some(f) = mb.witnesses.get("F") {
                let ys: Vec<Pt> = mb
                    .y_indices
                    .iter()
                    .map(|&i| space.points[i].pt.clone())
                    .collect();
                lipschitz.push(lipschitz_estimate(f.as_ref(), &ys, &space.geometry, seed)?);
            }
        }
    }
    let pass = report.pass() && attractor.pass() && lipschitz.iter().all(LipReport::within_claim);
    Ok(BundleReport {
        kind: bundle.recipe().kind().to_string(),
        points: space.len(),
        error_bound: space.error_bound,
        space: report,
        attractor,
        lipschitz,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scales::{geometric_good, p_for_order, pair_b_for_p};

    fn b30() -> GoodSequence {
        geometric_good(1.0 / 30.0, 1.0 / 30.0).unwrap()
    }

    fn a(ks: &[u32]) -> Address {
        Address::ints(ks)
    }

    fn aw(ks: &[u32]) -> Address {
        a(ks).child(Entry::Omega)
    }

    fn label_image(f: &dyn GifsMap, space: &SpaceApprox, args: &[Label]) -> Label {
        let pts: Vec<&Pt> = args
            .iter()
            .map(|l| space.pt_of(l).expect("host label"))
            .collect();
        space.label_of(&f.eval(&pts)).unwrap().clone()
    }

    #[test]
    fn scattered_unfolds_on_omega_plus_one() {
        let bundle = gifs_scattered(OrdinalIndex::Fin(1), 1, &b30(), 3, 6).unwrap();
        let s = &bundle.space;
        let f = &bundle.witnesses["F"];
        let g = &bundle.witnesses["G"];
        let img = label_image(
            f.as_ref(),
            s,
            &[Label::Addr(Address::omega()), Label::Addr(a(&[3]))],
        );
        assert_eq!(img, Label::Addr(a(&[4])));
        for p in &s.points {
            assert_eq!(
                label_image(g.as_ref(), s, std::slice::from_ref(&p.label)),
                Label::Addr(a(&[1]))
            );
        }
    }

    #[test]
    fn scattered_attractor_equations_are_exact() {
        for alpha in [
            OrdinalIndex::Fin(1),
            OrdinalIndex::Fin(2),
            OrdinalIndex::Omega,
        ] {
            for n in 1..=3 {
                let bundle = gifs_scattered(alpha, n, &b30(), 3, 5).unwrap();
                let check = check_exact_attractor(&bundle.gifs, &bundle.space.pts()).unwrap();
                assert!(check.exact, "α={alpha}, n={n}: {check:?}");
            }
        }
    }

    #[test]
    fn discrete_scattered_spaces() {
        for n in 1..=3 {
            let bundle = gifs_scattered(OrdinalIndex::Fin(0), n, &b30(), 3, 5).unwrap();
            assert_eq!(bundle.space.len(), n as usize);
            assert!(
                check_exact_attractor(&bundle.gifs, &bundle.space.pts())
                    .unwrap()
                    .exact
            );
        }
    }

    #[test]
    fn surgery_examples() {
        assert_eq!(s_k_address(&aw(&[2, 3]), Some(2)), aw(&[4, 2]));
        assert_eq!(s_ik_address(2, &aw(&[2, 2]), Some(3)), aw(&[2, 2, 1]));
        assert_eq!(s_k_address(&Address::omega(), Some(2)), Address::omega());
        assert_eq!(s_k_address(&aw(&[2]), None), aw(&[4]));
        assert_eq!(s_ik_address(3, &aw(&[2]), Some(5)), aw(&[3, 2]));
    }

    #[test]
    fn sandwich_cover_is_exact() {
        let bundle = gifs_sandwiched(&TreeSpec::LambdaR, &b30(), 3, 4).unwrap();
        let check = check_exact_attractor(&bundle.gifs, &bundle.space.pts()).unwrap();
        assert!(check.exact, "{check:?}");
        let f = &bundle.witnesses["F"];
        for p in &bundle.space.points {
            let img = label_image(f.as_ref(), &bundle.space, std::slice::from_ref(&p.label));
            assert_eq!(first_int(&addr_of(&img)), Some(1));
        }
    }

    #[test]
    fn sandwich_violation_is_reported() {
        let err = gifs_sandwiched(&TreeSpec::LambdaMax, &b30(), 3, 4).unwrap_err();
        assert!(matches!(err, ConstructionError::SandwichViolated(_)));
        let err =
            gifs_sandwiched(&TreeSpec::alpha(OrdinalIndex::Fin(1)), &b30(), 3, 4).unwrap_err();
        assert!(matches!(err, ConstructionError::SandwichViolated(_)));
    }

    #[test]
    fn r_k_cases() {
        assert_eq!(r_k_address(2, &Address::omega()), aw(&[2]));
        assert_eq!(r_k_address(3, &a(&[1, 5])), a(&[3, 1, 5]));
        assert_eq!(r_k_address(2, &a(&[5, 1, 2])), a(&[2, 5, 2]));
        assert_eq!(r_k_address(2, &a(&[5, 1])), a(&[2, 5]));
        assert_eq!(r_k_address(3, &aw(&[4])), aw(&[3, 4]));
        assert!(!r_k_is_similarity(3, &aw(&[4])));
        assert!(r_k_is_similarity(3, &a(&[4, 2])));
    }

    #[test]
    fn lexicographic_ranks() {
        // Y_1 = {0, 1}: the four pairs in order.
        let ranks: Vec<u128> = [[0, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|t| lex_rank_in_level(t, 0, 2))
            .collect();
        assert_eq!(ranks, vec![0, 1, 2, 3]);
        // Level 2 over Y_1 ∪ Y_2 = {0, 1} ∪ {2..5}: brute force.
        let mut brute = Vec::new();
        for x in 0..6u128 {
            for y in 0..6u128 {
                if x >= 2 || y >= 2 {
                    brute.push([x, y]);
                }
            }
        }
        for (r, t) in brute.iter().enumerate() {
            assert_eq!(lex_rank_in_level(t, 2, 6), r as u128);
        }
    }

    fn mixed_fixture() -> MixedGifsBundle {
        let pair = pair_b_for_p(&p_for_order(2, 2), 4).unwrap();
        let m = gifs_scattered(OrdinalIndex::Fin(1), 1, &pair.b, 3, 4).unwrap();
        gifs_mixed(&m, &pair, 2, 3, 4).unwrap()
    }

    #[test]
    fn mixed_pairs_first_cluster_lexicographically() {
        let mb = mixed_fixture();
        let f = &mb.witnesses["F"];
        let c = |k, i| Label::Cluster { k, i };
        assert_eq!(
            label_image(f.as_ref(), &mb.space, &[c(1, 1), c(1, 2)]),
            c(2, 2)
        );
        let mut seen = BTreeSet::new();
        for i in 1..=2 {
            for j in 1..=2 {
                seen.insert(label_image(f.as_ref(), &mb.space, &[c(1, i), c(1, j)]));
            }
        }
        assert_eq!(seen.len(), 4);
        assert!(
            check_exact_attractor(&mb.gifs, &mb.space.pts())
                .unwrap()
                .exact
        );
        assert_eq!(mb.bound_profile.len(), 4);
    }

    #[test]
    fn mixed_rejects_low_order() {
        let pair = pair_b_for_p(&p_for_order(2, 2), 4).unwrap();
        let m = gifs_scattered(OrdinalIndex::Fin(1), 1, &pair.b, 3, 4).unwrap();
        assert!(matches!(
            gifs_mixed(&m, &pair, 1, 3, 4),
            Err(ConstructionError::OrderTooSmall(1))
        ));
        assert!(matches!(
            gifs_mixed(&m, &pair, 2, 3, 5),
            Err(ConstructionError::HostMismatch(_))
        ));
    }

    #[test]
    fn densify_two_points() {
        let t = gifs_scattered(OrdinalIndex::Fin(1), 1, &b30(), 3, 4).unwrap();
        let d = densify(&[vec![0.0], vec![10.0]], 1.0, &t.space, &t.gifs).unwrap();
        assert!(d.hausdorff_to_k <= 0.5);
        assert_eq!(d.space.len(), 2 * t.space.len());
        assert!(
            check_exact_attractor(&d.gifs, &d.space.pts())
                .unwrap()
                .exact
        );
        let one = densify(&[vec![3.0, 4.0]], 0.2, &t.space, &t.gifs).unwrap();
        assert!(one.hausdorff_to_k < 0.2);
        assert!(matches!(
            densify(&[], 1.0, &t.space, &t.gifs),
            Err(ConstructionError::EmptyK)
        ));
        assert!(matches!(
            densify(&[vec![0.0]], 0.0, &t.space, &t.gifs),
            Err(ConstructionError::BadEpsilon(_))
        ));
    }

    #[test]
    fn recipe_roundtrip() {
        let r = BundleRecipe::Scattered {
            alpha: OrdinalIndex::Omega,
            n: 2,
            b: b30(),
            depth: 3,
            width: 4,
        };
        let json = serde_json::to_string(&r).unwrap();
        let back: BundleRecipe = serde_json::from_str(&json).unwrap();
        assert_eq!(r, back);
        assert_eq!(
            back.build().unwrap().space().len(),
            gifs_scattered(OrdinalIndex::Omega, 2, &b30(), 3, 4)
                .unwrap()
                .space
                .len()
        );
    }
    #[test]
    fn component_space_collapses_to_s_space() {
        let template = TemplateCloud::segment_grid(16);
        let recipe = BundleRecipe::ComponentSpace {
            template,
            template_gifs: AffineGifs::quarters(),
            b: b30(),
            depth: 3,
            width: 4,
        };
        let bundle = recipe.build().unwrap();
        let report = verify_bundle(&bundle, false, 7).unwrap();
        match &report.attractor {
            AttractorStatus::Numeric {
                residual,
                allowed,
                quotient,
            } => {
                assert!(residual <= allowed, "residual {residual} > {allowed}");
                assert!(quotient.attractor_exact, "{quotient:?}");
                assert!(quotient.matches_s_space, "{quotient:?}");
            }
            other => panic!("unexpected status {other:?}"),
        }
    }

    #[test]
    fn scattered_maps_respect_their_claims() {
        for alpha in [
            OrdinalIndex::Fin(1),
            OrdinalIndex::Fin(2),
            OrdinalIndex::Omega,
        ] {
            for n in 1..=2 {
                let bundle = Bundle::Scattered(gifs_scattered(alpha, n, &b30(), 3, 5).unwrap());
                let report = verify_bundle(&bundle, true, 1).unwrap();
                for l in &report.lipschitz {
                    assert!(l.within_claim(), "α={alpha}, n={n}: {l:?}");
                }
                assert!(report.pass, "α={alpha}, n={n}");
            }
        }
    }

    #[test]
    fn sandwiched_and_mixed_reports_pass() {
        let s = Bundle::Scattered(gifs_sandwiched(&TreeSpec::LambdaR, &b30(), 3, 4).unwrap());
        let r = verify_bundle(&s, true, 3).unwrap();
        assert!(r.pass, "{:?}", r.lipschitz);
        let m = Bundle::Mixed(mixed_fixture());
        let r = verify_bundle(&m, true, 3).unwrap();
        assert!(r.pass, "{:?}", r.lipschitz);
    }
}
