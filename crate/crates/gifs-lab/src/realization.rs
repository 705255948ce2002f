//! Realizations of symbolic trees as point clouds on a line.
//!
//! Every node `η` owns an interval `I_η`; boundary points sit at `max I_η`.
//! Points are stored relative to the interval of their node, and distances
//! between points of different nodes are assembled from sums of positive
//! sequence terms along the two paths. This keeps relative accuracy even when
//! two points are closer than the spacing of floating-point numbers near their
//! absolute position, which happens quickly at depth (`b_20 ≈ 1e-30` for
//! `q = 1/30`).

use crate::scales::{GoodPair, GoodSequence, REL_TOL};
use crate::symbolic::{
    check_proper_in, enumerate_truncation, interior_nodes_in, Address, BoundaryAddress, Entry,
    SymbolicError, TreeSpec, Truncation,
};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::sync::Arc;
use thiserror::Error;

/// Absolute slack for the separation and diameter conditions.
pub const ABS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RealizationError {
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("tree is not proper on the truncation: {0} violations, first at {1}")]
    NotProper(usize, Address),
    #[error("the root must be interior with children 1..={0}")]
    RootNotInterior(u32),
    #[error("p_{0} is too large to realize the cluster explicitly")]
    ClusterTooLarge(usize),
    #[error("cluster Y_{0} does not fit in the gap next to I_({0})")]
    ClusterOverlap(usize),
    #[error("template cloud is degenerate: {0}")]
    BadTemplate(String),
    #[error("composite spaces need at least one part")]
    NoParts,
}

/// A closed interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn diam(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `I_η` in absolute coordinates, with `I_∅ = [origin, origin + b_0 + b_1]`.
///
/// Absolute coordinates lose resolution at depth; distances should be taken
/// through [`Geometry::dist`].
pub fn b_interval(b: &GoodSequence, eta: &Address, origin: f64) -> Interval {
    let (mut lo, mut hi) = (origin, origin + b.b(0) + b.b(1));
    let mut l = 0u64;
    for e in eta.entries() {
        match *e {
            Entry::Int(k) => {
                let k = u64::from(k);
                hi = lo + b.b(l + 1) + b.b(l + k - 1);
                l += k;
                lo = hi - (b.b(l) + b.b(l + 1));
            }
            Entry::Omega => {
                hi = lo + b.b(l + 1);
            }
        }
    }
    Interval { lo, hi }
}

/// `diam I_η`.
pub fn node_diam(b: &GoodSequence, eta: &Address) -> f64 {
    if eta.ends_with_omega() {
        b.b(eta.int_weight() + 1)
    } else {
        let l = eta.int_weight();
        b.b(l) + b.b(l + 1)
    }
}

/// `min I_(η⌢c) − min I_η` for a node of weight `l`.
fn inc_min(b: &GoodSequence, l: u64, c: Entry) -> f64 {
    match c {
        Entry::Int(k) => {
            let k = u64::from(k);
            (b.b(l + 1) - b.b(l + k + 1)) + (b.b(l + k - 1) - b.b(l + k))
        }
        Entry::Omega => 0.0,
    }
}

/// `max I_η − max I_(η⌢c)` for a node of weight `l`.
fn dec_max(b: &GoodSequence, l: u64, c: Entry) -> f64 {
    match c {
        Entry::Int(1) => 0.0,
        Entry::Int(k) => b.b(l) - b.b(l + u64::from(k) - 1),
        Entry::Omega => b.b(l),
    }
}

/// `min I_(η⌢k) − max I_(η⌢j)` for `k < j`.
fn sibling_gap(b: &GoodSequence, l: u64, k: u32, j: Entry) -> f64 {
    let k = u64::from(k);
    let far = match j {
        Entry::Int(j) => b.b(l + u64::from(j) - 1),
        Entry::Omega => 0.0,
    };
    b.b(l + k - 1) - (b.b(l + k) + b.b(l + k + 1) + far)
}

fn weight_prefix(node: &Address, start: usize) -> u64 {
    node.entries()[..start]
        .iter()
        .filter_map(|e| e.as_int())
        .map(u64::from)
        .sum()
}

/// `min I_node − min I_([node]_start)`.
fn min_offset(b: &GoodSequence, node: &Address, start: usize) -> f64 {
    let mut l = weight_prefix(node, start);
    let mut total = 0.0;
    for &c in &node.entries()[start..] {
        total += inc_min(b, l, c);
        l += c.as_int().map(u64::from).unwrap_or(0);
    }
    total
}

/// `max I_([node]_start) − min I_node`.
fn top_to_min(b: &GoodSequence, node: &Address, start: usize) -> f64 {
    let mut l = weight_prefix(node, start);
    let mut total = 0.0;
    for &c in &node.entries()[start..] {
        total += dec_max(b, l, c);
        l += c.as_int().map(u64::from).unwrap_or(0);
    }
    total + node_diam(b, node)
}

/// `min I_p − min I_q`, accurate relative to its own size.
pub fn min_difference(b: &GoodSequence, p: &Address, q: &Address) -> f64 {
    let c = p.common_prefix_len(q);
    if c == p.len() && c == q.len() {
        return 0.0;
    }
    if c == p.len() {
        return -min_offset(b, q, c);
    }
    if c == q.len() {
        return min_offset(b, p, c);
    }
    let (kp, kq) = (p.entries()[c], q.entries()[c]);
    let l = weight_prefix(p, c);
    let ordered = |right: &Address, left: &Address, k: u32, j: Entry| {
        min_offset(b, right, c + 1) + sibling_gap(b, l, k, j) + top_to_min(b, left, c + 1)
    };
    match (kp, kq) {
        (Entry::Int(k), j) if kp < kq => ordered(p, q, k, j),
        (j, Entry::Int(k)) => -ordered(q, p, k, j),
        _ => unreachable!("distinct siblings cannot both be ω"),
    }
}

/// A point: a node of a realized tree plus an offset from `min I_node`, or a
/// plain coordinate vector (node `∅`) in a plain frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Pt {
    pub part: u32,
    pub node: Address,
    pub w: Vec<f64>,
}

fn canon(x: f64) -> u64 {
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

impl PartialEq for Pt {
    fn eq(&self, other: &Self) -> bool {
        self.part == other.part
            && self.node == other.node
            && self.w.len() == other.w.len()
            && self
                .w
                .iter()
                .zip(&other.w)
                .all(|(a, b)| canon(*a) == canon(*b))
    }
}

impl Eq for Pt {}

impl Hash for Pt {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.part.hash(h);
        self.node.hash(h);
        for x in &self.w {
            canon(*x).hash(h);
        }
    }
}

impl PartialOrd for Pt {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pt {
    fn cmp(&self, other: &Self) -> Ordering {
        self.part
            .cmp(&other.part)
            .then_with(|| self.node.cmp(&other.node))
            .then_with(|| {
                for (a, b) in self.w.iter().zip(&other.w) {
                    match a.total_cmp(b) {
                        Ordering::Equal => continue,
                        o => return o,
                    }
                }
                self.w.len().cmp(&other.w.len())
            })
    }
}

impl Pt {
    pub fn plain(w: Vec<f64>) -> Pt {
        Pt {
            part: 0,
            node: Address::root(),
            w,
        }
    }

    pub fn tree(part: u32, node: Address, w: Vec<f64>) -> Pt {
        Pt { part, node, w }
    }

    pub fn with_part(&self, part: u32) -> Pt {
        Pt {
            part,
            node: self.node.clone(),
            w: self.w.clone(),
        }
    }
}

/// How the points of one part are embedded in the ambient space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Frame {
    /// Points are their own coordinates.
    Plain { dim: usize },
    /// Points are `shift + scale·((origin + min I_node)·u + w)`.
    Line {
        b: GoodSequence,
        origin: f64,
        u: Vec<f64>,
        scale: f64,
        shift: Vec<f64>,
    },
}

impl Frame {
    pub fn line(b: GoodSequence, origin: f64, u: Vec<f64>) -> Frame {
        let dim = u.len();
        Frame::Line {
            b,
            origin,
            u,
            scale: 1.0,
            shift: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Frame::Plain { dim } => *dim,
            Frame::Line { u, .. } => u.len(),
        }
    }

    pub fn placed(&self, factor: f64, offset: &[f64]) -> Frame {
        match self {
            Frame::Plain { dim } => Frame::Plain { dim: *dim },
            Frame::Line {
                b,
                origin,
                u,
                scale,
                shift,
            } => Frame::Line {
                b: b.clone(),
                origin: *origin,
                u: u.clone(),
                scale: scale * factor,
                shift: shift
                    .iter()
                    .zip(offset)
                    .map(|(s, o)| s * factor + o)
                    .collect(),
            },
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// The ambient metric shared by all parts of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub frames: Vec<Frame>,
}

impl Geometry {
    pub fn plain(dim: usize) -> Geometry {
        Geometry {
            frames: vec![Frame::Plain { dim }],
        }
    }

    pub fn dim(&self) -> usize {
        self.frames.first().map(Frame::dim).unwrap_or(0)
    }

    pub fn dist(&self, p: &Pt, q: &Pt) -> f64 {
        if p.part != q.part {
            let a = self.coords(p);
            let b = self.coords(q);
            return norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
        }
        match &self.frames[p.part as usize] {
            Frame::Plain { .. } => {
                norm(&p.w.iter().zip(&q.w).map(|(x, y)| x - y).collect::<Vec<_>>())
            }
            Frame::Line { b, u, scale, .. } => {
                let delta = min_difference(b, &p.node, &q.node);
                if u.len() == 1 {
                    return scale * (delta * u[0] + p.w[0] - q.w[0]).abs();
                }
                let v: Vec<f64> = (0..u.len())
                    .map(|i| delta * u[i] + p.w[i] - q.w[i])
                    .collect();
                scale * norm(&v)
            }
        }
    }

    /// Absolute coordinates (resolution limited by floating point).
    pub fn coords(&self, p: &Pt) -> Vec<f64> {
        match &self.frames[p.part as usize] {
            Frame::Plain { .. } => p.w.clone(),
            Frame::Line {
                b,
                origin,
                u,
                scale,
                shift,
            } => {
                let base = origin + min_offset(b, &p.node, 0);
                (0..u.len())
                    .map(|i| shift[i] + scale * (base * u[i] + p.w[i]))
                    .collect()
            }
        }
    }

    /// Diameter of the interval attached to the point's node, in ambient units.
    pub fn local_scale(&self, p: &Pt) -> f64 {
        match &self.frames[p.part as usize] {
            Frame::Plain { .. } => 0.0,
            Frame::Line { b, scale, .. } => scale * node_diam(b, &p.node),
        }
    }
}

/// A finite cloud `Z` with two anchors realizing its diameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateCloud {
    pub points: Vec<Vec<f64>>,
    pub anchor_min: usize,
    pub anchor_max: usize,
    /// Hausdorff distance from the cloud to the compact set it samples.
    #[serde(default)]
    pub hausdorff_error: f64,
}

impl TemplateCloud {
    /// `n + 1` equally spaced points of `[0, 1]`.
    pub fn segment_grid(n: usize) -> TemplateCloud {
        let points = (0..=n).map(|i| vec![i as f64 / n as f64]).collect();
        TemplateCloud {
            points,
            anchor_min: 0,
            anchor_max: n,
            hausdorff_error: 0.5 / n as f64,
        }
    }

    pub fn dim(&self) -> usize {
        self.points.first().map(Vec::len).unwrap_or(0)
    }

    pub fn anchor_span(&self) -> f64 {
        let a = &self.points[self.anchor_min];
        let b = &self.points[self.anchor_max];
        norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
    }

    pub fn validate(&self) -> Result<(), RealizationError> {
        let bad = |m: &str| Err(RealizationError::BadTemplate(m.to_string()));
        if self.points.len() < 2 {
            return bad("at least two points are required");
        }
        let d = self.dim();
        if d == 0
            || self
                .points
                .iter()
                .any(|p| p.len() != d || p.iter().any(|x| !x.is_finite()))
        {
            return bad("points must share a positive dimension");
        }
        if self.anchor_min >= self.points.len() || self.anchor_max >= self.points.len() {
            return bad("anchor index out of range");
        }
        let span = self.anchor_span();
        if !(span > 0.0) {
            return bad("anchors coincide");
        }
        for p in &self.points {
            for q in &self.points {
                let dpq = norm(&p.iter().zip(q).map(|(x, y)| x - y).collect::<Vec<_>>());
                if dpq > span * (1.0 + REL_TOL) {
                    return bad("anchors do not realize the diameter");
                }
            }
        }
        Ok(())
    }

    /// Unit vector from the min anchor to the max anchor.
    pub fn direction(&self) -> Vec<f64> {
        let a = &self.points[self.anchor_min];
        let b = &self.points[self.anchor_max];
        let span = self.anchor_span();
        a.iter().zip(b).map(|(x, y)| (y - x) / span).collect()
    }

    /// Offset vector of template point `z` inside a copy of diameter `diam`.
    pub fn offset(&self, z: &[f64], diam: f64) -> Vec<f64> {
        let s = diam / self.anchor_span();
        let a = &self.points[self.anchor_min];
        z.iter().zip(a).map(|(x, y)| s * (x - y)).collect()
    }

    /// Template coordinates of an offset inside a copy of diameter `diam`.
    pub fn unoffset(&self, w: &[f64], diam: f64) -> Vec<f64> {
        let s = diam / self.anchor_span();
        let a = &self.points[self.anchor_min];
        w.iter().zip(a).map(|(x, y)| y + x / s).collect()
    }
}

/// Identity of a host point.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    /// The point `x_η` of a boundary address or truncated path.
    Addr(Address),
    /// The `i`-th point (1-based) of the cluster `Y_k`.
    Cluster { k: u32, i: u32 },
    /// Template point `j` in the copy attached to leaf `addr`.
    Copy { addr: Address, j: u32 },
    /// A point of part `part` of a composite space.
    Part { part: u32, inner: Box<Label> },
    /// Point `i` of a plain cloud.
    Index(u32),
}

impl Label {
    /// The tree address carried by the label, if any.
    pub fn addr(&self) -> Option<&Address> {
        match self {
            Label::Addr(a) | Label::Copy { addr: a, .. } => Some(a),
            Label::Part { inner, .. } => inner.addr(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HostPoint {
    pub label: Label,
    pub pt: Pt,
    pub exact: bool,
}

/// Where a part of a composite space is placed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub recipe: SpaceRecipe,
    pub scale: f64,
    pub shift: Vec<f64>,
}

/// Everything needed to rebuild a realized space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceRecipe {
    S {
        tree: TreeSpec,
        b: GoodSequence,
        depth: u32,
        width: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_weight: Option<u32>,
        origin: f64,
    },
    Bp {
        tree: TreeSpec,
        pair: GoodPair,
        depth: u32,
        width: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_weight: Option<u32>,
        origin: f64,
    },
    Z {
        tree: TreeSpec,
        b: GoodSequence,
        template: TemplateCloud,
        depth: u32,
        width: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_weight: Option<u32>,
        origin: f64,
    },
    Composite {
        parts: Vec<Placement>,
    },
    Plain {
        points: Vec<Vec<f64>>,
    },
}

/// A finite approximation of a realized space together with a certified
/// Hausdorff bound to the ideal space.
#[derive(Clone, Debug)]
pub struct SpaceApprox {
    pub recipe: SpaceRecipe,
    pub geometry: Geometry,
    pub points: Vec<HostPoint>,
    pub error_bound: f64,
    pub parts: Vec<Arc<SpaceApprox>>,
    boundary: HashSet<Address>,
    label_index: HashMap<Label, usize>,
    pt_index: HashMap<Pt, usize>,
}

impl SpaceApprox {
    fn assemble(
        recipe: SpaceRecipe,
        geometry: Geometry,
        mut points: Vec<HostPoint>,
        error_bound: f64,
        boundary: HashSet<Address>,
        parts: Vec<Arc<SpaceApprox>>,
    ) -> SpaceApprox {
        points.sort_by(|a, b| a.label.cmp(&b.label));
        let label_index = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.label.clone(), i))
            .collect();
        let pt_index = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.pt.clone(), i))
            .collect();
        SpaceApprox {
            recipe,
            geometry,
            points,
            error_bound,
            parts,
            boundary,
            label_index,
            pt_index,
        }
    }

    pub fn build(recipe: &SpaceRecipe) -> Result<SpaceApprox, RealizationError> {
        match recipe {
            SpaceRecipe::S {
                tree,
                b,
                depth,
                width,
                max_weight,
                origin,
            } => realize_s_space_in(tree, b, &trunc(*depth, *width, *max_weight), *origin),
            SpaceRecipe::Bp {
                tree,
                pair,
                depth,
                width,
                max_weight,
                origin,
            } => realize_bp_space_in(tree, pair, &trunc(*depth, *width, *max_weight), *origin),
            SpaceRecipe::Z {
                tree,
                b,
                template,
                depth,
                width,
                max_weight,
                origin,
            } => realize_z_space_in(
                tree,
                b,
                template,
                &trunc(*depth, *width, *max_weight),
                *origin,
            ),
            SpaceRecipe::Composite { parts } => realize_composite(parts),
            SpaceRecipe::Plain { points } => Ok(plain_space(points.clone())),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn pts(&self) -> Vec<Pt> {
        self.points.iter().map(|p| p.pt.clone()).collect()
    }

    pub fn index_of_label(&self, label: &Label) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    pub fn index_of_pt(&self, pt: &Pt) -> Option<usize> {
        self.pt_index.get(pt).copied()
    }

    pub fn label_of(&self, pt: &Pt) -> Option<&Label> {
        self.index_of_pt(pt).map(|i| &self.points[i].label)
    }

    pub fn pt_of(&self, label: &Label) -> Option<&Pt> {
        self.index_of_label(label).map(|i| &self.points[i].pt)
    }

    pub fn contains_label(&self, label: &Label) -> bool {
        self.label_index.contains_key(label)
    }

    pub fn dist(&self, p: &Pt, q: &Pt) -> f64 {
        self.geometry.dist(p, q)
    }

    /// Tree and truncation window of a single-tree space.
    pub fn truncation(&self) -> Option<(&TreeSpec, Truncation)> {
        match &self.recipe {
            SpaceRecipe::S {
                tree,
                depth,
                width,
                max_weight,
                ..
            }
            | SpaceRecipe::Bp {
                tree,
                depth,
                width,
                max_weight,
                ..
            }
            | SpaceRecipe::Z {
                tree,
                depth,
                width,
                max_weight,
                ..
            } => Some((tree, trunc(*depth, *width, *max_weight))),
            _ => None,
        }
    }

    pub fn b(&self) -> Option<&GoodSequence> {
        match &self.recipe {
            SpaceRecipe::S { b, .. } | SpaceRecipe::Z { b, .. } => Some(b),
            SpaceRecipe::Bp { pair, .. } => Some(&pair.b),
            _ => None,
        }
    }

    pub fn template(&self) -> Option<&TemplateCloud> {
        match &self.recipe {
            SpaceRecipe::Z { template, .. } => Some(template),
            _ => None,
        }
    }

    /// Boundary entries (exact leaves and truncated paths) of the truncation.
    pub fn boundary_addresses(&self) -> &HashSet<Address> {
        &self.boundary
    }

    /// The representative point `x_η` of a boundary address.
    pub fn x_label(&self, addr: &Address) -> Option<Label> {
        let plain = Label::Addr(addr.clone());
        if self.contains_label(&plain) {
            return Some(plain);
        }
        let t = self.template()?;
        let copy = Label::Copy {
            addr: addr.clone(),
            j: t.anchor_max as u32,
        };
        self.contains_label(&copy).then_some(copy)
    }

    /// Projects an ideal address onto the truncation: follow the address while
    /// it stays inside the truncated tree, then descend through the largest
    /// admissible child until a boundary entry is reached.
    pub fn snap_addr(&self, eta: &Address) -> Address {
        let Some((tree, window)) = self.truncation() else {
            return eta.clone();
        };
        let depth = window.depth;
        let mut node = Address::root();
        let mut on_path = true;
        for t in 0..=(depth as usize + 1) {
            if self.boundary.contains(&node) {
                return node;
            }
            let mut next = None;
            if on_path && t < eta.len() {
                let c = eta.entries()[t];
                let admissible = window.admits(&node, c);
                if admissible && !node.ends_with_omega() && tree.contains(node.child(c).entries()) {
                    next = Some(c);
                }
            }
            let c = match next {
                Some(c) => c,
                None => {
                    on_path = false;
                    match largest_admissible(tree, &node, window.width_at(&node)) {
                        Some(c) => c,
                        None => return node,
                    }
                }
            };
            node = node.child(c);
        }
        node
    }

    /// Projects an arbitrary label onto a host label.
    pub fn snap(&self, label: &Label) -> Label {
        if self.contains_label(label) {
            return label.clone();
        }
        match label {
            Label::Addr(a) => {
                let s = self.snap_addr(a);
                self.x_label(&s).unwrap_or(Label::Addr(s))
            }
            Label::Copy { addr, j } => {
                let s = self.snap_addr(addr);
                // A copy on a leaf cut off by the truncation is smaller than
                // the error bound: it collapses onto the representative point.
                let copy = Label::Copy {
                    addr: s.clone(),
                    j: *j,
                };
                if s == *addr && self.contains_label(&copy) {
                    copy
                } else {
                    self.x_label(&s).unwrap_or(Label::Addr(s))
                }
            }
            Label::Cluster { .. } => {
                let w = self.snap_addr(&Address::omega());
                self.x_label(&w).unwrap_or(Label::Addr(w))
            }
            Label::Part { part, inner } => Label::Part {
                part: *part,
                inner: Box::new(self.parts[*part as usize].snap(inner)),
            },
            Label::Index(_) => label.clone(),
        }
    }

    /// Moves point `i` by `delta` (for building deliberately broken clouds).
    pub fn perturb(&mut self, i: usize, delta: &[f64]) {
        let old = self.points[i].pt.clone();
        self.pt_index.remove(&old);
        for (w, d) in self.points[i].pt.w.iter_mut().zip(delta) {
            *w += d;
        }
        self.pt_index.insert(self.points[i].pt.clone(), i);
    }

    /// Indices of points whose address extends `prefix` (clusters excluded).
    pub fn indices_under(&self, prefix: &Address) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.label.addr().is_some_and(|a| prefix.is_prefix_of(a)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of the cluster `Y_k`.
    pub fn cluster_indices(&self, k: u32) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p.label, Label::Cluster { k: kk, .. } if kk == k))
            .map(|(i, _)| i)
            .collect()
    }
}

fn largest_admissible(tree: &TreeSpec, node: &Address, width: u32) -> Option<Entry> {
    if node.ends_with_omega() {
        return None;
    }
    tree.children_within(node, width).last().copied()
}

fn plain_space(points: Vec<Vec<f64>>) -> SpaceApprox {
    let dim = points.first().map(Vec::len).unwrap_or(1);
    let hosts = points
        .iter()
        .enumerate()
        .map(|(i, w)| HostPoint {
            label: Label::Index(i as u32),
            pt: Pt::plain(w.clone()),
            exact: true,
        })
        .collect();
    SpaceApprox::assemble(
        SpaceRecipe::Plain { points },
        Geometry::plain(dim),
        hosts,
        0.0,
        HashSet::new(),
        Vec::new(),
    )
}

/// A plain finite cloud with the Euclidean metric.
pub fn plain_cloud(points: Vec<Vec<f64>>) -> SpaceApprox {
    plain_space(points)
}

fn trunc(depth: u32, width: u32, max_weight: Option<u32>) -> Truncation {
    Truncation {
        depth,
        width,
        max_weight,
    }
}

fn checked_boundary(
    tree: &TreeSpec,
    window: &Truncation,
) -> Result<Vec<BoundaryAddress>, RealizationError> {
    if tree.is_builtin_proper() {
        let report = check_proper_in(tree, window);
        if let Some(v) = report.violations.first() {
            return Err(RealizationError::NotProper(
                report.violations.len(),
                v.node.clone(),
            ));
        }
    }
    Ok(enumerate_truncation(tree, window)?)
}

/// The space `(Λ, b, s)` truncated at depth `depth` and width `width`.
pub fn realize_s_space(
    tree: &TreeSpec,
    b: &GoodSequence,
    depth: u32,
    width: u32,
    origin: f64,
) -> Result<SpaceApprox, RealizationError> {
    realize_s_space_in(tree, b, &Truncation::new(depth, width), origin)
}

/// The space `(Λ, b, s)` on an arbitrary truncation window.
pub fn realize_s_space_in(
    tree: &TreeSpec,
    b: &GoodSequence,
    window: &Truncation,
    origin: f64,
) -> Result<SpaceApprox, RealizationError> {
    let boundary = checked_boundary(tree, window)?;
    let points = boundary
        .iter()
        .map(|ba| HostPoint {
            label: Label::Addr(ba.addr.clone()),
            pt: Pt::tree(0, ba.addr.clone(), vec![node_diam(b, &ba.addr)]),
            exact: ba.is_exact(),
        })
        .collect();
    let error_bound = truncation_error_bound_in(tree, b, window);
    Ok(SpaceApprox::assemble(
        SpaceRecipe::S {
            tree: tree.clone(),
            b: b.clone(),
            depth: window.depth,
            width: window.width,
            max_weight: window.max_weight,
            origin,
        },
        Geometry {
            frames: vec![Frame::line(b.clone(), origin, vec![1.0])],
        },
        points,
        error_bound,
        boundary.into_iter().map(|ba| ba.addr).collect(),
        Vec::new(),
    ))
}

/// The space `(Λ, b, p, s)`: the s-space of `Λ` plus finite clusters `Y_k`
/// of `p_k` points to the right of each `I_(k)`, for `k ≤ width`.
pub fn realize_bp_space(
    tree: &TreeSpec,
    pair: &GoodPair,
    depth: u32,
    width: u32,
    origin: f64,
) -> Result<SpaceApprox, RealizationError> {
    realize_bp_space_in(tree, pair, &Truncation::new(depth, width), origin)
}

/// The space `(Λ, b, p, s)` on an arbitrary truncation window; clusters are
/// placed for `k ≤ width`.
pub fn realize_bp_space_in(
    tree: &TreeSpec,
    pair: &GoodPair,
    window: &Truncation,
    origin: f64,
) -> Result<SpaceApprox, RealizationError> {
    let width = window.width;
    let b = &pair.b;
    let kmax = width.min(pair.k_max as u32);
    let root = tree.children_within(&Address::root(), width);
    if (1..=kmax).any(|k| !root.contains(&Entry::Int(k))) {
        return Err(RealizationError::RootNotInterior(kmax));
    }
    let base = realize_s_space_in(tree, b, window, origin)?;
    let mut points = base.points.clone();
    let terms = pair.p.terms(kmax as usize);
    for k in 1..=kmax {
        let ku = u64::from(k);
        let pk = terms[k as usize - 1]
            .to_u64()
            .filter(|&v| v <= 1_000_000)
            .ok_or(RealizationError::ClusterTooLarge(k as usize))?;
        let bk = b.b(ku);
        let extent = 2.0 * bk * (2.0 * pk as f64 - 1.0);
        if k >= 2 && !(extent < sibling_gap(b, 0, k - 1, Entry::Int(k))) {
            return Err(RealizationError::ClusterOverlap(k as usize));
        }
        let node = Address::ints(&[k]);
        let start = node_diam(b, &node) + 2.0 * bk * pk as f64;
        for i in 1..=pk {
            points.push(HostPoint {
                label: Label::Cluster { k, i: i as u32 },
                pt: Pt::tree(0, node.clone(), vec![start + 2.0 * bk * (i - 1) as f64]),
                exact: true,
            });
        }
    }
    Ok(SpaceApprox::assemble(
        SpaceRecipe::Bp {
            tree: tree.clone(),
            pair: pair.clone(),
            depth: window.depth,
            width: window.width,
            max_weight: window.max_weight,
            origin,
        },
        base.geometry.clone(),
        points,
        base.error_bound,
        base.boundary.clone(),
        Vec::new(),
    ))
}

/// The space `(Λ, b, Z)`: a similar copy of the template on every exact
/// leaf, spanning `I_η` along the anchor direction; truncated paths keep the
/// single point `max I_η`.
pub fn realize_z_space(
    tree: &TreeSpec,
    b: &GoodSequence,
    template: &TemplateCloud,
    depth: u32,
    width: u32,
    origin: f64,
) -> Result<SpaceApprox, RealizationError> {
    realize_z_space_in(tree, b, template, &Truncation::new(depth, width), origin)
}

/// The space `(Λ, b, Z)` on an arbitrary truncation window.
pub fn realize_z_space_in(
    tree: &TreeSpec,
    b: &GoodSequence,
    template: &TemplateCloud,
    window: &Truncation,
    origin: f64,
) -> Result<SpaceApprox, RealizationError> {
    template.validate()?;
    let boundary = checked_boundary(tree, window)?;
    let u = template.direction();
    let mut points = Vec::new();
    let mut max_copy = 0.0f64;
    for ba in &boundary {
        let diam = node_diam(b, &ba.addr);
        if ba.is_exact() {
            max_copy = max_copy.max(diam);
            for (j, z) in template.points.iter().enumerate() {
                points.push(HostPoint {
                    label: Label::Copy {
                        addr: ba.addr.clone(),
                        j: j as u32,
                    },
                    pt: Pt::tree(0, ba.addr.clone(), template.offset(z, diam)),
                    exact: true,
                });
            }
        } else {
            points.push(HostPoint {
                label: Label::Addr(ba.addr.clone()),
                pt: Pt::tree(0, ba.addr.clone(), u.iter().map(|x| x * diam).collect()),
                exact: false,
            });
        }
    }
    let template_part = template.hausdorff_error / template.anchor_span() * max_copy;
    let error_bound = truncation_error_bound_in(tree, b, window).max(template_part);
    Ok(SpaceApprox::assemble(
        SpaceRecipe::Z {
            tree: tree.clone(),
            b: b.clone(),
            template: template.clone(),
            depth: window.depth,
            width: window.width,
            max_weight: window.max_weight,
            origin,
        },
        Geometry {
            frames: vec![Frame::line(b.clone(), origin, u)],
        },
        points,
        error_bound,
        boundary.into_iter().map(|ba| ba.addr).collect(),
        Vec::new(),
    ))
}

fn realize_composite(parts: &[Placement]) -> Result<SpaceApprox, RealizationError> {
    if parts.is_empty() {
        return Err(RealizationError::NoParts);
    }
    let mut frames = Vec::new();
    let mut points = Vec::new();
    let mut built = Vec::new();
    let mut error_bound = 0.0f64;
    for (p, placement) in parts.iter().enumerate() {
        let space = SpaceApprox::build(&placement.recipe)?;
        frames.push(space.geometry.frames[0].placed(placement.scale, &placement.shift));
        error_bound = error_bound.max(placement.scale * space.error_bound);
        for hp in &space.points {
            points.push(HostPoint {
                label: Label::Part {
                    part: p as u32,
                    inner: Box::new(hp.label.clone()),
                },
                pt: hp.pt.with_part(p as u32),
                exact: hp.exact,
            });
        }
        built.push(Arc::new(space));
    }
    Ok(SpaceApprox::assemble(
        SpaceRecipe::Composite {
            parts: parts.to_vec(),
        },
        Geometry { frames },
        points,
        error_bound,
        HashSet::new(),
        built,
    ))
}

/// Certified Hausdorff bound between the truncation and the ideal space:
/// `b_(l(ξ)+N−1)` for every width cut below `ξ`, `b_(l(η)) + b_(l(η)+1)` for
/// every truncated path `η`, and `0` when nothing is cut.
pub fn truncation_error_bound(tree: &TreeSpec, b: &GoodSequence, depth: u32, width: u32) -> f64 {
    truncation_error_bound_in(tree, b, &Truncation::new(depth, width))
}

/// Error bound of an arbitrary truncation window; a node whose integer
/// children are all cut by the weight cap contributes `diam I_ξ`.
pub fn truncation_error_bound_in(tree: &TreeSpec, b: &GoodSequence, window: &Truncation) -> f64 {
    let mut bound = 0.0f64;
    for node in interior_nodes_in(tree, window) {
        let l = node.int_weight();
        let width = window.width_at(&node);
        if tree.has_child_beyond(&node, width) {
            let cut = if width == 0 {
                node_diam(b, &node)
            } else {
                b.b(l + u64::from(width) - 1)
            };
            bound = bound.max(cut);
        }
        if node.len() as u32 + 1 == window.depth {
            for c in tree.children_within(&node, width) {
                let child = node.child(c);
                if tree.has_child(child.entries()) {
                    let lc = child.int_weight();
                    bound = bound.max(b.b(lc) + b.b(lc + 1));
                }
            }
        }
    }
    if let Ok(boundary) = enumerate_truncation(tree, window) {
        for ba in boundary
            .iter()
            .filter(|ba| !ba.is_exact() && (ba.addr.len() as u32) < window.depth)
        {
            bound = bound.max(node_diam(b, &ba.addr));
        }
    }
    bound
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionFailure {
    pub node: Address,
    pub k: Option<u32>,
    pub condition: String,
    pub margin: f64,
}

/// Outcome of checking the separation and diameter conditions on a cloud.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SpaceReport {
    pub conditions_checked: usize,
    /// `min (dist − (b_(l+k−1) − 2b_(l+k) − b_(l+k+1)))` over nodes and children.
    pub min_separation_margin: f64,
    /// `min (b_(l+k−1) − diam)` over nodes and children.
    pub min_diameter_margin: f64,
    /// Same margins divided by the corresponding bound.
    pub min_relative_margin: f64,
    pub failures: Vec<ConditionFailure>,
}

impl SpaceReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }

    fn merge(&mut self, other: SpaceReport) {
        self.conditions_checked += other.conditions_checked;
        self.min_separation_margin = self.min_separation_margin.min(other.min_separation_margin);
        self.min_diameter_margin = self.min_diameter_margin.min(other.min_diameter_margin);
        self.min_relative_margin = self.min_relative_margin.min(other.min_relative_margin);
        self.failures.extend(other.failures);
    }
}

fn min_max_between(space: &SpaceApprox, a: &[usize], b: &[usize]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &i in a {
        for &j in b {
            let d = space.dist(&space.points[i].pt, &space.points[j].pt);
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    (lo, hi)
}

fn diam_of(space: &SpaceApprox, a: &[usize]) -> f64 {
    let mut hi = 0.0f64;
    for (x, &i) in a.iter().enumerate() {
        for &j in &a[x + 1..] {
            hi = hi.max(space.dist(&space.points[i].pt, &space.points[j].pt));
        }
    }
    hi
}

/// Checks, on every interior node `η` of the truncation and every realized
/// child `k`, the separation `dist(X_(η⌢k), ⋃_(j>k) X_(η⌢j)) ≥ b_(l+k−1) −
/// 2b_(l+k) − b_(l+k+1)` and the diameter bound `diam ⋃_(k≤j<ω) X_(η⌢j) ≤
/// b_(l+k−1)`, plus the accumulation inequalities around `x_(η⌢ω)`; on
/// cluster spaces the cluster conditions are checked as well.
pub fn verify_space_conditions(space: &SpaceApprox) -> SpaceReport {
    let mut report = SpaceReport {
        min_separation_margin: f64::INFINITY,
        min_diameter_margin: f64::INFINITY,
        min_relative_margin: f64::INFINITY,
        ..Default::default()
    };
    if let SpaceRecipe::Composite { .. } = space.recipe {
        for part in &space.parts {
            report.merge(verify_space_conditions(part));
        }
        return report;
    }
    let (Some((tree, window)), Some(b)) = (space.truncation(), space.b()) else {
        return report;
    };
    for node in interior_nodes_in(tree, &window) {
        verify_node(space, b, &node, tree, window.width_at(&node), &mut report);
    }
    if let SpaceRecipe::Bp { .. } = space.recipe {
        verify_clusters(space, b, window.width, &mut report);
    }
    report
}

fn verify_node(
    space: &SpaceApprox,
    b: &GoodSequence,
    node: &Address,
    tree: &TreeSpec,
    width: u32,
    report: &mut SpaceReport,
) {
    let l = node.int_weight();
    let children = tree.children_within(node, width);
    let groups: Vec<(Entry, Vec<usize>)> = children
        .iter()
        .map(|&c| (c, space.indices_under(&node.child(c))))
        .collect();
    let omega: Vec<usize> = groups
        .iter()
        .find(|(c, _)| *c == Entry::Omega)
        .map(|(_, v)| v.clone())
        .unwrap_or_default();
    let mut union: Vec<usize> = Vec::new();
    let mut union_diam = 0.0f64;
    for (c, xs) in groups.iter().rev() {
        let Entry::Int(k) = *c else { continue };
        if xs.is_empty() {
            continue;
        }
        let ku = u64::from(k);
        let (to_union_min, to_union_max) = min_max_between(space, xs, &union);
        let (to_omega_min, _) = min_max_between(space, xs, &omega);
        union_diam = union_diam.max(diam_of(space, xs)).max(to_union_max);
        union.extend_from_slice(xs);
        let sep_bound = b.b(l + ku - 1) - 2.0 * b.b(l + ku) - b.b(l + ku + 1);
        let sep = to_union_min.min(to_omega_min);
        let diam_bound = b.b(l + ku - 1);
        report.conditions_checked += 2;
        let sep_margin = sep - sep_bound;
        let diam_margin = diam_bound - union_diam;
        report.min_separation_margin = report.min_separation_margin.min(sep_margin);
        report.min_diameter_margin = report.min_diameter_margin.min(diam_margin);
        report.min_relative_margin = report
            .min_relative_margin
            .min(sep_margin / sep_bound)
            .min(diam_margin / diam_bound);
        if sep.is_finite() && sep_margin < -ABS_TOL {
            report.failures.push(ConditionFailure {
                node: node.clone(),
                k: Some(k),
                condition: "separation".into(),
                margin: sep_margin,
            });
        }
        if diam_margin < -ABS_TOL {
            report.failures.push(ConditionFailure {
                node: node.clone(),
                k: Some(k),
                condition: "diameter".into(),
                margin: diam_margin,
            });
        }
    }
    let Some(anchor) = space
        .x_label(&node.child(Entry::Omega))
        .and_then(|l| space.index_of_label(&l))
    else {
        return;
    };
    let xa = &space.points[anchor].pt;
    for &x in &omega {
        let px = &space.points[x].pt;
        let dx = space.dist(px, xa);
        for &y in &union {
            let py = &space.points[y].pt;
            let dxy = space.dist(px, py);
            report.conditions_checked += 1;
            let ok = space.dist(py, xa) <= 2.0 * dxy * (1.0 + REL_TOL)
                && dx <= 3.0 * dxy * (1.0 + REL_TOL);
            if !ok {
                report.failures.push(ConditionFailure {
                    node: node.clone(),
                    k: None,
                    condition: "accumulation".into(),
                    margin: 2.0 * dxy - space.dist(py, xa),
                });
                return;
            }
        }
    }
}

fn verify_clusters(space: &SpaceApprox, b: &GoodSequence, width: u32, report: &mut SpaceReport) {
    let kmax = (1..=width)
        .take_while(|k| !space.cluster_indices(*k).is_empty())
        .last()
        .unwrap_or(0);
    let zs: Vec<Vec<usize>> = (1..=kmax)
        .map(|k| {
            let mut v = space.indices_under(&Address::ints(&[k]));
            v.extend(space.cluster_indices(k));
            v
        })
        .collect();
    let omega = space.indices_under(&Address::omega());
    let fail = |k: u32, what: &str, margin: f64, report: &mut SpaceReport| {
        report.conditions_checked += 1;
        if margin < -ABS_TOL {
            report.failures.push(ConditionFailure {
                node: Address::root(),
                k: Some(k),
                condition: what.into(),
                margin,
            });
        }
    };
    let mut tail: Vec<usize> = omega.clone();
    let mut tail_diam = diam_of(space, &tail);
    for k in (1..=kmax).rev() {
        let z = &zs[k as usize - 1];
        let bk1 = b.b(u64::from(k) - 1);
        let (to_tail_min, to_tail_max) = min_max_between(space, z, &tail);
        let dz = diam_of(space, z);
        fail(k, "cluster_diameter", bk1 / 8.0 - dz, report);
        fail(
            k,
            "cluster_separation",
            to_tail_min - 2.0 / 3.0 * bk1,
            report,
        );
        tail_diam = tail_diam.max(dz).max(to_tail_max);
        tail.extend_from_slice(z);
        fail(k, "cluster_union_diameter", 1.25 * bk1 - tail_diam, report);
        let xs = space.indices_under(&Address::ints(&[k]));
        let ys = space.cluster_indices(k);
        let (dxy, _) = min_max_between(space, &xs, &ys);
        let (dx, dy) = (diam_of(space, &xs), diam_of(space, &ys));
        fail(k, "cluster_nesting", (dy - dx).min(dxy - dy), report);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scales::{geometric_good, p_for_order, pair_b_for_p};
    use crate::symbolic::OrdinalIndex;

    fn a(s: &str) -> Address {
        s.parse().unwrap()
    }

    fn b30() -> GoodSequence {
        geometric_good(1.0 / 30.0, 1.0 / 30.0).unwrap()
    }

    fn close(x: f64, y: f64) -> bool {
        (x - y).abs() <= 1e-14 * y.abs().max(1e-300)
    }

    #[test]
    fn intervals_match_the_recurrence() {
        let b = b30();
        let root = b_interval(&b, &Address::root(), 0.0);
        assert!(close(root.hi, 31.0 / 900.0));
        let two = b_interval(&b, &a("2"), 0.0);
        assert!(close(two.hi, 2.0 / 900.0));
        assert!(close(two.diam(), b.b(2) + b.b(3)));
        let w = b_interval(&b, &a("w"), 0.0);
        assert_eq!(w.lo, 0.0);
        assert!(close(w.hi, 1.0 / 900.0));
    }

    #[test]
    fn child_intervals_are_nested_and_gapped() {
        let b = b30();
        for eta in ["", "2", "3.1", "4.2"] {
            let eta = a(eta);
            let parent = b_interval(&b, &eta, 0.0);
            let l = eta.int_weight();
            for k in 1..6u32 {
                let c = b_interval(&b, &eta.child(Entry::Int(k)), 0.0);
                let d = b_interval(&b, &eta.child(Entry::Int(k + 1)), 0.0);
                assert!(c.lo >= parent.lo && c.hi <= parent.hi + 1e-18);
                let ku = u64::from(k);
                let gap = b.b(l + ku - 1) - 2.0 * b.b(l + ku) - b.b(l + ku + 1);
                assert!((c.lo - d.hi - gap).abs() <= 1e-12 * gap.max(1e-30) + 1e-18);
            }
        }
    }

    #[test]
    fn accurate_difference_agrees_with_absolute_at_shallow_depth() {
        let b = geometric_good(1.0, 0.03).unwrap();
        let nodes = ["", "1", "2", "w", "2.3", "2.w", "3.1.2", "1.1", "5"];
        for p in nodes {
            for q in nodes {
                let (p, q) = (a(p), a(q));
                let exact = min_difference(&b, &p, &q);
                let rough = b_interval(&b, &p, 0.0).lo - b_interval(&b, &q, 0.0).lo;
                assert!((exact - rough).abs() < 1e-13, "{p} {q}: {exact} vs {rough}");
            }
        }
    }

    #[test]
    fn deep_points_stay_distinct() {
        let b = b30();
        let g = Geometry {
            frames: vec![Frame::line(b.clone(), 0.0, vec![1.0])],
        };
        let p = a("6.6.6.1");
        let q = a("6.6.6.w");
        let pp = Pt::tree(0, p.clone(), vec![node_diam(&b, &p)]);
        let qq = Pt::tree(0, q.clone(), vec![node_diam(&b, &q)]);
        let d = g.dist(&pp, &qq);
        let l = 18u64;
        let expected = b.b(l);
        assert!(d > 0.0);
        assert!(
            (d - expected).abs() <= 1e-12 * expected,
            "{d} vs {expected}"
        );
    }

    #[test]
    fn s_space_points() {
        let b = b30();
        let t = TreeSpec::alpha(OrdinalIndex::Fin(1));
        let s = realize_s_space(&t, &b, 2, 3, 0.0).unwrap();
        let x = |addr: &str| s.geometry.coords(s.pt_of(&Label::Addr(a(addr))).unwrap())[0];
        assert!(close(x("w"), 1.0 / 900.0));
        assert!(close(x("2"), 2.0 / 900.0));
        assert!(close(x("3"), b.b(1) + b.b(2)));
        assert!(close(s.error_bound, b.b(2)));
        assert!(verify_space_conditions(&s).pass());
    }

    #[test]
    fn single_point_space() {
        let b = b30();
        let t = crate::symbolic::tree_of_subset([a("w")]).unwrap();
        let s = realize_s_space(&t, &b, 3, 3, 0.0).unwrap();
        assert_eq!(s.len(), 1);
        assert!(close(s.geometry.coords(&s.points[0].pt)[0], b.b(1)));
        assert_eq!(s.error_bound, 0.0);
    }

    #[test]
    fn improper_builtins_are_rejected_but_finite_sets_are_not() {
        let b = b30();
        let t = crate::symbolic::tree_of_subset([a("2"), a("w")]).unwrap();
        assert!(realize_s_space(&t, &b, 3, 3, 0.0).is_ok());
    }

    #[test]
    fn error_bound_shrinks_with_truncation() {
        let b = b30();
        let t = TreeSpec::LambdaMax;
        let e = |d, n| truncation_error_bound(&t, &b, d, n);
        assert!(e(2, 3) >= e(3, 3));
        assert!(e(2, 3) >= e(2, 5));
        let finite = crate::symbolic::tree_of_subset([a("1"), a("2")]).unwrap();
        assert_eq!(truncation_error_bound(&finite, &b, 4, 4), 0.0);
    }

    #[test]
    fn perturbation_breaks_separation() {
        let b = b30();
        let t = TreeSpec::alpha(OrdinalIndex::Fin(1));
        let mut s = realize_s_space(&t, &b, 2, 4, 0.0).unwrap();
        let i = s.index_of_label(&Label::Addr(a("2"))).unwrap();
        s.perturb(i, &[b.b(0) / 2.0]);
        let r = verify_space_conditions(&s);
        assert!(!r.pass());
        assert!(r.failures.iter().all(|f| f.node.is_empty()));
    }

    #[test]
    fn snapping_follows_the_largest_child() {
        let b = b30();
        let s = realize_s_space(&TreeSpec::LambdaMax, &b, 2, 3, 0.0).unwrap();
        assert_eq!(s.snap_addr(&a("7.2")), a("w"));
        assert_eq!(s.snap_addr(&a("2.7.1")), a("2.w"));
        assert_eq!(s.snap_addr(&a("2.2.2.2")), a("2.2"));
        assert_eq!(s.snap_addr(&a("2")), a("2.w"));
        assert_eq!(s.snap(&Label::Cluster { k: 9, i: 1 }), Label::Addr(a("w")));
    }

    #[test]
    fn cluster_space_conditions() {
        let pair = pair_b_for_p(&p_for_order(2, 2), 4).unwrap();
        let t = TreeSpec::alpha(OrdinalIndex::Fin(1));
        let s = realize_bp_space(&t, &pair, 3, 4, 0.0).unwrap();
        assert_eq!(s.cluster_indices(3).len(), 16);
        let r = verify_space_conditions(&s);
        assert!(r.pass(), "{:?}", r.failures);
    }

    #[test]
    fn z_space_copies() {
        let b = b30();
        let t = TreeSpec::alpha(OrdinalIndex::Fin(1));
        let z = TemplateCloud::segment_grid(16);
        let s = realize_z_space(&t, &b, &z, 2, 3, 0.0).unwrap();
        assert_eq!(s.len(), 4 * 17);
        let r = verify_space_conditions(&s);
        assert!(r.pass(), "{:?}", r.failures);
        let top = s
            .pt_of(&Label::Copy {
                addr: a("2"),
                j: 16,
            })
            .unwrap();
        assert!(close(s.geometry.coords(top)[0], 2.0 / 900.0));
        assert!(close(s.error_bound, b.b(2).max((b.b(1) + b.b(2)) / 32.0)));
    }

    #[test]
    fn bad_templates() {
        let t = TemplateCloud {
            points: vec![vec![0.0], vec![0.0]],
            anchor_min: 0,
            anchor_max: 1,
            hausdorff_error: 0.0,
        };
        assert!(t.validate().is_err());
        let t = TemplateCloud {
            points: vec![vec![0.0], vec![1.0], vec![2.0]],
            anchor_min: 0,
            anchor_max: 1,
            hausdorff_error: 0.0,
        };
        assert!(t.validate().is_err());
    }
}
