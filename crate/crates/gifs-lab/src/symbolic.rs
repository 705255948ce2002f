//! Addresses, ordinal indices and symbolic trees.
//!
//! An address is a finite sequence over `ℕ≥1 ∪ {ω}` in which `ω` may only
//! appear last. Trees are subsets of addresses closed under prefixes; the
//! built-in families are evaluated lazily through a membership predicate so
//! that infinite trees can be truncated at any depth and width.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Bound;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("ω may only appear as the last entry of an address")]
    OmegaNotLast,
    #[error("address entries must be ≥ 1")]
    ZeroEntry,
    #[error("cannot append to {0}, which already ends in ω")]
    ConcatAfterOmega(Address),
    #[error("Fin(0) has no ladder")]
    NoLadder,
    #[error("{0} is not an interior node of the tree")]
    NotInterior(Address),
    #[error("{0} is not a child of an interior node")]
    NotAChild(Address),
    #[error("an empty address set does not define a tree")]
    EmptyTree,
    #[error("Cantor–Bendixson height is only known symbolically for Λ^α and Λ^(α,n)")]
    NoSymbolicHeight,
    #[error("boundary contains the truncated path {0}; ranks would be unsound")]
    TruncatedBoundary(Address),
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("cannot parse {0:?}")]
    Parse(String),
}

/// One letter of an address: a positive integer or `ω`.
///
/// The derived order places every integer below `ω`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Entry {
    Int(u32),
    Omega,
}

impl Entry {
    pub fn is_int(self) -> bool {
        matches!(self, Entry::Int(_))
    }

    pub fn as_int(self) -> Option<u32> {
        match self {
            Entry::Int(k) => Some(k),
            Entry::Omega => None,
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Int(k) => write!(f, "{k}"),
            Entry::Omega => write!(f, "w"),
        }
    }
}

impl FromStr for Entry {
    type Err = SymbolicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "w" | "ω" | "W" => Ok(Entry::Omega),
            t => match t.parse::<u32>() {
                Ok(0) => Err(SymbolicError::ZeroEntry),
                Ok(k) => Ok(Entry::Int(k)),
                Err(_) => Err(SymbolicError::Parse(s.to_string())),
            },
        }
    }
}

impl Serialize for Entry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Entry::Int(k) => s.serialize_u32(*k),
            Entry::Omega => s.serialize_str("w"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    N(u32),
    S(String),
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawEntry::deserialize(d)?;
        let parsed = match raw {
            RawEntry::N(k) => k.to_string().parse(),
            RawEntry::S(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// The weight of an address: the sum of its entries, absorbing into `ω`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Weight {
    Fin(u64),
    Omega,
}

/// A finite address; lexicographic order with `ω` above every integer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(Vec<Entry>);

impl Address {
    pub fn new(entries: Vec<Entry>) -> Result<Self, SymbolicError> {
        if let Some(pos) = entries.iter().position(|e| *e == Entry::Omega) {
            if pos + 1 != entries.len() {
                return Err(SymbolicError::OmegaNotLast);
            }
        }
        if entries.contains(&Entry::Int(0)) {
            return Err(SymbolicError::ZeroEntry);
        }
        Ok(Address(entries))
    }

    /// Builds an address from a slice already known to be well formed.
    pub fn from_slice(entries: &[Entry]) -> Self {
        debug_assert!(Address::new(entries.to_vec()).is_ok());
        Address(entries.to_vec())
    }

    pub fn root() -> Self {
        Address(Vec::new())
    }

    pub fn ints(ks: &[u32]) -> Self {
        Address::new(ks.iter().map(|&k| Entry::Int(k)).collect()).expect("positive entries")
    }

    pub fn omega() -> Self {
        Address(vec![Entry::Omega])
    }

    pub fn entries(&self) -> &[Entry] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<Entry> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Entry> {
        self.0.last().copied()
    }

    pub fn ends_with_omega(&self) -> bool {
        self.last() == Some(Entry::Omega)
    }

    /// The address without its first entry.
    pub fn tail(&self) -> Address {
        Address(self.0.iter().skip(1).copied().collect())
    }

    /// `[η]_k`, the prefix of length `min(k, |η|)`.
    pub fn prefix(&self, k: usize) -> Address {
        Address(self.0[..k.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Address) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn common_prefix_len(&self, other: &Address) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// `η⌢e`; panics if `η` already ends in `ω`.
    pub fn child(&self, e: Entry) -> Address {
        assert!(!self.ends_with_omega(), "cannot extend {self}");
        let mut v = self.0.clone();
        v.push(e);
        Address(v)
    }

    pub fn concat(&self, other: &Address) -> Result<Address, SymbolicError> {
        if self.ends_with_omega() && !other.is_empty() {
            return Err(SymbolicError::ConcatAfterOmega(self.clone()));
        }
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Ok(Address(v))
    }

    /// `k⌢η`.
    pub fn prepend(&self, e: Entry) -> Address {
        assert!(e.is_int() || self.is_empty(), "ω may only appear last");
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(e);
        v.extend_from_slice(&self.0);
        Address(v)
    }

    pub fn weight(&self) -> Weight {
        let mut total = 0u64;
        for e in &self.0 {
            match e {
                Entry::Int(k) => total += u64::from(*k),
                Entry::Omega => return Weight::Omega,
            }
        }
        Weight::Fin(total)
    }

    /// Weight of the integer entries only (`l(η̃)` for `η = η̃⌢ω`).
    pub fn int_weight(&self) -> u64 {
        self.0
            .iter()
            .filter_map(|e| e.as_int())
            .map(u64::from)
            .sum()
    }

    /// Dot-separated path form used in CSV files, e.g. `2.w`; the root is empty.
    pub fn to_path(&self) -> String {
        self.0
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }

    pub fn parse_path(s: &str) -> Result<Address, SymbolicError> {
        let s = s.trim();
        if s.is_empty() || s == "()" || s == "∅" {
            return Ok(Address::root());
        }
        let inner = s.trim_start_matches('(').trim_end_matches(')');
        let entries = inner
            .split(['.', ','])
            .map(str::parse)
            .collect::<Result<Vec<Entry>, _>>()?;
        Address::new(entries)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|e| match e {
                Entry::Int(k) => k.to_string(),
                Entry::Omega => "ω".to_string(),
            })
            .collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for Address {
    type Err = SymbolicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Address::parse_path(s)
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<Entry>::deserialize(d)?;
        Address::new(v).map_err(serde::de::Error::custom)
    }
}

/// A countable ordinal index below `ω + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OrdinalIndex {
    Fin(u32),
    Omega,
}

impl OrdinalIndex {
    /// The `n`-th element (`n ≥ 1`) of the fundamental sequence of `α`.
    pub fn ladder(self, n: u32) -> Result<OrdinalIndex, SymbolicError> {
        assert!(n >= 1, "ladder positions start at 1");
        match self {
            OrdinalIndex::Fin(0) => Err(SymbolicError::NoLadder),
            OrdinalIndex::Fin(k) => Ok(OrdinalIndex::Fin((n - 1).min(k - 1))),
            OrdinalIndex::Omega => Ok(OrdinalIndex::Fin(n - 1)),
        }
    }
}

impl fmt::Display for OrdinalIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrdinalIndex::Fin(k) => write!(f, "{k}"),
            OrdinalIndex::Omega => write!(f, "w"),
        }
    }
}

impl FromStr for OrdinalIndex {
    type Err = SymbolicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "w" | "ω" | "omega" => Ok(OrdinalIndex::Omega),
            t => t
                .parse::<u32>()
                .map(OrdinalIndex::Fin)
                .map_err(|_| SymbolicError::Parse(s.to_string())),
        }
    }
}

impl Serialize for OrdinalIndex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            OrdinalIndex::Fin(k) => s.serialize_u32(*k),
            OrdinalIndex::Omega => s.serialize_str("w"),
        }
    }
}

impl<'de> Deserialize<'de> for OrdinalIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match RawEntry::deserialize(d)? {
            RawEntry::N(k) => Ok(OrdinalIndex::Fin(k)),
            RawEntry::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A tree of addresses, described by a finite recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeSpec {
    /// Every address.
    LambdaMax,
    /// Addresses containing no entry equal to 1.
    LambdaS,
    /// Addresses containing at most one entry equal to 1.
    LambdaR,
    LambdaAlpha {
        alpha: OrdinalIndex,
    },
    LambdaAlphaN {
        alpha: OrdinalIndex,
        n: u32,
    },
    /// `{β : η⌢β ∈ base}`.
    SubtreeShift1 {
        base: Box<TreeSpec>,
        eta: Address,
    },
    /// `{i⌢β : η⌢(i+k−1)⌢β ∈ base} ∪ {∅, (ω)}`.
    SubtreeShift2 {
        base: Box<TreeSpec>,
        eta: Address,
        k: u32,
    },
    /// A finite prefix-closed set.
    FromAddressSet {
        addresses: BTreeSet<Address>,
    },
    /// `{∅, (ω)} ∪ ⋃_i i⌢T_i`, where `T_i` is the listed branch or `rest`.
    PrefixedUnion {
        branches: BTreeMap<u32, TreeSpec>,
        rest: Box<TreeSpec>,
    },
}

/// Where an address sits relative to a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    Absent,
    Leaf,
    Interior,
}

/// Whether a truncated boundary entry is a genuine leaf or stands in for an
/// interior node whose subtree was cut at the depth limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    TruncatedPath,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundaryAddress {
    pub addr: Address,
    pub exactness: Exactness,
}

impl BoundaryAddress {
    pub fn is_exact(&self) -> bool {
        self.exactness == Exactness::Exact
    }
}

fn max_contains(eta: &[Entry]) -> bool {
    eta.iter().rev().skip(1).all(|e| e.is_int())
}

fn alpha_contains(alpha: OrdinalIndex, eta: &[Entry]) -> bool {
    match eta.first() {
        None => true,
        Some(_) if alpha == OrdinalIndex::Fin(0) => false,
        Some(Entry::Omega) => eta.len() == 1,
        Some(Entry::Int(k)) => alpha_contains(alpha.ladder(*k).expect("nonzero"), &eta[1..]),
    }
}

fn alpha_n_contains(alpha: OrdinalIndex, n: u32, eta: &[Entry]) -> bool {
    if n <= 1 {
        return alpha_contains(alpha, eta);
    }
    match eta.first() {
        None => true,
        Some(Entry::Omega) => eta.len() == 1,
        Some(Entry::Int(i)) if *i < n => alpha_contains(alpha, &eta[1..]),
        // For α = 0 the tail union is empty: Λ^(0,n) has exactly n boundary points.
        Some(Entry::Int(_)) if alpha == OrdinalIndex::Fin(0) => false,
        Some(Entry::Int(i)) => alpha_contains(alpha.ladder(i - n + 1).expect("nonzero"), &eta[1..]),
    }
}

fn joined(pre: &Address, rest: &[Entry]) -> Option<Vec<Entry>> {
    if pre.ends_with_omega() && !rest.is_empty() {
        return None;
    }
    let mut v = pre.entries().to_vec();
    v.extend_from_slice(rest);
    Some(v)
}

fn shift2_global(pre: &Address, k: u32, local: &[Entry]) -> Option<Vec<Entry>> {
    match local.first() {
        Some(Entry::Int(i)) => {
            let mut v = pre.entries().to_vec();
            v.push(Entry::Int(i + k - 1));
            v.extend_from_slice(&local[1..]);
            Some(v)
        }
        _ => None,
    }
}

impl TreeSpec {
    pub fn alpha(alpha: OrdinalIndex) -> TreeSpec {
        TreeSpec::LambdaAlpha { alpha }
    }

    pub fn alpha_n(alpha: OrdinalIndex, n: u32) -> TreeSpec {
        TreeSpec::LambdaAlphaN { alpha, n }
    }

    pub fn contains(&self, eta: &[Entry]) -> bool {
        match self {
            TreeSpec::LambdaMax => max_contains(eta),
            TreeSpec::LambdaS => max_contains(eta) && !eta.contains(&Entry::Int(1)),
            TreeSpec::LambdaR => {
                max_contains(eta) && eta.iter().filter(|e| **e == Entry::Int(1)).count() <= 1
            }
            TreeSpec::LambdaAlpha { alpha } => alpha_contains(*alpha, eta),
            TreeSpec::LambdaAlphaN { alpha, n } => alpha_n_contains(*alpha, *n, eta),
            TreeSpec::SubtreeShift1 { base, eta: pre } => {
                joined(pre, eta).is_some_and(|v| base.contains(&v))
            }
            TreeSpec::SubtreeShift2 { base, eta: pre, k } => match eta.first() {
                None => true,
                Some(Entry::Omega) => eta.len() == 1,
                Some(Entry::Int(_)) => {
                    shift2_global(pre, *k, eta).is_some_and(|v| base.contains(&v))
                }
            },
            TreeSpec::FromAddressSet { addresses } => addresses.contains(&Address::from_slice(eta)),
            TreeSpec::PrefixedUnion { branches, rest } => match eta.first() {
                None => true,
                Some(Entry::Omega) => eta.len() == 1,
                Some(Entry::Int(i)) => branches.get(i).unwrap_or(rest).contains(&eta[1..]),
            },
        }
    }

    /// Whether `eta` (assumed to be in the tree) has at least one child.
    pub fn has_child(&self, eta: &[Entry]) -> bool {
        if eta.last() == Some(&Entry::Omega) && !matches!(self, TreeSpec::FromAddressSet { .. }) {
            // Built-in and derived trees never extend past ω.
            return false;
        }
        match self {
            TreeSpec::FromAddressSet { addresses } => {
                let key = Address::from_slice(eta);
                addresses
                    .range((Bound::Excluded(&key), Bound::Unbounded))
                    .next()
                    .is_some_and(|a| key.is_prefix_of(a))
            }
            TreeSpec::SubtreeShift1 { base, eta: pre } => {
                joined(pre, eta).is_some_and(|v| base.has_child(&v))
            }
            TreeSpec::SubtreeShift2 { base, eta: pre, k } => {
                if eta.is_empty() {
                    true
                } else {
                    shift2_global(pre, *k, eta).is_some_and(|v| base.has_child(&v))
                }
            }
            TreeSpec::PrefixedUnion { branches, rest } => match eta.first() {
                None => true,
                Some(Entry::Omega) => false,
                Some(Entry::Int(i)) => branches.get(i).unwrap_or(rest).has_child(&eta[1..]),
            },
            _ => {
                let mut v = eta.to_vec();
                v.push(Entry::Omega);
                if self.contains(&v) {
                    return true;
                }
                *v.last_mut().unwrap() = Entry::Int(1);
                self.contains(&v)
            }
        }
    }

    pub fn status(&self, eta: &Address) -> NodeStatus {
        if !self.contains(eta.entries()) {
            NodeStatus::Absent
        } else if self.has_child(eta.entries()) {
            NodeStatus::Interior
        } else {
            NodeStatus::Leaf
        }
    }

    /// Integer children `≤ width` followed by `ω`, restricted to the tree.
    pub fn children_within(&self, eta: &Address, width: u32) -> Vec<Entry> {
        if eta.ends_with_omega() {
            return Vec::new();
        }
        let mut v = eta.entries().to_vec();
        v.push(Entry::Omega);
        let mut out = Vec::new();
        for c in (1..=width)
            .map(Entry::Int)
            .chain(std::iter::once(Entry::Omega))
        {
            *v.last_mut().unwrap() = c;
            if self.contains(&v) {
                out.push(c);
            }
        }
        out
    }

    /// Whether some integer child larger than `width` exists.
    pub fn has_child_beyond(&self, eta: &Address, width: u32) -> bool {
        match self {
            TreeSpec::FromAddressSet { addresses } => addresses.iter().any(|a| {
                a.len() == eta.len() + 1
                    && eta.is_prefix_of(a)
                    && matches!(a.last(), Some(Entry::Int(k)) if k > width)
            }),
            _ => {
                if eta.ends_with_omega() {
                    return false;
                }
                let mut v = eta.entries().to_vec();
                v.push(Entry::Int(width + 1));
                self.contains(&v)
            }
        }
    }

    /// The largest child in the order `1 < 2 < … < ω`, if any.
    pub fn largest_child(&self, eta: &Address) -> Option<Entry> {
        if eta.ends_with_omega() {
            return None;
        }
        let mut v = eta.entries().to_vec();
        v.push(Entry::Omega);
        if self.contains(&v) {
            return Some(Entry::Omega);
        }
        match self {
            TreeSpec::FromAddressSet { addresses } => addresses
                .iter()
                .filter(|a| a.len() == eta.len() + 1 && eta.is_prefix_of(a))
                .filter_map(|a| a.last())
                .max(),
            _ => None,
        }
    }

    /// Whether the recipe is guaranteed to produce a proper tree.
    pub fn is_builtin_proper(&self) -> bool {
        match self {
            TreeSpec::LambdaMax => true,
            TreeSpec::LambdaS | TreeSpec::LambdaR => false,
            TreeSpec::LambdaAlpha { .. } => true,
            TreeSpec::LambdaAlphaN { alpha, n } => *n <= 1 || *alpha != OrdinalIndex::Fin(0),
            TreeSpec::SubtreeShift1 { base, .. } | TreeSpec::SubtreeShift2 { base, .. } => {
                base.is_builtin_proper()
            }
            TreeSpec::FromAddressSet { .. } => false,
            TreeSpec::PrefixedUnion { branches, rest } => {
                rest.is_builtin_proper() && branches.values().all(TreeSpec::is_builtin_proper)
            }
        }
    }
}

/// A finite window on a tree: addresses of length at most `depth` whose
/// integer entries are at most `width` and, optionally, whose integer weight
/// is at most `max_weight`.
///
/// The weight cap matters for hosts of self-maps that lower individual
/// entries while raising the total weight: a cap `≤ width` makes the window
/// closed under taking such preimages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Truncation {
    pub depth: u32,
    pub width: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_weight: Option<u32>,
}

impl Truncation {
    pub fn new(depth: u32, width: u32) -> Truncation {
        Truncation {
            depth,
            width,
            max_weight: None,
        }
    }

    pub fn weight_capped(depth: u32, width: u32, max_weight: u32) -> Truncation {
        Truncation {
            depth,
            width,
            max_weight: Some(max_weight),
        }
    }

    /// Largest integer child admitted below `node`.
    pub fn width_at(&self, node: &Address) -> u32 {
        match self.max_weight {
            None => self.width,
            Some(cap) => {
                let room = u64::from(cap).saturating_sub(node.int_weight());
                self.width.min(room.min(u64::from(u32::MAX)) as u32)
            }
        }
    }

    /// Whether the child `c` of `node` lies inside the window (ignoring depth).
    pub fn admits(&self, node: &Address, c: Entry) -> bool {
        match c {
            Entry::Int(k) => k <= self.width_at(node),
            Entry::Omega => true,
        }
    }
}

fn enumerate_rec(
    tree: &TreeSpec,
    node: &mut Vec<Entry>,
    trunc: &Truncation,
    out: &mut Vec<BoundaryAddress>,
) {
    let level = node.len() as u32;
    let here = Address::from_slice(node);
    let width = trunc.width_at(&here);
    let before = out.len();
    for c in (1..=width)
        .map(Entry::Int)
        .chain(std::iter::once(Entry::Omega))
    {
        node.push(c);
        if tree.contains(node) {
            if !tree.has_child(node) {
                out.push(BoundaryAddress {
                    addr: Address::from_slice(node),
                    exactness: Exactness::Exact,
                });
            } else if level + 1 >= trunc.depth {
                out.push(BoundaryAddress {
                    addr: Address::from_slice(node),
                    exactness: Exactness::TruncatedPath,
                });
            } else {
                enumerate_rec(tree, node, trunc, out);
            }
        }
        node.pop();
    }
    if out.len() == before {
        // Every child was cut: the node itself stands in for its subtree.
        out.push(BoundaryAddress {
            addr: here,
            exactness: Exactness::TruncatedPath,
        });
    }
}

/// Boundary of the depth-`depth`, width-`width` truncation of `tree`, in
/// lexicographic order (ω last among siblings).
///
/// Interior nodes reached at depth `depth` are reported as truncated paths;
/// children wider than `width` are dropped silently because their content lies
/// close to the sibling `ξ⌢ω`.
pub fn enumerate_boundary(
    tree: &TreeSpec,
    depth: u32,
    width: u32,
) -> Result<Vec<BoundaryAddress>, SymbolicError> {
    enumerate_truncation(tree, &Truncation::new(depth, width))
}

/// Boundary of an arbitrary truncation window.
pub fn enumerate_truncation(
    tree: &TreeSpec,
    trunc: &Truncation,
) -> Result<Vec<BoundaryAddress>, SymbolicError> {
    if trunc.depth == 0 {
        return Err(SymbolicError::ZeroDepth);
    }
    if !tree.has_child(&[]) {
        return Ok(vec![BoundaryAddress {
            addr: Address::root(),
            exactness: Exactness::Exact,
        }]);
    }
    let mut out = Vec::new();
    enumerate_rec(tree, &mut Vec::new(), trunc, &mut out);
    Ok(out)
}

/// Interior nodes of the truncation (depth `< depth`), in lexicographic order.
pub fn interior_nodes(tree: &TreeSpec, depth: u32, width: u32) -> Vec<Address> {
    interior_nodes_in(tree, &Truncation::new(depth, width))
}

/// Interior nodes of an arbitrary truncation window that still have children
/// inside the window.
pub fn interior_nodes_in(tree: &TreeSpec, trunc: &Truncation) -> Vec<Address> {
    fn rec(tree: &TreeSpec, node: &Address, trunc: &Truncation, out: &mut Vec<Address>) {
        if node.len() as u32 >= trunc.depth || !tree.has_child(node.entries()) {
            return;
        }
        let children = tree.children_within(node, trunc.width_at(node));
        if children.is_empty() {
            return;
        }
        out.push(node.clone());
        for c in children {
            rec(tree, &node.child(c), trunc, out);
        }
    }
    let mut out = Vec::new();
    if tree.contains(&[]) {
        rec(tree, &Address::root(), trunc, &mut out);
    }
    out
}

/// `Λ[η] = {β : η⌢β ∈ Λ}`; `η` must be interior.
pub fn subtree_shift1(tree: &TreeSpec, eta: &Address) -> Result<TreeSpec, SymbolicError> {
    if tree.status(eta) != NodeStatus::Interior {
        return Err(SymbolicError::NotInterior(eta.clone()));
    }
    if eta.is_empty() {
        return Ok(tree.clone());
    }
    Ok(match tree {
        TreeSpec::LambdaMax => TreeSpec::LambdaMax,
        TreeSpec::LambdaS => TreeSpec::LambdaS,
        TreeSpec::LambdaR if eta.entries().contains(&Entry::Int(1)) => TreeSpec::LambdaS,
        TreeSpec::LambdaR => TreeSpec::LambdaR,
        TreeSpec::LambdaAlpha { alpha } => {
            let mut a = *alpha;
            for e in eta.entries() {
                a = a.ladder(e.as_int().expect("interior nodes have integer entries"))?;
            }
            TreeSpec::LambdaAlpha { alpha: a }
        }
        _ => TreeSpec::SubtreeShift1 {
            base: Box::new(tree.clone()),
            eta: eta.clone(),
        },
    })
}

/// `{i⌢β : η⌢(i+k−1)⌢β ∈ Λ} ∪ {∅, (ω)}`; requires `η⌢k ∈ Λ`.
pub fn subtree_shift2(tree: &TreeSpec, eta: &Address, k: u32) -> Result<TreeSpec, SymbolicError> {
    if k == 0 || eta.ends_with_omega() || !tree.contains(eta.child(Entry::Int(k)).entries()) {
        return Err(SymbolicError::NotAChild(eta.clone()));
    }
    Ok(match tree {
        TreeSpec::LambdaMax => TreeSpec::LambdaMax,
        _ => TreeSpec::SubtreeShift2 {
            base: Box::new(tree.clone()),
            eta: eta.clone(),
            k,
        },
    })
}

/// The prefix closure of a finite address set.
pub fn tree_of_subset<I: IntoIterator<Item = Address>>(
    addresses: I,
) -> Result<TreeSpec, SymbolicError> {
    let mut set = BTreeSet::new();
    for a in addresses {
        for k in 0..=a.len() {
            set.insert(a.prefix(k));
        }
    }
    if set.is_empty() {
        return Err(SymbolicError::EmptyTree);
    }
    Ok(TreeSpec::FromAddressSet { addresses: set })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProperRule {
    /// A node ending in ω has children.
    OmegaHasChildren,
    /// An interior node misses a child.
    MissingChild,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProperViolation {
    pub node: Address,
    pub rule: ProperRule,
    pub missing: Option<Entry>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ProperReport {
    pub nodes_checked: usize,
    pub violations: Vec<ProperViolation>,
}

impl ProperReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the two properness rules on every node of the truncation.
pub fn check_proper(tree: &TreeSpec, depth: u32, width: u32) -> ProperReport {
    check_proper_in(tree, &Truncation::new(depth, width))
}

/// Checks the two properness rules on every node of a truncation window.
pub fn check_proper_in(tree: &TreeSpec, trunc: &Truncation) -> ProperReport {
    let mut report = ProperReport::default();
    if !tree.contains(&[]) {
        return report;
    }
    let mut stack = vec![Address::root()];
    while let Some(node) = stack.pop() {
        report.nodes_checked += 1;
        let interior = tree.has_child(node.entries());
        if node.ends_with_omega() {
            if interior {
                report.violations.push(ProperViolation {
                    node: node.clone(),
                    rule: ProperRule::OmegaHasChildren,
                    missing: None,
                });
            }
            continue;
        }
        if !interior || node.len() as u32 >= trunc.depth {
            continue;
        }
        let width = trunc.width_at(&node);
        let present = tree.children_within(&node, width);
        for c in (1..=width)
            .map(Entry::Int)
            .chain(std::iter::once(Entry::Omega))
        {
            if !present.contains(&c) {
                report.violations.push(ProperViolation {
                    node: node.clone(),
                    rule: ProperRule::MissingChild,
                    missing: Some(c),
                });
            }
        }
        for c in present {
            stack.push(node.child(c));
        }
    }
    report.violations.sort_by(|a, b| a.node.cmp(&b.node));
    report
}

/// Height and top-level cardinality of the boundary, read off the recipe.
pub fn cb_height_symbolic(tree: &TreeSpec) -> Result<(OrdinalIndex, u32), SymbolicError> {
    match tree {
        TreeSpec::LambdaAlpha { alpha } => Ok((*alpha, 1)),
        TreeSpec::LambdaAlphaN { alpha, n } => Ok((*alpha, (*n).max(1))),
        _ => Err(SymbolicError::NoSymbolicHeight),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum BasisKey {
    Node(Address),
    Tilde(Address, u32),
}

/// Cantor–Bendixson ranks of the finite subspace spanned by a fully exact
/// boundary, computed by iterated removal of isolated points.
///
/// The basis consists of the clopen sets `X_ξ` and `X̃_ξ` for nodes `ξ` of the
/// prefix closure of the boundary, so ranks are exact relative to that finite
/// subspace. They agree with the ideal ranks when every node of the
/// truncation keeps enough children for its own subtree height.
pub fn cb_rank_bruteforce(
    boundary: &[BoundaryAddress],
    tree: &TreeSpec,
) -> Result<BTreeMap<Address, u32>, SymbolicError> {
    if let Some(b) = boundary.iter().find(|b| !b.is_exact()) {
        return Err(SymbolicError::TruncatedBoundary(b.addr.clone()));
    }
    let prefix_tree = tree_of_subset(boundary.iter().map(|b| b.addr.clone()))?;
    let TreeSpec::FromAddressSet { addresses: nodes } = &prefix_tree else {
        unreachable!()
    };
    let mut int_children: HashMap<Address, Vec<u32>> = HashMap::new();
    for a in nodes {
        if let Some(Entry::Int(k)) = a.last() {
            int_children
                .entry(a.prefix(a.len() - 1))
                .or_default()
                .push(k);
        }
    }
    let memberships: Vec<Vec<BasisKey>> = boundary
        .iter()
        .map(|b| {
            let eta = &b.addr;
            let mut keys = Vec::new();
            for p in 0..=eta.len() {
                let xi = eta.prefix(p);
                if !xi.ends_with_omega() {
                    keys.push(BasisKey::Node(xi.clone()));
                }
                if p < eta.len() {
                    let next = eta.entries()[p];
                    for &k in int_children.get(&xi).map(Vec::as_slice).unwrap_or(&[]) {
                        if next >= Entry::Int(k) {
                            keys.push(BasisKey::Tilde(xi.clone(), k));
                        }
                    }
                    // A node with finitely many children in the full tree
                    // leaves `{x_(ξ⌢ω)}` itself open.
                    if next == Entry::Omega {
                        let top = int_children
                            .get(&xi)
                            .and_then(|ks| ks.iter().max())
                            .copied()
                            .unwrap_or(0);
                        if !tree.has_child_beyond(&xi, top) {
                            keys.push(BasisKey::Tilde(xi.clone(), top + 1));
                        }
                    }
                }
            }
            keys
        })
        .collect();
    let mut ranks = BTreeMap::new();
    let mut alive: Vec<usize> = (0..boundary.len()).collect();
    let mut stage = 0u32;
    while !alive.is_empty() {
        let mut counts: HashMap<&BasisKey, usize> = HashMap::new();
        for &i in &alive {
            for key in &memberships[i] {
                *counts.entry(key).or_default() += 1;
            }
        }
        let (isolated, rest): (Vec<usize>, Vec<usize>) = alive
            .iter()
            .partition(|&&i| memberships[i].iter().any(|k| counts[k] == 1));
        let removed = if isolated.is_empty() {
            rest.clone()
        } else {
            isolated
        };
        for i in removed.iter() {
            ranks.insert(boundary[*i].addr.clone(), stage);
        }
        alive = if removed.len() == alive.len() {
            Vec::new()
        } else {
            alive.into_iter().filter(|i| !removed.contains(i)).collect()
        };
        stage += 1;
    }
    Ok(ranks)
}

/// Maximum rank and the number of points attaining it.
pub fn rank_summary(ranks: &BTreeMap<Address, u32>) -> (u32, usize) {
    let top = ranks.values().copied().max().unwrap_or(0);
    (top, ranks.values().filter(|&&r| r == top).count())
}

/// Whether two trees agree on the given truncation.
pub fn same_truncation(a: &TreeSpec, b: &TreeSpec, depth: u32, width: u32) -> bool {
    enumerate_boundary(a, depth, width).ok() == enumerate_boundary(b, depth, width).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> Address {
        s.parse().unwrap()
    }

    fn exact(s: &str) -> BoundaryAddress {
        BoundaryAddress {
            addr: a(s),
            exactness: Exactness::Exact,
        }
    }

    fn cut(s: &str) -> BoundaryAddress {
        BoundaryAddress {
            addr: a(s),
            exactness: Exactness::TruncatedPath,
        }
    }

    #[test]
    fn omega_sorts_last_and_only_last() {
        assert!(Entry::Int(1_000_000) < Entry::Omega);
        assert!(a("3") < a("w"));
        assert!(a("3") < a("3.1"));
        assert_eq!(
            Address::new(vec![Entry::Omega, Entry::Int(1)]),
            Err(SymbolicError::OmegaNotLast)
        );
        assert_eq!(
            Address::new(vec![Entry::Int(0)]),
            Err(SymbolicError::ZeroEntry)
        );
    }

    #[test]
    fn weight_absorbs_omega() {
        assert_eq!(a("2.3").weight(), Weight::Fin(5));
        assert_eq!(a("2.w").weight(), Weight::Omega);
        assert_eq!(a("2.w").int_weight(), 2);
        assert_eq!(Address::root().weight(), Weight::Fin(0));
    }

    #[test]
    fn concat_after_omega_is_an_error() {
        assert!(a("w").concat(&a("1")).is_err());
        assert_eq!(a("2").concat(&a("w")).unwrap(), a("2.w"));
    }

    #[test]
    fn path_and_json_roundtrip() {
        let x = a("2.w");
        assert_eq!(x.to_path(), "2.w");
        assert_eq!(serde_json::to_string(&x).unwrap(), r#"[2,"w"]"#);
        let back: Address = serde_json::from_str(r#"[2,"w"]"#).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<Address>(r#"["w",2]"#).is_err());
    }

    #[test]
    fn ladder_values() {
        use OrdinalIndex::*;
        assert_eq!(Fin(3).ladder(1), Ok(Fin(0)));
        assert_eq!(Fin(3).ladder(2), Ok(Fin(1)));
        assert_eq!(Fin(3).ladder(7), Ok(Fin(2)));
        assert_eq!(Omega.ladder(5), Ok(Fin(4)));
        assert_eq!(Fin(0).ladder(1), Err(SymbolicError::NoLadder));
    }

    #[test]
    fn boundary_of_lambda_one() {
        let t = TreeSpec::alpha(OrdinalIndex::Fin(1));
        let got = enumerate_boundary(&t, 2, 3).unwrap();
        assert_eq!(got, vec![exact("1"), exact("2"), exact("3"), exact("w")]);
    }

    #[test]
    fn boundary_of_lambda_max_marks_depth_cuts() {
        let got = enumerate_boundary(&TreeSpec::LambdaMax, 1, 2).unwrap();
        assert_eq!(got, vec![cut("1"), cut("2"), exact("w")]);
    }

    #[test]
    fn boundary_of_finite_set() {
        let t = tree_of_subset([a("w"), a("2")]).unwrap();
        assert_eq!(
            enumerate_boundary(&t, 5, 5).unwrap(),
            vec![exact("2"), exact("w")]
        );
        assert!(tree_of_subset(Vec::<Address>::new()).is_err());
    }

    #[test]
    fn lambda_zero_is_a_single_point() {
        let t = TreeSpec::alpha(OrdinalIndex::Fin(0));
        assert_eq!(enumerate_boundary(&t, 3, 3).unwrap(), vec![exact("")]);
    }

    #[test]
    fn lambda_alpha_children_follow_the_ladder() {
        let t = TreeSpec::alpha(OrdinalIndex::Omega);
        assert_eq!(t.status(&a("1")), NodeStatus::Leaf);
        assert_eq!(t.status(&a("2")), NodeStatus::Interior);
        assert_eq!(t.status(&a("2.1")), NodeStatus::Leaf);
        assert_eq!(t.status(&a("2.2")), NodeStatus::Leaf);
        assert_eq!(t.status(&a("2.2.1")), NodeStatus::Absent);
        assert_eq!(t.status(&a("3.2.w")), NodeStatus::Leaf);
    }

    #[test]
    fn lambda_alpha_n_branches() {
        let t = TreeSpec::alpha_n(OrdinalIndex::Fin(2), 3);
        // i < n carries Λ^2, i ≥ n carries Λ^(2_{i-n+1}).
        assert_eq!(t.status(&a("2.3")), NodeStatus::Interior);
        assert_eq!(t.status(&a("3")), NodeStatus::Leaf);
        assert_eq!(t.status(&a("4")), NodeStatus::Interior);
        assert_eq!(t.status(&a("4.2")), NodeStatus::Leaf);
    }

    #[test]
    fn shift1_simplifies_builtins() {
        let m = subtree_shift1(&TreeSpec::LambdaMax, &a("3.2")).unwrap();
        assert_eq!(m, TreeSpec::LambdaMax);
        let w = subtree_shift1(&TreeSpec::alpha(OrdinalIndex::Omega), &a("4")).unwrap();
        assert_eq!(w, TreeSpec::alpha(OrdinalIndex::Fin(3)));
        assert!(subtree_shift1(&TreeSpec::LambdaMax, &a("w")).is_err());
        let r = subtree_shift1(&TreeSpec::LambdaR, &a("1.2")).unwrap();
        assert_eq!(r, TreeSpec::LambdaS);
    }

    #[test]
    fn shift2_of_lambda_max_is_lambda_max() {
        let s = subtree_shift2(&TreeSpec::LambdaMax, &Address::root(), 3).unwrap();
        assert!(same_truncation(&s, &TreeSpec::LambdaMax, 3, 4));
        let general = TreeSpec::SubtreeShift2 {
            base: Box::new(TreeSpec::LambdaMax),
            eta: Address::root(),
            k: 3,
        };
        assert!(same_truncation(&general, &TreeSpec::LambdaMax, 3, 4));
    }

    #[test]
    fn shift2_reindexes_children() {
        let base = TreeSpec::alpha(OrdinalIndex::Omega);
        let s = subtree_shift2(&base, &Address::root(), 2).unwrap();
        // local child 1 is global child 2, whose subtree is Λ^1.
        assert_eq!(s.status(&a("1")), NodeStatus::Interior);
        assert_eq!(s.status(&a("1.1")), NodeStatus::Leaf);
        assert_eq!(s.status(&a("1.2.1")), NodeStatus::Absent);
    }

    #[test]
    fn proper_checks() {
        assert!(check_proper(&TreeSpec::LambdaMax, 3, 3).pass());
        assert!(check_proper(&TreeSpec::alpha(OrdinalIndex::Omega), 4, 4).pass());
        let t = tree_of_subset([a("w"), a("2")]).unwrap();
        let r = check_proper(&t, 3, 3);
        assert!(r
            .violations
            .iter()
            .any(|v| v.node.is_empty() && v.missing == Some(Entry::Int(1))));
    }

    #[test]
    fn ranks_of_lambda_one() {
        let t = TreeSpec::alpha(OrdinalIndex::Fin(1));
        let b = enumerate_boundary(&t, 2, 4).unwrap();
        let r = cb_rank_bruteforce(&b, &t).unwrap();
        assert_eq!(r[&a("w")], 1);
        for k in 1..=4 {
            assert_eq!(r[&Address::ints(&[k])], 0);
        }
    }

    #[test]
    fn ranks_reject_truncated_paths() {
        let b = enumerate_boundary(&TreeSpec::LambdaMax, 1, 2).unwrap();
        assert!(cb_rank_bruteforce(&b, &TreeSpec::LambdaMax).is_err());
    }

    #[test]
    fn symbolic_height() {
        let t = TreeSpec::alpha_n(OrdinalIndex::Fin(2), 3);
        assert_eq!(cb_height_symbolic(&t), Ok((OrdinalIndex::Fin(2), 3)));
        assert!(cb_height_symbolic(&TreeSpec::LambdaMax).is_err());
    }

    #[test]
    fn interior_nodes_of_lambda_two() {
        let t = TreeSpec::alpha(OrdinalIndex::Fin(2));
        let nodes = interior_nodes(&t, 3, 3);
        assert_eq!(nodes, vec![a(""), a("2"), a("3")]);
    }
}
