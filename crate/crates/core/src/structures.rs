//! Lazily generated countable homogeneous structures.
//!
//! Four kinds are supported: the pure set, the random graph, the dense linear
//! order and the equivalence relation with infinitely many infinite classes.
//! In each of them every finite partial isomorphism is elementary, and every
//! quantifier-free one-point type over a finite base can be realized by a
//! fresh point. Those two facts stand in for saturation throughout the crate.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::ops::Bound;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automorphisms::{PairMap, PartialAutomorphism};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(pub u32);

impl PointId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StructureKind {
    #[serde(rename = "set")]
    PureSet,
    #[serde(rename = "graph")]
    RandomGraph,
    #[serde(rename = "dlo")]
    Dlo,
    #[serde(rename = "eqrel")]
    EqClasses,
}

impl StructureKind {
    pub const ALL: [StructureKind; 4] = [
        StructureKind::PureSet,
        StructureKind::RandomGraph,
        StructureKind::Dlo,
        StructureKind::EqClasses,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StructureKind::PureSet => "set",
            StructureKind::RandomGraph => "graph",
            StructureKind::Dlo => "dlo",
            StructureKind::EqClasses => "eqrel",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("unknown point {0}")]
    UnknownPoint(PointId),
    #[error("type base mentions unknown point {0}")]
    UnknownBasePoint(PointId),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("point {0} belongs to the base it is typed over")]
    PointInBase(PointId),
    #[error("map is not defined on base point {0}")]
    MapNotDefinedOnBase(PointId),
    #[error("spread length must be at least 1")]
    EmptySpread,
    #[error("malformed structure data: {0}")]
    Malformed(String),
}

/// Class constraint of a one-point type in an equivalence structure.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ClassSpec {
    /// Member of an existing class.
    Tag(u32),
    /// Member of a class that meets no base point (realized as a brand new class).
    Fresh,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    Empty,
    /// Adjacency to each base point, in base order.
    Adjacency(Vec<bool>),
    /// Number of base points lying below the new point.
    Cut(usize),
    Class(ClassSpec),
}

/// Quantifier-free type of one new point over an ordered base.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QfType {
    pub base: Vec<PointId>,
    pub constraint: Constraint,
}

impl QfType {
    pub fn new(base: Vec<PointId>, constraint: Constraint) -> Self {
        QfType { base, constraint }
    }

    /// The canonical "plain" type over `base` for `kind`: no edges, top of the
    /// order, a class of its own.
    pub fn plain(kind: StructureKind, base: Vec<PointId>) -> Self {
        let constraint = match kind {
            StructureKind::PureSet => Constraint::Empty,
            StructureKind::RandomGraph => Constraint::Adjacency(vec![false; base.len()]),
            StructureKind::Dlo => Constraint::Cut(base.len()),
            StructureKind::EqClasses => Constraint::Class(ClassSpec::Fresh),
        };
        QfType { base, constraint }
    }

    /// Transports the type along `f`, which must be a partial isomorphism
    /// defined on every base point.
    pub fn map_through(
        &self,
        s: &Structure,
        f: impl Fn(PointId) -> Option<PointId>,
    ) -> Result<QfType, StructureError> {
        let base = self
            .base
            .iter()
            .map(|&b| f(b).ok_or(StructureError::MapNotDefinedOnBase(b)))
            .collect::<Result<Vec<_>, _>>()?;
        let constraint = match &self.constraint {
            Constraint::Class(ClassSpec::Tag(c)) => {
                let witness = self
                    .base
                    .iter()
                    .position(|&b| s.class_of(b) == Some(*c));
                match witness {
                    Some(j) => Constraint::Class(ClassSpec::Tag(
                        s.class_of(base[j])
                            .ok_or(StructureError::UnknownPoint(base[j]))?,
                    )),
                    None => Constraint::Class(ClassSpec::Fresh),
                }
            }
            other => other.clone(),
        };
        Ok(QfType { base, constraint })
    }
}

/// A finite stand-in for an indiscernible sequence over `base`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpreadSequence {
    pub base: BTreeSet<PointId>,
    pub members: Vec<PointId>,
    pub one_type: QfType,
}

const KEY_BASE: u32 = 1 << 16;

/// Key strictly between `lo` and `hi` in the dense order of digit strings
/// without trailing zeros. `None` stands for the corresponding infinity.
fn key_between(lo: Option<&[u32]>, hi: Option<&[u32]>) -> Vec<u32> {
    if hi.is_none() {
        let lo = lo.unwrap_or(&[]);
        for (i, &d) in lo.iter().enumerate() {
            if d + 1 < KEY_BASE {
                let mut key = lo[..i].to_vec();
                key.push(d + 1);
                return key;
            }
        }
        let mut key = lo.to_vec();
        key.push(1);
        return key;
    }
    let lo = lo.unwrap_or(&[]);
    let hi = hi.unwrap();
    let mut key = Vec::new();
    let mut hi_bound = true;
    for i in 0.. {
        let l = lo.get(i).copied().unwrap_or(0);
        let h = if hi_bound {
            hi.get(i).copied().unwrap_or(0)
        } else {
            KEY_BASE
        };
        debug_assert!(l <= h, "key_between called with lo >= hi");
        if h - l > 1 {
            key.push(l + (h - l) / 2);
            return key;
        }
        key.push(l);
        if h == l + 1 {
            hi_bound = false;
        }
    }
    unreachable!()
}

/// One countable homogeneous structure, grown one point at a time.
#[derive(Clone, Debug)]
pub struct Structure {
    kind: StructureKind,
    seed: u64,
    next_id: u32,
    adjacency: Vec<BTreeSet<PointId>>,
    order_key: Vec<Vec<u32>>,
    order: BTreeMap<Vec<u32>, PointId>,
    class: Vec<u32>,
    class_members: Vec<Vec<PointId>>,
}

/// Where a new point goes, relative to concrete existing points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Placement {
    Plain,
    Neighbors(Vec<PointId>),
    /// Strictly above the first and strictly below the second.
    Between(Option<PointId>, Option<PointId>),
    InClass(u32),
    FreshClass,
}

impl Structure {
    pub fn new(kind: StructureKind, seed: u64) -> Self {
        Structure {
            kind,
            seed,
            next_id: 0,
            adjacency: Vec::new(),
            order_key: Vec::new(),
            order: BTreeMap::new(),
            class: Vec::new(),
            class_members: Vec::new(),
        }
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.next_id as usize
    }

    pub fn is_empty(&self) -> bool {
        self.next_id == 0
    }

    pub fn contains(&self, p: PointId) -> bool {
        p.0 < self.next_id
    }

    pub fn points(&self) -> impl Iterator<Item = PointId> + '_ {
        (0..self.next_id).map(PointId)
    }

    fn check(&self, p: PointId) -> Result<(), StructureError> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(StructureError::UnknownPoint(p))
        }
    }

    pub fn adjacent(&self, a: PointId, b: PointId) -> bool {
        self.adjacency
            .get(a.index())
            .is_some_and(|n| n.contains(&b))
    }

    pub fn neighbors(&self, p: PointId) -> impl Iterator<Item = PointId> + '_ {
        self.adjacency.get(p.index()).into_iter().flatten().copied()
    }

    /// All edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(PointId, PointId)> {
        let mut out = Vec::new();
        for (a, ns) in self.adjacency.iter().enumerate() {
            let a = PointId(a as u32);
            out.extend(ns.range(a..).filter(|&&b| b != a).map(|&b| (a, b)));
        }
        out
    }

    /// Points in increasing order (dense linear orders only).
    pub fn order_list(&self) -> Vec<PointId> {
        self.order.values().copied().collect()
    }

    pub fn compare(&self, a: PointId, b: PointId) -> Ordering {
        match self.kind {
            StructureKind::Dlo => self.order_key[a.index()].cmp(&self.order_key[b.index()]),
            _ => a.cmp(&b),
        }
    }

    pub fn less(&self, a: PointId, b: PointId) -> bool {
        self.kind == StructureKind::Dlo && self.compare(a, b) == Ordering::Less
    }

    pub fn class_of(&self, p: PointId) -> Option<u32> {
        self.class.get(p.index()).copied()
    }

    pub fn class_count(&self) -> u32 {
        self.class_members.len() as u32
    }

    pub fn class_members(&self, c: u32) -> &[PointId] {
        self.class_members
            .get(c as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Per-point class tags, indexed by point id.
    pub fn classes(&self) -> &[u32] {
        &self.class
    }

    fn alloc(&mut self) -> PointId {
        let p = PointId(self.next_id);
        self.next_id += 1;
        if self.kind == StructureKind::RandomGraph {
            self.adjacency.push(BTreeSet::new());
        }
        p
    }

    pub(crate) fn realize(&mut self, placement: &Placement) -> PointId {
        match (self.kind, placement) {
            (StructureKind::PureSet, _) => self.alloc(),
            (StructureKind::RandomGraph, Placement::Neighbors(ns)) => {
                let p = self.alloc();
                for &n in ns {
                    self.adjacency[p.index()].insert(n);
                    self.adjacency[n.index()].insert(p);
                }
                p
            }
            (StructureKind::RandomGraph, _) => self.alloc(),
            (StructureKind::Dlo, Placement::Between(lo, hi)) => {
                let key = match hi {
                    Some(hi) => {
                        let hi_key = self.order_key[hi.index()].clone();
                        let below = self
                            .order
                            .range(..hi_key.clone())
                            .next_back()
                            .map(|(k, _)| k.clone());
                        if let (Some(lo), Some(b)) = (lo, &below) {
                            debug_assert!(self.order_key[lo.index()] <= *b);
                        }
                        key_between(below.as_deref(), Some(&hi_key))
                    }
                    None => {
                        let top = self.order.keys().next_back().cloned();
                        key_between(top.as_deref(), None)
                    }
                };
                self.insert_with_key(key)
            }
            (StructureKind::Dlo, _) => self.realize(&Placement::Between(None, None)),
            (StructureKind::EqClasses, Placement::InClass(c)) => {
                let p = self.alloc();
                self.class.push(*c);
                self.class_members[*c as usize].push(p);
                p
            }
            (StructureKind::EqClasses, _) => {
                let p = self.alloc();
                let c = self.class_members.len() as u32;
                self.class.push(c);
                self.class_members.push(vec![p]);
                p
            }
        }
    }

    fn insert_with_key(&mut self, key: Vec<u32>) -> PointId {
        let p = self.alloc();
        self.order.insert(key.clone(), p);
        self.order_key.push(key);
        p
    }

    fn validate_type(&self, t: &QfType) -> Result<(), StructureError> {
        let mut seen = BTreeSet::new();
        for &b in &t.base {
            if !self.contains(b) {
                return Err(StructureError::UnknownBasePoint(b));
            }
            if !seen.insert(b) {
                return Err(StructureError::InvalidConstraint(format!(
                    "base point {b} repeated"
                )));
            }
        }
        match (self.kind, &t.constraint) {
            (StructureKind::PureSet, Constraint::Empty) => Ok(()),
            (StructureKind::RandomGraph, Constraint::Adjacency(v)) if v.len() == t.base.len() => {
                Ok(())
            }
            (StructureKind::RandomGraph, Constraint::Adjacency(v)) => {
                Err(StructureError::InvalidConstraint(format!(
                    "adjacency vector has length {} over a base of {}",
                    v.len(),
                    t.base.len()
                )))
            }
            (StructureKind::Dlo, Constraint::Cut(k)) if *k <= t.base.len() => Ok(()),
            (StructureKind::Dlo, Constraint::Cut(k)) => Err(StructureError::InvalidConstraint(
                format!("cut {k} over a base of {}", t.base.len()),
            )),
            (StructureKind::EqClasses, Constraint::Class(ClassSpec::Fresh)) => Ok(()),
            (StructureKind::EqClasses, Constraint::Class(ClassSpec::Tag(c)))
                if *c < self.class_count() =>
            {
                Ok(())
            }
            (StructureKind::EqClasses, Constraint::Class(ClassSpec::Tag(c))) => Err(
                StructureError::InvalidConstraint(format!("class {c} does not exist")),
            ),
            (kind, c) => Err(StructureError::InvalidConstraint(format!(
                "{c:?} is not a constraint for {kind}"
            ))),
        }
    }

    fn placement_for(&self, t: &QfType) -> Placement {
        match &t.constraint {
            Constraint::Empty => Placement::Plain,
            Constraint::Adjacency(v) => Placement::Neighbors(
                t.base
                    .iter()
                    .zip(v)
                    .filter(|(_, &adj)| adj)
                    .map(|(&b, _)| b)
                    .collect(),
            ),
            Constraint::Cut(k) => {
                let mut sorted = t.base.clone();
                sorted.sort_by(|a, b| self.compare(*a, *b));
                let lo = if *k == 0 { None } else { Some(sorted[k - 1]) };
                Placement::Between(lo, sorted.get(*k).copied())
            }
            Constraint::Class(ClassSpec::Tag(c)) => Placement::InClass(*c),
            Constraint::Class(ClassSpec::Fresh) => Placement::FreshClass,
        }
    }

    /// Adds a fresh point realizing `t`. Relations to points outside the base
    /// take their default (no edge, own class, directly below the upper cut).
    pub fn create_point(&mut self, t: &QfType) -> Result<PointId, StructureError> {
        self.validate_type(t)?;
        let placement = self.placement_for(t);
        Ok(self.realize(&placement))
    }

    pub fn qf_type_of(&self, p: PointId, base: &[PointId]) -> Result<QfType, StructureError> {
        self.check(p)?;
        for &b in base {
            self.check(b)?;
            if b == p {
                return Err(StructureError::PointInBase(p));
            }
        }
        let constraint = match self.kind {
            StructureKind::PureSet => Constraint::Empty,
            StructureKind::RandomGraph => {
                Constraint::Adjacency(base.iter().map(|&b| self.adjacent(p, b)).collect())
            }
            StructureKind::Dlo => Constraint::Cut(base.iter().filter(|&&b| self.less(b, p)).count()),
            StructureKind::EqClasses => {
                let c = self.class[p.index()];
                if base.iter().any(|&b| self.class[b.index()] == c) {
                    Constraint::Class(ClassSpec::Tag(c))
                } else {
                    Constraint::Class(ClassSpec::Fresh)
                }
            }
        };
        Ok(QfType::new(base.to_vec(), constraint))
    }

    /// Creates `n` fresh points, each realizing `t` over `t.base`, in the plain
    /// internal pattern of the kind.
    pub fn create_spread(&mut self, t: &QfType, n: usize) -> Result<SpreadSequence, StructureError> {
        if n == 0 {
            return Err(StructureError::EmptySpread);
        }
        self.validate_type(t)?;
        if n > 1 && matches!(t.constraint, Constraint::Class(ClassSpec::Tag(_))) {
            return Err(StructureError::InvalidConstraint(
                "spread members must lie in pairwise distinct classes".into(),
            ));
        }
        let placement = self.placement_for(t);
        let members = (0..n).map(|_| self.realize(&placement)).collect();
        Ok(SpreadSequence {
            base: t.base.iter().copied().collect(),
            members,
            one_type: t.clone(),
        })
    }

    /// Realizes, over the `base_map`-image of `src.base`, a fresh copy of
    /// `src` whose members avoid `avoid`.
    pub fn realize_image_spread(
        &mut self,
        src: &SpreadSequence,
        base_map: &PartialAutomorphism,
        avoid: &BTreeSet<PointId>,
    ) -> Result<SpreadSequence, StructureError> {
        for &b in &src.base {
            if base_map.get(b).is_none() {
                return Err(StructureError::MapNotDefinedOnBase(b));
            }
        }
        let base: Vec<PointId> = src.base.iter().copied().collect();
        let one_type = src.one_type.map_through(self, |p| base_map.get(p))?;
        let mut extended = base.clone();
        let mut images: BTreeMap<PointId, PointId> = BTreeMap::new();
        let mut members = Vec::with_capacity(src.members.len());
        for &m in &src.members {
            let t = self.qf_type_of(m, &extended)?;
            let image = t.map_through(self, |p| {
                base_map.get(p).or_else(|| images.get(&p).copied())
            })?;
            let q = self.create_point(&image)?;
            debug_assert!(!avoid.contains(&q) && !src.members.contains(&q));
            images.insert(m, q);
            extended.push(m);
            members.push(q);
        }
        Ok(SpreadSequence {
            base: base.iter().filter_map(|&b| base_map.get(b)).collect(),
            members,
            one_type,
        })
    }

    /// Checks that the spread invariants hold in the current structure.
    pub fn is_valid_spread(&self, sp: &SpreadSequence) -> bool {
        let base: Vec<PointId> = sp.base.iter().copied().collect();
        let distinct: BTreeSet<_> = sp.members.iter().collect();
        if distinct.len() != sp.members.len() || sp.members.iter().any(|m| sp.base.contains(m)) {
            return false;
        }
        let mut types = sp.members.iter().map(|&m| self.qf_type_of(m, &base));
        let first = match types.next() {
            Some(Ok(t)) => t,
            _ => return false,
        };
        if !types.all(|t| t.as_ref() == Ok(&first)) {
            return false;
        }
        let m = &sp.members;
        match self.kind {
            StructureKind::PureSet => true,
            StructureKind::RandomGraph => m
                .iter()
                .enumerate()
                .all(|(i, &a)| m[i + 1..].iter().all(|&b| !self.adjacent(a, b))),
            StructureKind::Dlo => m.windows(2).all(|w| self.less(w[0], w[1])),
            StructureKind::EqClasses => {
                let classes: BTreeSet<_> = m.iter().map(|&p| self.class[p.index()]).collect();
                classes.len() == m.len()
            }
        }
    }

    /// Whether adding `(x, y)` to `g` keeps it relation-preserving, assuming
    /// `g` already is. Injectivity is not checked here.
    pub(crate) fn pair_compatible(&self, x: PointId, y: PointId, g: &impl PairMap) -> bool {
        match self.kind {
            StructureKind::PureSet => true,
            StructureKind::RandomGraph => {
                let forward = self.neighbors(x).all(|a| match g.image(a) {
                    Some(b) => self.adjacent(y, b) || (a == x && b == y),
                    None => true,
                });
                let backward = self.neighbors(y).all(|b| match g.preimage(b) {
                    Some(a) => self.adjacent(x, a),
                    None => true,
                });
                forward && backward
            }
            StructureKind::Dlo => {
                let (lo, hi) = self.nearest_in(x, g.sources());
                lo.is_none_or(|a| self.less(g.image(a).unwrap(), y))
                    && hi.is_none_or(|a| self.less(y, g.image(a).unwrap()))
            }
            StructureKind::EqClasses => {
                let cx = self.class[x.index()];
                let cy = self.class[y.index()];
                let same_x = self.class_members[cx as usize]
                    .iter()
                    .find_map(|&a| g.image(a));
                match same_x {
                    Some(b) => self.class[b.index()] == cy,
                    None => !self.class_members[cy as usize]
                        .iter()
                        .any(|&b| g.preimage(b).is_some()),
                }
            }
        }
    }

    /// An existing point outside `ran(g)` that `p` may be sent to.
    pub(crate) fn find_compatible(&self, p: PointId, g: &impl PairMap) -> Option<PointId> {
        match self.kind {
            StructureKind::Dlo => {
                // a compatible image lies strictly between the images of the
                // nearest domain points around `p`
                let (lo, hi) = self.nearest_in(p, g.sources());
                let lo_key = lo.and_then(|a| g.image(a)).map(|b| &self.order_key[b.index()]);
                let hi_key = hi.and_then(|a| g.image(a)).map(|b| &self.order_key[b.index()]);
                let lower = lo_key.map_or(Bound::Unbounded, |k| Bound::Excluded(k.clone()));
                let upper = hi_key.map_or(Bound::Unbounded, |k| Bound::Excluded(k.clone()));
                if let (Bound::Excluded(l), Bound::Excluded(u)) = (&lower, &upper) {
                    if l >= u {
                        return None;
                    }
                }
                self.order
                    .range((lower, upper))
                    .map(|(_, &q)| q)
                    .find(|&q| g.preimage(q).is_none())
            }
            _ => self.points().find(|&q| g.preimage(q).is_none() && self.pair_compatible(p, q, g)),
        }
    }

    /// Nearest points of `set` strictly below and strictly above `x`.
    fn nearest_in(
        &self,
        x: PointId,
        set: impl Iterator<Item = PointId>,
    ) -> (Option<PointId>, Option<PointId>) {
        let kx = &self.order_key[x.index()];
        let mut lo: Option<PointId> = None;
        let mut hi: Option<PointId> = None;
        for a in set {
            let ka = &self.order_key[a.index()];
            match ka.cmp(kx) {
                Ordering::Less => {
                    if lo.is_none_or(|l| self.order_key[l.index()] < *ka) {
                        lo = Some(a);
                    }
                }
                Ordering::Greater => {
                    if hi.is_none_or(|h| self.order_key[h.index()] > *ka) {
                        hi = Some(a);
                    }
                }
                Ordering::Equal => {}
            }
        }
        (lo, hi)
    }

    /// Placement of a new point that realizes, over `ran(g)`, the `g`-image
    /// of the type of `p` over `dom(g)`.
    pub(crate) fn image_placement(&self, p: PointId, g: &impl PairMap) -> Placement {
        match self.kind {
            StructureKind::PureSet => Placement::Plain,
            StructureKind::RandomGraph => {
                Placement::Neighbors(self.neighbors(p).filter_map(|a| g.image(a)).collect())
            }
            StructureKind::Dlo => {
                let (lo, hi) = self.nearest_in(p, g.sources());
                Placement::Between(lo.and_then(|a| g.image(a)), hi.and_then(|a| g.image(a)))
            }
            StructureKind::EqClasses => {
                let c = self.class[p.index()];
                match self.class_members[c as usize].iter().find_map(|&a| g.image(a)) {
                    Some(b) => Placement::InClass(self.class[b.index()]),
                    None => Placement::FreshClass,
                }
            }
        }
    }

    /// True iff `pairs` is an injective function preserving every relation of
    /// the kind in both directions.
    pub fn is_partial_isomorphism(
        &self,
        pairs: &[(PointId, PointId)],
    ) -> Result<bool, StructureError> {
        let mut fwd = BTreeMap::new();
        let mut bwd = BTreeMap::new();
        for &(a, b) in pairs {
            self.check(a)?;
            self.check(b)?;
            if let Some(&old) = fwd.get(&a) {
                if old != b {
                    return Ok(false);
                }
            }
            if let Some(&old) = bwd.get(&b) {
                if old != a {
                    return Ok(false);
                }
            }
            fwd.insert(a, b);
            bwd.insert(b, a);
        }
        Ok(match self.kind {
            StructureKind::PureSet => true,
            StructureKind::RandomGraph => fwd.iter().all(|(&a, &b)| {
                let from_a = self.neighbors(a).filter(|n| fwd.contains_key(n)).count();
                let from_b = self.neighbors(b).filter(|n| bwd.contains_key(n)).count();
                from_a == from_b
                    && self
                        .neighbors(a)
                        .filter_map(|n| fwd.get(&n))
                        .all(|&m| self.adjacent(b, m))
            }),
            StructureKind::Dlo => {
                let mut dom: Vec<PointId> = fwd.keys().copied().collect();
                dom.sort_by(|x, y| self.compare(*x, *y));
                dom.windows(2).all(|w| self.less(fwd[&w[0]], fwd[&w[1]]))
            }
            StructureKind::EqClasses => {
                let mut class_map: BTreeMap<u32, u32> = BTreeMap::new();
                let mut class_inv: BTreeMap<u32, u32> = BTreeMap::new();
                fwd.iter().all(|(&a, &b)| {
                    let (ca, cb) = (self.class[a.index()], self.class[b.index()]);
                    *class_map.entry(ca).or_insert(cb) == cb
                        && *class_inv.entry(cb).or_insert(ca) == ca
                })
            }
        })
    }

    /// Rebuilds a structure from serialized relation data.
    pub fn from_parts(
        kind: StructureKind,
        seed: u64,
        point_count: u32,
        edges: &[(PointId, PointId)],
        order: &[PointId],
        classes: &[u32],
    ) -> Result<Self, StructureError> {
        let mut s = Structure::new(kind, seed);
        s.next_id = point_count;
        let bad = |msg: String| Err(StructureError::Malformed(msg));
        match kind {
            StructureKind::PureSet => {}
            StructureKind::RandomGraph => {
                s.adjacency = vec![BTreeSet::new(); point_count as usize];
                for &(a, b) in edges {
                    if !s.contains(a) || !s.contains(b) || a == b {
                        return bad(format!("edge ({a}, {b})"));
                    }
                    s.adjacency[a.index()].insert(b);
                    s.adjacency[b.index()].insert(a);
                }
            }
            StructureKind::Dlo => {
                if order.len() != point_count as usize {
                    return bad("order does not list every point".into());
                }
                s.order_key = vec![Vec::new(); point_count as usize];
                for (i, &p) in order.iter().enumerate() {
                    if !s.contains(p) || !s.order_key[p.index()].is_empty() {
                        return bad(format!("order entry {p}"));
                    }
                    let key = vec![(i as u32 >> 16) + 1, (i as u32 & 0xffff) + 1];
                    s.order_key[p.index()] = key.clone();
                    s.order.insert(key, p);
                }
            }
            StructureKind::EqClasses => {
                if classes.len() != point_count as usize {
                    return bad("class list does not cover every point".into());
                }
                for (i, &c) in classes.iter().enumerate() {
                    if c as usize >= s.class_members.len() {
                        s.class_members.resize(c as usize + 1, Vec::new());
                    }
                    s.class_members[c as usize].push(PointId(i as u32));
                }
                s.class = classes.to_vec();
            }
        }
        Ok(s)
    }
}
