//! Finite partial automorphisms and their stagewise growth.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::structures::{PointId, Structure};
use crate::words::GeneratorLabel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutomorphismError {
    #[error("point {point} is already paired with {existing}, cannot pair with {requested}")]
    ConflictingPair {
        point: PointId,
        existing: PointId,
        requested: PointId,
    },
    #[error("adding {0} -> {1} breaks relation preservation")]
    NotIsomorphism(PointId, PointId),
    #[error("point {0} is not in the structure")]
    UnknownPoint(PointId),
    #[error("stage {requested} precedes the last logged stage {last}")]
    StageRegression { requested: u32, last: u32 },
    #[error("point {0} is already in the domain")]
    AlreadyInDomain(PointId),
    #[error("point {0} is already in the range")]
    AlreadyInRange(PointId),
}

/// A finite injective map, queryable in both directions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialAutomorphism {
    fwd: BTreeMap<PointId, PointId>,
    bwd: BTreeMap<PointId, PointId>,
}

impl PartialAutomorphism {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an injective map; fails on the first conflicting pair.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (PointId, PointId)>,
    ) -> Result<Self, AutomorphismError> {
        let mut m = Self::new();
        for (a, b) in pairs {
            m.try_insert(a, b)?;
        }
        Ok(m)
    }

    pub fn get(&self, p: PointId) -> Option<PointId> {
        self.fwd.get(&p).copied()
    }

    pub fn inverse_get(&self, p: PointId) -> Option<PointId> {
        self.bwd.get(&p).copied()
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    pub fn in_domain(&self, p: PointId) -> bool {
        self.fwd.contains_key(&p)
    }

    pub fn in_range(&self, p: PointId) -> bool {
        self.bwd.contains_key(&p)
    }

    pub fn domain(&self) -> impl Iterator<Item = PointId> + '_ {
        self.fwd.keys().copied()
    }

    pub fn range(&self) -> impl Iterator<Item = PointId> + '_ {
        self.bwd.keys().copied()
    }

    /// Pairs sorted by source.
    pub fn pairs(&self) -> impl Iterator<Item = (PointId, PointId)> + '_ {
        self.fwd.iter().map(|(&a, &b)| (a, b))
    }

    pub fn to_pairs(&self) -> Vec<(PointId, PointId)> {
        self.pairs().collect()
    }

    pub fn inverse(&self) -> Self {
        PartialAutomorphism { fwd: self.bwd.clone(), bwd: self.fwd.clone() }
    }

    pub fn is_subset_of(&self, other: &PartialAutomorphism) -> bool {
        self.pairs().all(|(a, b)| other.get(a) == Some(b))
    }

    fn conflict(&self, a: PointId, b: PointId) -> Result<(), AutomorphismError> {
        if let Some(existing) = self.get(a) {
            if existing != b {
                return Err(AutomorphismError::ConflictingPair { point: a, existing, requested: b });
            }
        }
        if let Some(existing) = self.inverse_get(b) {
            if existing != a {
                return Err(AutomorphismError::ConflictingPair { point: b, existing, requested: a });
            }
        }
        Ok(())
    }

    /// Inserts `a -> b`; returns whether the pair is new.
    pub fn try_insert(&mut self, a: PointId, b: PointId) -> Result<bool, AutomorphismError> {
        self.conflict(a, b)?;
        if self.fwd.contains_key(&a) {
            return Ok(false);
        }
        self.fwd.insert(a, b);
        self.bwd.insert(b, a);
        Ok(true)
    }

    fn remove(&mut self, a: PointId) {
        if let Some(b) = self.fwd.remove(&a) {
            self.bwd.remove(&b);
        }
    }

    /// Pairs whose source lies in `pts`.
    pub fn restrict(&self, pts: &BTreeSet<PointId>) -> PartialAutomorphism {
        let mut out = PartialAutomorphism::new();
        for (a, b) in self.pairs().filter(|(a, _)| pts.contains(a)) {
            out.fwd.insert(a, b);
            out.bwd.insert(b, a);
        }
        out
    }
}

/// Read access to a finite injective map, possibly viewed backwards.
pub(crate) trait PairMap {
    fn image(&self, p: PointId) -> Option<PointId>;
    fn preimage(&self, p: PointId) -> Option<PointId>;
    fn sources(&self) -> Box<dyn Iterator<Item = PointId> + '_>;
}

impl PairMap for PartialAutomorphism {
    fn image(&self, p: PointId) -> Option<PointId> {
        self.get(p)
    }
    fn preimage(&self, p: PointId) -> Option<PointId> {
        self.inverse_get(p)
    }
    fn sources(&self) -> Box<dyn Iterator<Item = PointId> + '_> {
        Box::new(self.domain())
    }
}

/// The inverse of a map, without copying it.
pub(crate) struct Flipped<'a>(pub &'a PartialAutomorphism);

impl PairMap for Flipped<'_> {
    fn image(&self, p: PointId) -> Option<PointId> {
        self.0.inverse_get(p)
    }
    fn preimage(&self, p: PointId) -> Option<PointId> {
        self.0.get(p)
    }
    fn sources(&self) -> Box<dyn Iterator<Item = PointId> + '_> {
        Box::new(self.0.range())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// How `extend_to_point` picks the new partner of a point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImagePolicy {
    /// Always realize the required type by a new point.
    #[default]
    Fresh,
    /// Prefer the least existing point with the required type.
    Reuse,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageEntry {
    pub stage: u32,
    pub pairs: Vec<(PointId, PointId)>,
}

/// An automorphism known only through its growing finite approximations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LazyAutomorphism {
    pub label: GeneratorLabel,
    committed: PartialAutomorphism,
    stages: Vec<StageEntry>,
}

impl LazyAutomorphism {
    pub fn new(label: GeneratorLabel) -> Self {
        LazyAutomorphism { label, committed: PartialAutomorphism::new(), stages: Vec::new() }
    }

    /// Starts from `initial`, logged at `stage`. The caller vouches that
    /// `initial` is a partial isomorphism.
    pub fn with_initial(label: GeneratorLabel, initial: PartialAutomorphism, stage: u32) -> Self {
        let pairs = initial.to_pairs();
        let stages = if pairs.is_empty() { Vec::new() } else { vec![StageEntry { stage, pairs }] };
        LazyAutomorphism { label, committed: initial, stages }
    }

    pub fn committed(&self) -> &PartialAutomorphism {
        &self.committed
    }

    pub fn stages(&self) -> &[StageEntry] {
        &self.stages
    }

    pub fn last_stage(&self) -> Option<u32> {
        self.stages.last().map(|e| e.stage)
    }

    /// Committed graph as it stood at the end of `stage`.
    pub fn committed_at(&self, stage: u32) -> PartialAutomorphism {
        let mut out = PartialAutomorphism::new();
        for e in self.stages.iter().take_while(|e| e.stage <= stage) {
            for &(a, b) in &e.pairs {
                out.fwd.insert(a, b);
                out.bwd.insert(b, a);
            }
        }
        out
    }

    /// Adds `new_pairs` at `stage`. On error nothing is committed.
    pub fn commit_pairs(
        &mut self,
        s: &Structure,
        new_pairs: &[(PointId, PointId)],
        stage: u32,
    ) -> Result<(), AutomorphismError> {
        if let Some(last) = self.last_stage() {
            if stage < last {
                return Err(AutomorphismError::StageRegression { requested: stage, last });
            }
        }
        let mut added = Vec::new();
        let mut result = Ok(());
        for &(a, b) in new_pairs {
            if !s.contains(a) {
                result = Err(AutomorphismError::UnknownPoint(a));
                break;
            }
            if !s.contains(b) {
                result = Err(AutomorphismError::UnknownPoint(b));
                break;
            }
            if let Err(e) = self.committed.conflict(a, b) {
                result = Err(e);
                break;
            }
            if self.committed.in_domain(a) {
                continue;
            }
            if !s.pair_compatible(a, b, &self.committed) {
                result = Err(AutomorphismError::NotIsomorphism(a, b));
                break;
            }
            self.committed.fwd.insert(a, b);
            self.committed.bwd.insert(b, a);
            added.push((a, b));
        }
        if let Err(e) = result {
            for &(a, _) in &added {
                self.committed.remove(a);
            }
            return Err(e);
        }
        if !added.is_empty() {
            match self.stages.last_mut() {
                Some(e) if e.stage == stage => e.pairs.extend(added),
                _ => self.stages.push(StageEntry { stage, pairs: added }),
            }
        }
        Ok(())
    }

    /// Gives `p` a partner: an image if `Forward`, a preimage if `Backward`.
    /// Returns the partner.
    pub fn extend_to_point(
        &mut self,
        s: &mut Structure,
        p: PointId,
        direction: Direction,
        stage: u32,
        policy: ImagePolicy,
    ) -> Result<PointId, AutomorphismError> {
        if !s.contains(p) {
            return Err(AutomorphismError::UnknownPoint(p));
        }
        match direction {
            Direction::Forward if self.committed.in_domain(p) => {
                return Err(AutomorphismError::AlreadyInDomain(p))
            }
            Direction::Backward if self.committed.in_range(p) => {
                return Err(AutomorphismError::AlreadyInRange(p))
            }
            _ => {}
        }
        let partner = match direction {
            Direction::Forward => find_partner(s, p, &self.committed, policy),
            Direction::Backward => find_partner(s, p, &Flipped(&self.committed), policy),
        };
        let pair = match direction {
            Direction::Forward => (p, partner),
            Direction::Backward => (partner, p),
        };
        self.commit_pairs(s, &[pair], stage)?;
        Ok(partner)
    }

    /// Makes both domain and range cover `pts`, in ascending id order.
    pub fn close_over(
        &mut self,
        s: &mut Structure,
        pts: &BTreeSet<PointId>,
        stage: u32,
        policy: ImagePolicy,
    ) -> Result<(), AutomorphismError> {
        for &p in pts {
            if !self.committed.in_domain(p) {
                self.extend_to_point(s, p, Direction::Forward, stage, policy)?;
            }
            if !self.committed.in_range(p) {
                self.extend_to_point(s, p, Direction::Backward, stage, policy)?;
            }
        }
        Ok(())
    }

    pub fn restrict(&self, pts: &BTreeSet<PointId>) -> PartialAutomorphism {
        self.committed.restrict(pts)
    }
}

fn find_partner(s: &mut Structure, p: PointId, g: &impl PairMap, policy: ImagePolicy) -> PointId {
    let reused = match policy {
        ImagePolicy::Fresh => None,
        ImagePolicy::Reuse => s.find_compatible(p, g),
    };
    match reused {
        Some(q) => q,
        None => {
            let placement = s.image_placement(p, g);
            s.realize(&placement)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{Constraint, QfType, StructureKind};

    fn p(i: u32) -> PointId {
        PointId(i)
    }

    fn label() -> GeneratorLabel {
        GeneratorLabel::free(1, 0)
    }

    fn with_points(kind: StructureKind, n: usize) -> Structure {
        let mut s = Structure::new(kind, 0);
        for _ in 0..n {
            let base = s.points().collect::<Vec<_>>();
            s.create_point(&QfType::plain(kind, base)).unwrap();
        }
        s
    }

    #[test]
    fn commit_examples() {
        let s = with_points(StructureKind::PureSet, 2);
        let mut g = LazyAutomorphism::new(label());
        g.commit_pairs(&s, &[], 1).unwrap();
        assert!(g.committed().is_empty());
        g.commit_pairs(&s, &[(p(0), p(1))], 1).unwrap();
        assert_eq!(g.committed().to_pairs(), vec![(p(0), p(1))]);
        assert_eq!(
            g.commit_pairs(&s, &[(p(0), p(0))], 2),
            Err(AutomorphismError::ConflictingPair { point: p(0), existing: p(1), requested: p(0) })
        );
        assert_eq!(
            g.commit_pairs(&s, &[(p(1), p(1))], 0),
            Err(AutomorphismError::StageRegression { requested: 0, last: 1 })
        );

        let mut gr = Structure::new(StructureKind::RandomGraph, 0);
        gr.create_point(&QfType::plain(StructureKind::RandomGraph, vec![])).unwrap();
        gr.create_point(&QfType::new(vec![p(0)], Constraint::Adjacency(vec![true]))).unwrap();
        gr.create_point(&QfType::plain(StructureKind::RandomGraph, vec![])).unwrap();
        gr.create_point(&QfType::plain(StructureKind::RandomGraph, vec![])).unwrap();
        let mut g = LazyAutomorphism::new(label());
        g.commit_pairs(&gr, &[(p(0), p(2))], 1).unwrap();
        assert_eq!(
            g.commit_pairs(&gr, &[(p(1), p(3))], 2),
            Err(AutomorphismError::NotIsomorphism(p(1), p(3)))
        );
        assert_eq!(g.committed().len(), 1);
    }

    #[test]
    fn failed_commit_rolls_back() {
        let mut gr = Structure::new(StructureKind::RandomGraph, 0);
        gr.create_point(&QfType::plain(StructureKind::RandomGraph, vec![])).unwrap();
        gr.create_point(&QfType::new(vec![p(0)], Constraint::Adjacency(vec![true]))).unwrap();
        gr.create_point(&QfType::plain(StructureKind::RandomGraph, vec![])).unwrap();
        gr.create_point(&QfType::plain(StructureKind::RandomGraph, vec![])).unwrap();
        let mut g = LazyAutomorphism::new(label());
        assert!(g.commit_pairs(&gr, &[(p(0), p(2)), (p(1), p(3))], 1).is_err());
        assert!(g.committed().is_empty());
        assert!(g.stages().is_empty());
    }

    #[test]
    fn extend_examples() {
        let mut s = with_points(StructureKind::PureSet, 6);
        let mut g = LazyAutomorphism::new(label());
        let q = g.extend_to_point(&mut s, p(5), Direction::Forward, 1, ImagePolicy::Fresh).unwrap();
        assert_eq!(q, p(6));
        assert_eq!(g.committed().get(p(5)), Some(p(6)));
        assert_eq!(
            g.extend_to_point(&mut s, p(6), Direction::Backward, 1, ImagePolicy::Fresh),
            Err(AutomorphismError::AlreadyInRange(p(6)))
        );

        let mut d = with_points(StructureKind::Dlo, 2);
        assert!(d.less(p(0), p(1)));
        let mut g = LazyAutomorphism::new(label());
        g.commit_pairs(&d, &[(p(0), p(0))], 1).unwrap();
        let q = g.extend_to_point(&mut d, p(1), Direction::Forward, 1, ImagePolicy::Fresh).unwrap();
        assert!(d.less(p(0), q));
        let r = g.extend_to_point(&mut d, p(1), Direction::Backward, 1, ImagePolicy::Fresh).unwrap();
        assert!(d.less(p(0), r));
        assert!(d.is_partial_isomorphism(&g.committed().to_pairs()).unwrap());
    }

    #[test]
    fn close_over_examples() {
        let mut s = with_points(StructureKind::PureSet, 1);
        let mut g = LazyAutomorphism::new(label());
        g.close_over(&mut s, &BTreeSet::from([p(0)]), 1, ImagePolicy::Reuse).unwrap();
        assert_eq!(g.committed().to_pairs(), vec![(p(0), p(0))]);

        let mut s = with_points(StructureKind::PureSet, 1);
        let mut g = LazyAutomorphism::new(label());
        let pts = BTreeSet::from([p(0)]);
        g.close_over(&mut s, &pts, 1, ImagePolicy::Fresh).unwrap();
        assert_eq!(g.committed().len(), 2);
        assert!(g.committed().in_domain(p(0)) && g.committed().in_range(p(0)));
        let before = g.clone();
        let n = s.len();
        g.close_over(&mut s, &pts, 2, ImagePolicy::Fresh).unwrap();
        assert_eq!(g, before);
        assert_eq!(s.len(), n);
    }

    #[test]
    fn restrict_examples() {
        let s = with_points(StructureKind::PureSet, 4);
        let mut g = LazyAutomorphism::new(label());
        g.commit_pairs(&s, &[(p(0), p(1)), (p(2), p(3))], 1).unwrap();
        assert!(g.restrict(&BTreeSet::new()).is_empty());
        let dom: BTreeSet<_> = g.committed().domain().collect();
        assert_eq!(&g.restrict(&dom), g.committed());
        assert_eq!(g.restrict(&BTreeSet::from([p(0)])).to_pairs(), vec![(p(0), p(1))]);
    }

    #[test]
    fn stages_are_monotone() {
        let mut s = with_points(StructureKind::EqClasses, 3);
        let mut g = LazyAutomorphism::new(label());
        for (stage, &pt) in [p(0), p(1), p(2)].iter().enumerate() {
            g.close_over(&mut s, &BTreeSet::from([pt]), stage as u32 + 1, ImagePolicy::Fresh)
                .unwrap();
        }
        for st in 0..3 {
            assert!(g.committed_at(st).is_subset_of(&g.committed_at(st + 1)));
        }
        assert_eq!(&g.committed_at(3), g.committed());
        assert!(s.is_partial_isomorphism(&g.committed().to_pairs()).unwrap());
    }
}
