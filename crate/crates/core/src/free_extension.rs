//! Extending finite approximations of generators so that a given reduced word
//! visibly moves a point.
//!
//! For a word `w = l_0 l_1 … l_n` the engine builds fresh spreads
//! `A_0, …, A_{n+1}`. Letter `l_i` is made to carry `A_i` onto `A_{i+1}`
//! (or back, for an inverse letter) by extending the generator named by
//! `l_i`. A label that occurs several times keeps one graph, so each later
//! occurrence extends everything committed at the previous one. Reducedness
//! is exactly what keeps `A_i` outside the domain (resp. range) that is
//! about to be extended. Since `A_{n+1}` is fresh, `w(A_0[0]) = A_{n+1}[0]`
//! differs from `A_0[0]`, and the equation survives every later monotone
//! extension.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automorphisms::{AutomorphismError, Direction, ImagePolicy, LazyAutomorphism};
use crate::structures::{PointId, QfType, Structure, StructureError};
use crate::words::{evaluate_with, GeneratorLabel, ReducedWord, Sign, WordError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub word: ReducedWord,
    pub start: PointId,
    pub end: PointId,
    pub stage: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KillError {
    #[error("cannot kill the empty word")]
    EmptyWord,
    #[error("generator {label} would be extended on a point it already moves (word not reduced?)")]
    InconsistentReuse { label: GeneratorLabel },
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Automorphism(#[from] AutomorphismError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KillConfig {
    /// Length of every spread `A_i`.
    pub spread_len: usize,
}

impl Default for KillConfig {
    fn default() -> Self {
        KillConfig { spread_len: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KillOutcome {
    pub witness: Witness,
    /// Members of `A_0, …, A_{n+1}`.
    pub spreads: Vec<Vec<PointId>>,
}

/// Extends the generators named in `w` so that `w` moves a fresh point.
///
/// `A_0` realizes the plain type over the whole current structure, so it is
/// independent of every point any generator touches.
pub fn kill_word(
    s: &mut Structure,
    w: &ReducedWord,
    gens: &mut BTreeMap<GeneratorLabel, LazyAutomorphism>,
    stage: u32,
    config: KillConfig,
) -> Result<KillOutcome, KillError> {
    if w.is_empty() {
        return Err(KillError::EmptyWord);
    }
    for l in w.labels() {
        if !gens.contains_key(&l) {
            return Err(WordError::MissingLabel(l).into());
        }
    }
    let m = config.spread_len.max(1);
    let a0 = s.create_spread(&QfType::plain(s.kind(), Vec::new()), m)?;
    let mut spreads = vec![a0.members];
    for letter in w.letters() {
        let g = gens.get_mut(&letter.label).expect("checked above");
        let direction = match letter.sign {
            Sign::Plus => Direction::Forward,
            Sign::Minus => Direction::Backward,
        };
        let current = spreads.last().expect("nonempty");
        let mut next = Vec::with_capacity(m);
        for &p in current {
            let busy = match direction {
                Direction::Forward => g.committed().in_domain(p),
                Direction::Backward => g.committed().in_range(p),
            };
            if busy {
                return Err(KillError::InconsistentReuse { label: letter.label });
            }
            next.push(g.extend_to_point(s, p, direction, stage, ImagePolicy::Fresh)?);
        }
        spreads.push(next);
    }
    let start = spreads[0][0];
    let end = spreads.last().expect("nonempty")[0];
    debug_assert_ne!(start, end);
    Ok(KillOutcome { witness: Witness { word: w.clone(), start, end, stage }, spreads })
}

/// Whether `wt` still evaluates to its recorded end point.
pub fn witness_persists(
    wt: &Witness,
    gens: &BTreeMap<GeneratorLabel, LazyAutomorphism>,
) -> Result<bool, WordError> {
    let image = evaluate_with(&wt.word, |l| gens.get(l).map(|g| g.committed()), wt.start)?;
    Ok(wt.start != wt.end && image == Some(wt.end))
}
