//! Stagewise construction of a tree of generators that is free up to a word
//! budget and dense on a growing fragment.
//!
//! Stage `s` (starting at 1) does four things in order:
//!
//! 1. **Density.** Every partial isomorphism of the current fragment with at
//!    most `density_size` pairs that has not been seen before gets a fresh
//!    `Density` generator at level `s` whose initial graph is exactly that
//!    requirement. Stage 1 also logs the empty requirement.
//! 2. **Freeness.** Words over the active labels are enumerated in
//!    length-lex order; up to `words_per_stage` of them that were not killed
//!    earlier are handed to [`kill_word`]. The active labels at stage `s` are
//!    the `Free` labels of level `s - 1` and every `Density` label of a level
//!    below `s`.
//! 3. **Growth.** `branching` new `Free` labels appear at level `s`; label
//!    `(s, i)` starts as a copy of `(s - 1, i)`. From now on the parents are
//!    never extended again, so each child keeps extending its parent.
//! 4. **Closure.** The fragment gains `fragment_growth` points of random
//!    one-point type over it, and every generator that can still grow is
//!    closed over the fragment.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automorphisms::{AutomorphismError, ImagePolicy, LazyAutomorphism, PartialAutomorphism};
use crate::free_extension::{kill_word, witness_persists, KillConfig, KillError, Witness};
use crate::structures::{
    ClassSpec, Constraint, PointId, QfType, Structure, StructureError, StructureKind,
};
use crate::words::{GeneratorLabel, ReducedWord, Role, WordIter};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("{upper} does not extend {lower}")]
    NotAChain { lower: GeneratorLabel, upper: GeneratorLabel },
    #[error("unknown generator {0}")]
    UnknownLabel(GeneratorLabel),
    #[error(transparent)]
    Kill(#[from] KillError),
    #[error(transparent)]
    Automorphism(#[from] AutomorphismError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub kind: StructureKind,
    pub seed: u64,
    pub stages: u32,
    pub branching: u32,
    pub words_per_stage: usize,
    pub density_size: usize,
    pub max_word_len: usize,
    pub spread_len: usize,
    pub fragment_growth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            kind: StructureKind::RandomGraph,
            seed: 0,
            stages: 5,
            branching: 2,
            words_per_stage: 4000,
            density_size: 2,
            max_word_len: 4,
            spread_len: 1,
            fragment_growth: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityEntry {
    pub requirement: PartialAutomorphism,
    pub label: GeneratorLabel,
    pub stage: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StageReport {
    pub stage: u32,
    pub density_added: usize,
    pub words_killed: usize,
    /// Words over the active labels that were left for lack of budget.
    pub words_deferred: bool,
    pub points_created: usize,
}

#[derive(Clone, Debug)]
pub struct TreeState {
    pub params: TreeParams,
    pub structure: Structure,
    pub fragment: BTreeSet<PointId>,
    pub gens: BTreeMap<GeneratorLabel, LazyAutomorphism>,
    pub witnesses: Vec<Witness>,
    pub density_log: Vec<DensityEntry>,
    /// Next stage to run.
    pub stage: u32,
    /// Fragment as it stood at the start of each completed stage.
    pub fragment_history: Vec<Vec<PointId>>,
    consumed: HashSet<ReducedWord>,
    logged: HashSet<Vec<(PointId, PointId)>>,
    rng: ChaCha8Rng,
}

impl TreeState {
    pub fn new(params: TreeParams) -> Self {
        TreeState {
            structure: Structure::new(params.kind, params.seed),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            params,
            fragment: BTreeSet::new(),
            gens: BTreeMap::new(),
            witnesses: Vec::new(),
            density_log: Vec::new(),
            stage: 1,
            fragment_history: Vec::new(),
            consumed: HashSet::new(),
            logged: HashSet::new(),
        }
    }

    /// Runs all `params.stages` stages.
    pub fn run(params: TreeParams) -> Result<Self, TreeError> {
        let mut st = TreeState::new(params);
        for _ in 0..st.params.stages {
            st.run_stage()?;
        }
        Ok(st)
    }

    /// Labels whose words are killed at stage `stage`.
    pub fn active_labels(&self, stage: u32) -> Vec<GeneratorLabel> {
        let mut free: Vec<GeneratorLabel> = self
            .gens
            .keys()
            .filter(|l| l.role == Role::Free && l.level + 1 == stage)
            .copied()
            .collect();
        free.sort_by_key(|l| l.index);
        let density = self
            .gens
            .keys()
            .filter(|l| l.role == Role::Density && l.level < stage)
            .copied();
        free.into_iter().chain(density).collect()
    }

    /// Generators that may still be extended after the current stage.
    fn growing_labels(&self) -> Vec<GeneratorLabel> {
        let newest = self.stage;
        self.gens
            .keys()
            .filter(|l| l.role == Role::Density || l.level == newest)
            .copied()
            .collect()
    }

    pub fn is_consumed(&self, w: &ReducedWord) -> bool {
        self.consumed.contains(w)
    }

    pub fn run_stage(&mut self) -> Result<StageReport, TreeError> {
        let stage = self.stage;
        let points_before = self.structure.len();
        let mut report = StageReport { stage, ..StageReport::default() };
        self.fragment_history.push(self.fragment.iter().copied().collect());

        // density
        let mut requirements = Vec::new();
        if stage == 1 {
            requirements.push(PartialAutomorphism::new());
        }
        requirements.extend(density_requirements(
            &self.structure,
            &self.fragment,
            self.params.density_size,
        ));
        let mut next_index =
            self.gens.keys().filter(|l| l.role == Role::Density && l.level == stage).count() as u32;
        for req in requirements {
            if !self.logged.insert(req.to_pairs()) {
                continue;
            }
            let label = GeneratorLabel::density(stage, next_index);
            next_index += 1;
            self.gens.insert(label, LazyAutomorphism::with_initial(label, req.clone(), stage));
            self.density_log.push(DensityEntry { requirement: req, label, stage });
            report.density_added += 1;
        }

        // freeness
        let config = KillConfig { spread_len: self.params.spread_len };
        let mut words = WordIter::new(self.active_labels(stage), self.params.max_word_len)
            .filter(|w| !self.consumed.contains(w));
        let mut batch = Vec::new();
        for w in words.by_ref().take(self.params.words_per_stage) {
            batch.push(w);
        }
        report.words_deferred = words.next().is_some();
        for w in batch {
            let out = kill_word(&mut self.structure, &w, &mut self.gens, stage, config)?;
            self.witnesses.push(out.witness);
            self.consumed.insert(w);
            report.words_killed += 1;
        }

        // growth
        for i in 0..self.params.branching {
            let label = GeneratorLabel::free(stage, i);
            let parent = GeneratorLabel::free(stage - 1, i);
            let init = self.gens.get(&parent).map(|g| g.committed().clone()).unwrap_or_default();
            self.gens.insert(label, LazyAutomorphism::with_initial(label, init, stage));
        }

        // closure
        for _ in 0..self.params.fragment_growth {
            let t = random_type(&self.structure, &self.fragment, &mut self.rng);
            let p = self.structure.create_point(&t)?;
            self.fragment.insert(p);
        }
        for label in self.growing_labels() {
            let g = self.gens.get_mut(&label).expect("listed");
            g.close_over(&mut self.structure, &self.fragment, stage, ImagePolicy::Fresh)?;
        }

        report.points_created = self.structure.len() - points_before;
        self.stage += 1;
        Ok(report)
    }

    /// Union of the committed graphs along `branch`, which must list `Free`
    /// labels at consecutive levels, each extending the previous one.
    pub fn branch_union(&self, branch: &[GeneratorLabel]) -> Result<PartialAutomorphism, TreeError> {
        let mut union = PartialAutomorphism::new();
        for (i, &label) in branch.iter().enumerate() {
            let g = self.gens.get(&label).ok_or(TreeError::UnknownLabel(label))?;
            if i > 0 {
                let lower = branch[i - 1];
                let chained = label.role == Role::Free
                    && lower.role == Role::Free
                    && label.level == lower.level + 1
                    && union.is_subset_of(g.committed());
                if !chained {
                    return Err(TreeError::NotAChain { lower, upper: label });
                }
            }
            for (a, b) in g.committed().pairs() {
                union.try_insert(a, b)?;
            }
        }
        Ok(union)
    }

    /// The maximal chains `(1, i), (2, i), …` through the tree.
    pub fn branches(&self) -> Vec<Vec<GeneratorLabel>> {
        (0..self.params.branching)
            .map(|i| {
                (1..self.stage)
                    .map(|level| GeneratorLabel::free(level, i))
                    .filter(|l| self.gens.contains_key(l))
                    .collect()
            })
            .collect()
    }

    /// Witnesses that no longer evaluate to their recorded end.
    pub fn broken_witnesses(&self) -> Vec<&Witness> {
        self.witnesses
            .iter()
            .filter(|w| !witness_persists(w, &self.gens).unwrap_or(false))
            .collect()
    }
}

/// A one-point type over `fragment` chosen by `rng`.
fn random_type(s: &Structure, fragment: &BTreeSet<PointId>, rng: &mut impl Rng) -> QfType {
    let base: Vec<PointId> = fragment.iter().copied().collect();
    let constraint = match s.kind() {
        StructureKind::PureSet => Constraint::Empty,
        StructureKind::RandomGraph => {
            Constraint::Adjacency(base.iter().map(|_| rng.gen_bool(0.5)).collect())
        }
        StructureKind::Dlo => Constraint::Cut(rng.gen_range(0..=base.len())),
        StructureKind::EqClasses => {
            let classes: Vec<u32> = base
                .iter()
                .filter_map(|&p| s.class_of(p))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let pick = rng.gen_range(0..=classes.len());
            match classes.get(pick) {
                Some(&c) => Constraint::Class(ClassSpec::Tag(c)),
                None => Constraint::Class(ClassSpec::Fresh),
            }
        }
    };
    QfType::new(base, constraint)
}

/// All partial isomorphisms of the substructure on `fragment` with between 1
/// and `max_size` pairs, ordered by domain ids, then image ids.
pub fn density_requirements(
    s: &Structure,
    fragment: &BTreeSet<PointId>,
    max_size: usize,
) -> Vec<PartialAutomorphism> {
    let pts: Vec<PointId> = fragment.iter().copied().collect();
    let mut out: Vec<(Vec<PointId>, Vec<PointId>)> = Vec::new();
    for size in 1..=max_size.min(pts.len()) {
        for dom in combinations(&pts, size) {
            let mut img = Vec::with_capacity(size);
            let mut used = vec![false; pts.len()];
            injections(s, &pts, &dom, &mut img, &mut used, &mut out);
        }
    }
    out.sort();
    out.into_iter()
        .map(|(dom, img)| {
            PartialAutomorphism::from_pairs(dom.into_iter().zip(img))
                .expect("injective by construction")
        })
        .collect()
}

fn combinations(pts: &[PointId], k: usize) -> Vec<Vec<PointId>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(pts: &[PointId], k: usize, start: usize, cur: &mut Vec<PointId>, out: &mut Vec<Vec<PointId>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pts.len() {
            cur.push(pts[i]);
            go(pts, k, i + 1, cur, out);
            cur.pop();
        }
    }
    go(pts, k, 0, &mut cur, &mut out);
    out
}

fn injections(
    s: &Structure,
    pts: &[PointId],
    dom: &[PointId],
    img: &mut Vec<PointId>,
    used: &mut [bool],
    out: &mut Vec<(Vec<PointId>, Vec<PointId>)>,
) {
    if img.len() == dom.len() {
        let pairs: Vec<(PointId, PointId)> = dom.iter().copied().zip(img.iter().copied()).collect();
        if s.is_partial_isomorphism(&pairs).unwrap_or(false) {
            out.push((dom.to_vec(), img.clone()));
        }
        return;
    }
    for (i, &q) in pts.iter().enumerate() {
        if used[i] {
            continue;
        }
        used[i] = true;
        img.push(q);
        injections(s, pts, dom, img, used, out);
        img.pop();
        used[i] = false;
    }
}
