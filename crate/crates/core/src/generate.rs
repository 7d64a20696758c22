//! End-to-end runs of the array constructions, producing certificates.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automorphisms::PartialAutomorphism;
use crate::certificate::{
    action_record, parameters, Certificate, DensityRecord, GeneratorRecord, Header, Module, RegistryData,
    StructureData, Summary, FORMAT,
};
use crate::free_extension::Witness;
use crate::stable::{
    concrete_witness, dense_extend, free_column_witness, random_permutation_requirement, star_extension,
    star_freeness_witness, type_action, ArrayDims, ArrayIndex, ArrayRegistry, DenseExtensionState,
    IndexPermutation, StableError, StarAction, StarOutcome,
};
use crate::structures::{PointId, Structure, StructureKind};
use crate::words::{enumerate_words, GeneratorLabel, ReducedWord};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableParams {
    pub seed: u64,
    pub rank: u32,
    pub dims: ArrayDims,
    pub max_word_len: usize,
    pub base_per_class: usize,
}

impl Default for StableParams {
    fn default() -> Self {
        StableParams { seed: 0, rank: 2, dims: ArrayDims::new(2, 4, 32), max_word_len: 4, base_per_class: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseParams {
    pub seed: u64,
    pub rank: u32,
    pub dims: ArrayDims,
    pub max_word_len: usize,
    pub max_requirement: usize,
    pub max_columns: usize,
}

impl Default for DenseParams {
    fn default() -> Self {
        DenseParams {
            seed: 0,
            rank: 3,
            dims: ArrayDims::new(4, 16, 64),
            max_word_len: 3,
            max_requirement: 8,
            max_columns: 5,
        }
    }
}

fn header(module: Module, seed: u64, params: &impl Serialize) -> Header {
    let mut parameters = parameters(params);
    parameters.remove("seed");
    Header { format: FORMAT.to_string(), module, kind: StructureKind::EqClasses, seed, parameters }
}

fn record(label: GeneratorLabel, g: &PartialAutomorphism) -> GeneratorRecord {
    GeneratorRecord { label, pairs: g.to_pairs() }
}

/// A concrete witness for `w`: the first cell the committed maps move.
fn witness_for(
    candidates: impl IntoIterator<Item = PointId>,
    maps: &BTreeMap<GeneratorLabel, PartialAutomorphism>,
    w: &ReducedWord,
) -> Result<Option<Witness>, StableError> {
    Ok(concrete_witness(candidates, maps, w)?
        .map(|(start, end)| Witness { word: w.clone(), start, end, stage: 1 }))
}

/// Star generators `g_α^*` for `α < rank`: on the base, `g_α` shifts member
/// `m` of class `i` to member `m` of class `i + α`; rows move by the `α`-th
/// free generator.
pub fn run_stable(params: &StableParams) -> Result<Certificate, StableError> {
    let mut s = Structure::new(StructureKind::EqClasses, params.seed);
    let reg = ArrayRegistry::with_base(&mut s, params.dims, params.base_per_class)?;
    let t = params.dims.types;
    let classes: Vec<u32> = (0..t).collect();
    let base_members: Vec<Vec<PointId>> = classes
        .iter()
        .map(|&c| s.class_members(c).iter().copied().filter(|p| reg.base().contains(p)).collect())
        .collect();

    let mut stars = BTreeMap::new();
    let mut maps = BTreeMap::new();
    let mut density_log = Vec::new();
    let mut actions = Vec::new();
    for alpha in 0..params.rank {
        let label = GeneratorLabel::free(1, alpha);
        let g = PartialAutomorphism::from_pairs(classes.iter().flat_map(|&c| {
            let to = ((c + alpha) % t) as usize;
            base_members[c as usize].iter().copied().zip(base_members[to].iter().copied())
        }))?;
        let fg = if g.is_empty() { Default::default() } else { type_action(&s, &g, &classes)? };
        let h = IndexPermutation::generator(params.rank, alpha)?;
        let star = star_extension(&reg, &g, &fg, &h, false)?;
        actions.push(action_record(label, &fg, &h.word));
        density_log.push(DensityRecord { requirement: g.to_pairs(), label, stage: 1 });
        stars.insert(label, StarAction { classes: fg, rows: h });
        maps.insert(label, star);
    }

    let labels: Vec<GeneratorLabel> = maps.keys().copied().collect();
    let mut killed = Vec::new();
    let mut unwitnessed = 0;
    for w in enumerate_words(&labels, params.max_word_len) {
        match star_freeness_witness(&reg, &stars, &w)? {
            StarOutcome::Moved(_) => {}
            StarOutcome::IdentityOnArray => return Err(StableError::NoWitness(w)),
        }
        match witness_for(reg.cells().map(|(_, p)| p), &maps, &w)? {
            Some(wt) => killed.push(wt),
            None => unwitnessed += 1,
        }
    }

    let mut c = Certificate {
        header: header(Module::Stable, params.seed, params),
        structure: StructureData::of(&s),
        generators: maps.iter().map(|(&l, g)| record(l, g)).collect(),
        killed_words: killed,
        density_log,
        fragments: None,
        registry: Some(RegistryData::of(&reg, actions)),
        summary: Summary::default(),
    };
    c.fill_summary(unwitnessed);
    Ok(c)
}

/// Result of extending random requirements on a fresh registry.
pub struct DenseRun {
    pub structure: Structure,
    pub registry: ArrayRegistry,
    pub states: Vec<DenseExtensionState>,
}

/// Extends `count` random requirements; requirement `α` gets rows moved by
/// the `α`-th free generator of rank `rank`.
pub fn dense_states(
    seed: u64,
    rank: u32,
    dims: ArrayDims,
    count: u32,
    max_requirement: usize,
    max_columns: usize,
) -> Result<DenseRun, StableError> {
    let mut s = Structure::new(StructureKind::EqClasses, seed);
    let reg = ArrayRegistry::build(&mut s, dims, BTreeSet::new())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(count as usize);
    for alpha in 0..count {
        let g = random_permutation_requirement(&reg, &mut rng, max_requirement, max_columns);
        let f = IndexPermutation::generator(rank, alpha % rank)?;
        states.push(dense_extend(&reg, &s, GeneratorLabel::free(1, alpha), &g, &f, 1)?);
    }
    Ok(DenseRun { structure: s, registry: reg, states })
}

pub fn run_dense(params: &DenseParams) -> Result<Certificate, StableError> {
    let run = dense_states(
        params.seed,
        params.rank,
        params.dims,
        params.rank,
        params.max_requirement,
        params.max_columns,
    )?;
    let maps: BTreeMap<GeneratorLabel, PartialAutomorphism> =
        run.states.iter().map(|st| (st.label, st.result.committed().clone())).collect();
    let labels: Vec<GeneratorLabel> = maps.keys().copied().collect();
    let refs: Vec<&DenseExtensionState> = run.states.iter().collect();
    let mut killed = Vec::new();
    let mut unwitnessed = 0;
    for w in enumerate_words(&labels, params.max_word_len) {
        let symbolic = free_column_witness(&run.registry, &refs, &w)?;
        let column = symbolic.start.column;
        let d = run.registry.dims();
        let candidates = (0..d.types)
            .flat_map(|i| (0..d.rows).map(move |x| ArrayIndex::new(i, column, x)))
            .filter_map(|idx| run.registry.cell(idx));
        match witness_for(candidates, &maps, &w)? {
            Some(wt) => killed.push(wt),
            None => unwitnessed += 1,
        }
    }
    let actions = run
        .states
        .iter()
        .map(|st| action_record(st.label, &st.class_map, &st.index_perm.word))
        .collect();
    let mut c = Certificate {
        header: header(Module::Dense, params.seed, params),
        structure: StructureData::of(&run.structure),
        generators: maps.iter().map(|(&l, g)| record(l, g)).collect(),
        killed_words: killed,
        density_log: run
            .states
            .iter()
            .map(|st| DensityRecord { requirement: st.requirement.to_pairs(), label: st.label, stage: 1 })
            .collect(),
        fragments: None,
        registry: Some(RegistryData::of(&run.registry, actions)),
        summary: Summary::default(),
    };
    c.fill_summary(unwitnessed);
    Ok(c)
}
