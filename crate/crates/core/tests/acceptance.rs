//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria run one after another inside a single test so that the timing
//! limits are measured without other tests competing for the CPU.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use densefree::automorphisms::{Direction, ImagePolicy, LazyAutomorphism, PartialAutomorphism};
use densefree::certificate::{export_tree, Certificate};
use densefree::free_extension::{kill_word, witness_persists, KillConfig, Witness};
use densefree::generate::{dense_states, run_dense, run_stable, DenseParams, StableParams};
use densefree::stable::{
    abstract_label, class_apply, free_column_witness, star_extension, star_freeness_witness, star_image,
    ArrayDims, ArrayIndex, ArrayRegistry, ClassPerm, DenseExtensionState, IndexPermutation, StarAction,
    StarOutcome, WordIndex,
};
use densefree::structures::{ClassSpec, Constraint, PointId, QfType, Structure, StructureKind};
use densefree::tree::{density_requirements, TreeParams, TreeState};
use densefree::words::{enumerate_words, reduce, reduced_word_count, GeneratorLabel, Letter, ReducedWord};

const C1_MAX_LEN: usize = 5;
/// 6 + 30 + 150 + 750 + 3750 reduced words over three labels.
const C1_WORDS: usize = 4686;
const C1_LIMIT_SECS: f64 = 30.0;
const C2_EXTENSIONS: usize = 500;
const C3_LIMIT_SECS: f64 = 60.0;
const C3_WORD_LEN: usize = 4;
const C3_DENSITY_SIZE: usize = 2;
const C4_RANK: u32 = 3;
const C4_MAX_LEN: usize = 6;
const C4_WORDS: u128 = 23436;
const C4_TRIPLES: usize = 10_000;
const C4_LIMIT_SECS: f64 = 10.0;
const C5_DIMS: (u32, u32, u64) = (2, 4, 32);
const C5_MAX_LEN: usize = 4;
const C6_VALID: usize = 1000;
const C6_CORRUPT: usize = 100;
const C7_DIMS: (u32, u32, u64) = (4, 16, 64);
const C7_REQUIREMENTS: u32 = 100;
const C7_MAX_SIZE: usize = 8;
const C7_MAX_COLUMNS: usize = 5;
const C7_MAX_LEN: usize = 3;
const C7_LIMIT_SECS: f64 = 60.0;
const C8_MUTATIONS: usize = 20;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn labels3() -> Vec<GeneratorLabel> {
    (0..3).map(|i| GeneratorLabel::free(1, i)).collect()
}

struct KillRun {
    kind: StructureKind,
    structure: Structure,
    gens: BTreeMap<GeneratorLabel, LazyAutomorphism>,
    witnesses: Vec<Witness>,
}

fn all_isomorphisms(s: &Structure, gens: &BTreeMap<GeneratorLabel, LazyAutomorphism>) -> bool {
    gens.values().all(|g| s.is_partial_isomorphism(&g.committed().to_pairs()).unwrap_or(false))
}

fn criterion_1(runs: &mut Vec<KillRun>) -> Outcome {
    let t = Instant::now();
    let words = enumerate_words(&labels3(), C1_MAX_LEN);
    check(words.len() == C1_WORDS, || format!("{} words enumerated, expected {C1_WORDS}", words.len()))?;
    for kind in StructureKind::ALL {
        let mut s = Structure::new(kind, 0);
        let mut gens: BTreeMap<_, _> = labels3().into_iter().map(|l| (l, LazyAutomorphism::new(l))).collect();
        let mut witnesses = Vec::with_capacity(words.len());
        for w in &words {
            let out = kill_word(&mut s, w, &mut gens, 1, KillConfig::default()).map_err(|e| format!("{kind}: {w}: {e}"))?;
            check(out.witness.start != out.witness.end, || format!("{kind}: {w} fixes its start"))?;
            witnesses.push(out.witness);
        }
        check(all_isomorphisms(&s, &gens), || format!("{kind}: a generator is not a partial isomorphism"))?;
        runs.push(KillRun { kind, structure: s, gens, witnesses });
    }
    let secs = t.elapsed().as_secs_f64();
    check(secs < C1_LIMIT_SECS, || format!("took {secs:.2}s"))?;
    Ok(format!("{} words x 4 kinds killed in {secs:.2}s", words.len()))
}

fn criterion_2(runs: &mut [KillRun]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let labels = labels3();
    let mut total = 0;
    for run in runs.iter_mut() {
        let mut done = 0;
        while done < C2_EXTENSIONS {
            let label = *labels.choose(&mut rng).unwrap();
            let p = PointId(rng.gen_range(0..run.structure.len() as u32));
            let direction = if rng.gen_bool(0.5) { Direction::Forward } else { Direction::Backward };
            let policy = if rng.gen_bool(0.5) { ImagePolicy::Fresh } else { ImagePolicy::Reuse };
            let g = run.gens.get_mut(&label).unwrap();
            let busy = match direction {
                Direction::Forward => g.committed().in_domain(p),
                Direction::Backward => g.committed().in_range(p),
            };
            if busy {
                continue;
            }
            g.extend_to_point(&mut run.structure, p, direction, 2, policy)
                .map_err(|e| format!("{}: {e}", run.kind))?;
            done += 1;
        }
        let broken = run.witnesses.iter().filter(|w| !witness_persists(w, &run.gens).unwrap_or(false)).count();
        check(broken == 0, || format!("{}: {broken} witnesses broken", run.kind))?;
        check(all_isomorphisms(&run.structure, &run.gens), || format!("{}: extension broke a generator", run.kind))?;
        total += run.witnesses.len();
    }
    Ok(format!("{total} witnesses intact after {C2_EXTENSIONS} extensions per kind"))
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("tree.json");
    let bin = env!("CARGO_BIN_EXE_densefree");
    let gen = Command::new(bin)
        .args(["gen", "tree", "--kind", "graph", "--stages", "5", "--branching", "2", "--out"])
        .arg(&path)
        .output()
        .map_err(|e| e.to_string())?;
    check(gen.status.code() == Some(0), || format!("gen exited {:?}", gen.status.code()))?;
    let ver = Command::new(bin).arg("verify").arg(&path).output().map_err(|e| e.to_string())?;
    check(ver.status.code() == Some(0), || {
        format!("verify exited {:?}: {}", ver.status.code(), String::from_utf8_lossy(&ver.stdout))
    })?;

    let params = TreeParams { kind: StructureKind::RandomGraph, stages: 5, branching: 2, ..TreeParams::default() };
    let st = TreeState::run(params).map_err(|e| e.to_string())?;
    let from_cli = Certificate::from_json(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    check(export_tree(&st) == from_cli, || "in-process run differs from the CLI run".into())?;

    check(st.broken_witnesses().is_empty(), || format!("{} broken witnesses", st.broken_witnesses().len()))?;
    let mut required = 0;
    for stage in [2, 3] {
        for w in enumerate_words(&st.active_labels(stage), C3_WORD_LEN) {
            check(st.is_consumed(&w), || format!("stage {stage}: {w} was never killed"))?;
            required += 1;
        }
    }
    let mut requirements = 0;
    for frag in &st.fragment_history {
        let frag: BTreeSet<PointId> = frag.iter().copied().collect();
        for req in density_requirements(&st.structure, &frag, C3_DENSITY_SIZE) {
            let extended = st
                .density_log
                .iter()
                .any(|e| e.requirement == req && req.is_subset_of(st.gens[&e.label].committed()));
            check(extended, || format!("requirement {:?} has no generator", req.to_pairs()))?;
            requirements += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(secs < C3_LIMIT_SECS, || format!("took {secs:.2}s"))?;
    Ok(format!(
        "verify exit 0; {} witnesses intact, {required} words over stage-2/3 labels killed, {requirements} requirements extended, {secs:.2}s",
        st.witnesses.len()
    ))
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let labels: Vec<_> = (0..C4_RANK).map(abstract_label).collect();
    let words = enumerate_words(&labels, C4_MAX_LEN);
    let formula: u128 = (1..=C4_MAX_LEN as u32).map(|l| 6 * 5u128.pow(l - 1)).sum();
    let counted: u128 = (1..=C4_MAX_LEN as u32).map(|l| reduced_word_count(C4_RANK as u64, l)).sum();
    check(words.len() as u128 == C4_WORDS && formula == C4_WORDS && counted == C4_WORDS, || {
        format!("{} words, formula {formula}", words.len())
    })?;
    for w in &words {
        let h = IndexPermutation::new(C4_RANK, w.clone()).map_err(|e| e.to_string())?;
        check(h.apply(0).map_err(|e| e.to_string())? != 0, || format!("{w} fixes 0"))?;
    }
    let index = WordIndex::new(C4_RANK).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..C4_TRIPLES {
        let u = index.word_of(rng.gen_range(0..=C4_WORDS as u64)).map_err(|e| e.to_string())?;
        let v = index.word_of(rng.gen_range(0..=C4_WORDS as u64)).map_err(|e| e.to_string())?;
        let n = rng.gen_range(0..=C4_WORDS as u64);
        let hu = IndexPermutation::new(C4_RANK, u.clone()).map_err(|e| e.to_string())?;
        let hv = IndexPermutation::new(C4_RANK, v.clone()).map_err(|e| e.to_string())?;
        let huv = IndexPermutation::new(C4_RANK, u.concat(&v)).map_err(|e| e.to_string())?;
        let lhs = huv.apply(n).map_err(|e| e.to_string())?;
        let rhs = hu.apply(hv.apply(n).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        check(lhs == rhs, || format!("h_(uv)({n}) != h_u(h_v({n})) for u={u}, v={v}"))?;
    }
    let secs = t.elapsed().as_secs_f64();
    check(secs < C4_LIMIT_SECS, || format!("took {secs:.2}s"))?;
    Ok(format!("{} words move 0; {C4_TRIPLES} triples obey the homomorphism law; {secs:.2}s", words.len()))
}

/// Row word induced by `w`: letters are applied first-first, so the group
/// element is the reversed word.
fn induced_row_word(w: &ReducedWord, to_abstract: &BTreeMap<GeneratorLabel, u32>) -> ReducedWord {
    let letters: Vec<Letter> = w
        .letters()
        .iter()
        .rev()
        .map(|l| Letter { label: abstract_label(to_abstract[&l.label]), sign: l.sign })
        .collect();
    reduce(&letters)
}

fn criterion_5() -> Outcome {
    let (t, c, r) = C5_DIMS;
    let mut s = Structure::new(StructureKind::EqClasses, 0);
    let reg = ArrayRegistry::build(&mut s, ArrayDims::new(t, c, r), BTreeSet::new()).map_err(|e| e.to_string())?;
    let a = GeneratorLabel::free(1, 0);
    let b = GeneratorLabel::free(1, 1);
    let swap: ClassPerm = (0..t).map(|i| (i, (i + 1) % t)).collect();
    let stars = BTreeMap::from([
        (a, StarAction { classes: ClassPerm::new(), rows: IndexPermutation::generator(2, 0).unwrap() }),
        (b, StarAction { classes: swap.clone(), rows: IndexPermutation::generator(2, 1).unwrap() }),
    ]);
    let maps: BTreeMap<GeneratorLabel, PartialAutomorphism> = stars
        .iter()
        .map(|(&l, st)| (l, star_extension(&reg, &PartialAutomorphism::new(), &st.classes, &st.rows, false).unwrap()))
        .collect();
    let to_abstract = BTreeMap::from([(a, 0), (b, 1)]);
    let index = WordIndex::new(2).unwrap();
    let mut disagreements = 0;
    let mut checks = 0;
    let words = enumerate_words(&[a, b], C5_MAX_LEN);
    for w in &words {
        let row_word = induced_row_word(w, &to_abstract);
        // class moves by the swap once per b-letter, in either direction
        let b_letters = w.letters().iter().filter(|l| l.label == b).count() as u32;
        for (idx, p) in reg.cells() {
            checks += 1;
            let sym = star_image(&stars, w, idx).map_err(|e| e.to_string())?;
            let row = index
                .index_of(&row_word.concat(&index.word_of(idx.row).unwrap()))
                .map_err(|e| e.to_string())?;
            let class = (idx.type_idx + b_letters) % t;
            if sym != ArrayIndex::new(class, idx.column, row) {
                disagreements += 1;
            }
            let concrete = densefree::words::evaluate(w, &maps, p).map_err(|e| e.to_string())?;
            if let Some(q) = concrete {
                if reg.index_of(q) != Some(sym) {
                    disagreements += 1;
                }
            }
        }
        match star_freeness_witness(&reg, &stars, w).map_err(|e| e.to_string())? {
            StarOutcome::Moved(wt) => {
                if star_image(&stars, w, wt.start).unwrap() != wt.end || wt.start == wt.end {
                    disagreements += 1;
                }
            }
            StarOutcome::IdentityOnArray => disagreements += 1,
        }
        let _ = class_apply(&swap, 0);
    }
    check(disagreements == 0, || format!("{disagreements} disagreements"))?;
    Ok(format!("{} words x {} cells, {checks} checks, 0 disagreements", words.len(), reg.cells().count()))
}

/// A random class-coherent partial automorphism of the base and the class
/// permutation it follows.
fn random_base_map(s: &Structure, reg: &ArrayRegistry, rng: &mut impl Rng) -> (PartialAutomorphism, ClassPerm) {
    let t = reg.dims().types;
    let mut order: Vec<u32> = (0..t).collect();
    order.shuffle(rng);
    let sigma: ClassPerm = (0..t).zip(order).collect();
    let base_of = |c: u32| -> Vec<PointId> {
        s.class_members(c).iter().copied().filter(|p| reg.base().contains(p)).collect()
    };
    let mut pairs = Vec::new();
    for c in 0..t {
        let mut from = base_of(c);
        let mut to = base_of(sigma[&c]);
        from.shuffle(rng);
        to.shuffle(rng);
        let k = rng.gen_range(0..=from.len().min(to.len()));
        pairs.extend(from.into_iter().zip(to).take(k));
    }
    (PartialAutomorphism::from_pairs(pairs).unwrap(), sigma)
}

fn criterion_6() -> Outcome {
    let mut s = Structure::new(StructureKind::EqClasses, 0);
    let reg = ArrayRegistry::with_base(&mut s, ArrayDims::new(3, 4, 64), 4).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let index = WordIndex::new(2).unwrap();
    let mut unions = Vec::new();
    for trial in 0..C6_VALID {
        let (g, sigma) = random_base_map(&s, &reg, &mut rng);
        let h = IndexPermutation::new(2, index.word_of(rng.gen_range(0..17)).unwrap()).unwrap();
        let u = star_extension(&reg, &g, &sigma, &h, false).map_err(|e| e.to_string())?;
        check(s.is_partial_isomorphism(&u.to_pairs()).unwrap(), || format!("trial {trial}: union rejected"))?;
        unions.push(u);
    }
    let mut rejected = 0;
    for (trial, u) in unions.iter().take(C6_CORRUPT).enumerate() {
        let pairs = u.to_pairs();
        let (x1, y1) = pairs[rng.gen_range(0..pairs.len())];
        let others: Vec<usize> =
            (0..pairs.len()).filter(|&i| s.class_of(pairs[i].0) != s.class_of(x1)).collect();
        let j = *others.choose(&mut rng).ok_or_else(|| format!("trial {trial}: one class only"))?;
        let target = s.class_of(y1).unwrap();
        let z = s
            .create_point(&QfType::new(Vec::new(), Constraint::Class(ClassSpec::Tag(target))))
            .map_err(|e| e.to_string())?;
        let mut corrupted = pairs.clone();
        corrupted[j].1 = z;
        if !s.is_partial_isomorphism(&corrupted).unwrap() {
            rejected += 1;
        }
    }
    check(rejected == C6_CORRUPT, || format!("only {rejected}/{C6_CORRUPT} corrupted unions rejected"))?;
    Ok(format!("{C6_VALID} unions accepted, {rejected}/{C6_CORRUPT} corrupted unions rejected"))
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let (ty, co, ro) = C7_DIMS;
    let run = dense_states(7, C7_REQUIREMENTS, ArrayDims::new(ty, co, ro), C7_REQUIREMENTS, C7_MAX_SIZE, C7_MAX_COLUMNS)
        .map_err(|e| e.to_string())?;
    for st in &run.states {
        check(st.requirement.is_subset_of(st.result.committed()), || format!("{} lost its requirement", st.label))?;
        check(
            run.structure.is_partial_isomorphism(&st.result.committed().to_pairs()).unwrap(),
            || format!("{} is not a partial isomorphism", st.label),
        )?;
    }
    let masks: Vec<u64> = run
        .states
        .iter()
        .map(|st| st.untouched_columns.iter().fold(0u64, |m, &z| m | 1 << z))
        .collect();
    let placeholders: Vec<GeneratorLabel> = (0..3).map(|i| GeneratorLabel::free(9, i)).collect();
    let templates = enumerate_words(&placeholders, C7_MAX_LEN);
    let n = run.states.len();
    let mut subsets = 0u64;
    let mut witnessed = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                subsets += 1;
                let common = masks[i] & masks[j] & masks[k];
                check(common != 0, || format!("states {i},{j},{k} share no untouched column"))?;
                let trio: [&DenseExtensionState; 3] = [&run.states[i], &run.states[j], &run.states[k]];
                let relabel: BTreeMap<GeneratorLabel, GeneratorLabel> =
                    placeholders.iter().copied().zip(trio.iter().map(|s| s.label)).collect();
                for tw in &templates {
                    let letters: Vec<Letter> =
                        tw.letters().iter().map(|l| Letter { label: relabel[&l.label], sign: l.sign }).collect();
                    let w = ReducedWord::try_from_letters(letters).unwrap();
                    let wt = free_column_witness(&run.registry, &trio, &w).map_err(|e| format!("{w}: {e}"))?;
                    let involved: u64 = trio
                        .iter()
                        .zip([masks[i], masks[j], masks[k]])
                        .filter(|(s, _)| w.labels().any(|l| l == s.label))
                        .fold(u64::MAX, |m, (_, mask)| m & mask);
                    check(wt.start.column == involved.trailing_zeros() && wt.end != wt.start, || {
                        format!("{w}: column {} witness {:?}", wt.start.column, wt.end)
                    })?;
                    witnessed += 1;
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(secs < C7_LIMIT_SECS, || format!("took {secs:.2}s"))?;
    Ok(format!("{n} requirements extended; {subsets} triples share a column; {witnessed} column witnesses; {secs:.2}s"))
}

/// Applies one random single-field edit; returns its description and the
/// text the verifier report must contain.
fn mutate(c: &mut Certificate, rng: &mut impl Rng) -> (String, String) {
    let n = c.structure.point_count;
    let other = |p: PointId, rng: &mut dyn rand::RngCore| loop {
        let q = PointId(rng.gen_range(0..n));
        if q != p {
            return q;
        }
    };
    match rng.gen_range(0..4) {
        0 => {
            let k = rng.gen_range(0..c.killed_words.len());
            c.killed_words[k].end = other(c.killed_words[k].end, rng);
            (format!("end of witness {k}"), format!("word #{k} "))
        }
        1 => {
            let k = rng.gen_range(0..c.killed_words.len());
            c.killed_words[k].start = other(c.killed_words[k].start, rng);
            (format!("start of witness {k}"), format!("word #{k} "))
        }
        2 => {
            let nonempty: Vec<usize> =
                (0..c.density_log.len()).filter(|&i| !c.density_log[i].requirement.is_empty()).collect();
            let k = *nonempty.choose(rng).unwrap();
            let req = &mut c.density_log[k].requirement;
            let j = rng.gen_range(0..req.len());
            req[j].1 = other(req[j].1, rng);
            (format!("image in requirement {k}"), format!("requirement #{k} "))
        }
        _ => {
            let big: Vec<usize> = (0..c.generators.len()).filter(|&i| c.generators[i].pairs.len() >= 2).collect();
            let g = &mut c.generators[*big.choose(rng).unwrap()];
            let i = rng.gen_range(0..g.pairs.len());
            let j = (i + 1 + rng.gen_range(0..g.pairs.len() - 1)) % g.pairs.len();
            g.pairs[j].1 = g.pairs[i].1;
            (format!("pair {j} of {}", g.label), format!("generator {}: not a partial isomorphism", g.label))
        }
    }
}

fn criterion_8() -> Outcome {
    let tree = TreeState::run(TreeParams { stages: 4, words_per_stage: 300, ..TreeParams::default() })
        .map_err(|e| e.to_string())?;
    let certs = [
        export_tree(&tree),
        run_stable(&StableParams::default()).map_err(|e| e.to_string())?,
        run_dense(&DenseParams::default()).map_err(|e| e.to_string())?,
    ];
    for c in &certs {
        let first = c.to_json();
        let second = Certificate::from_json(&first).map_err(|e| e.to_string())?.to_json();
        check(first == second, || format!("{:?} certificate does not round-trip", c.header.module))?;
    }

    let bin = env!("CARGO_BIN_EXE_densefree");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for m in 0..C8_MUTATIONS {
        let mut c = certs[0].clone();
        let (mutation, expected) = mutate(&mut c, &mut rng);
        let path = dir.path().join(format!("m{m}.json"));
        std::fs::write(&path, c.to_json()).map_err(|e| e.to_string())?;
        let out = Command::new(bin).arg("verify").arg(&path).output().map_err(|e| e.to_string())?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        check(out.status.code() == Some(1), || format!("{mutation}: exit {:?}", out.status.code()))?;
        check(stdout.contains(&expected), || format!("{mutation}: report does not name {expected:?}:\n{stdout}"))?;
    }
    Ok(format!("3 certificates round-trip byte-identically; {C8_MUTATIONS} mutations each exit 1 and are named"))
}

fn run(n: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {n} ({name}): {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL criterion {n} ({name}): {detail}");
            false
        }
    }
}

fn main() {
    let mut runs = Vec::new();
    let results = [
        run(1, "word killing on every kind", || criterion_1(&mut runs)),
        run(2, "witness persistence", || criterion_2(&mut runs)),
        run(3, "tree construction", criterion_3),
        run(4, "regular representation", criterion_4),
        run(5, "star oracle equivalence", criterion_5),
        run(6, "unions of independent maps", criterion_6),
        run(7, "dense extension columns", criterion_7),
        run(8, "certificate integrity", criterion_8),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
