//! Re-checks a certificate using nothing but its own contents.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use crate::certificate::{Certificate, CertificateError, Module};
use crate::structures::{PointId, Structure};
use crate::tree::density_requirements;
use crate::words::{reduced_word_count, GeneratorLabel, ReducedWord, Role, Sign};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WordFailure {
    pub index: usize,
    pub word: ReducedWord,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RequirementFailure {
    /// Position in the density log, or `None` for a requirement missing from it.
    pub index: Option<usize>,
    pub label: Option<GeneratorLabel>,
    pub requirement: Vec<(PointId, PointId)>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GeneratorFailure {
    pub label: GeneratorLabel,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FreenessReport {
    pub words_checked: u64,
    pub witnessed: u64,
    pub failures: Vec<WordFailure>,
    /// Reduced words up to the length bound that no witness covers.
    pub out_of_budget: u128,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DensityReport {
    pub requirements_checked: u64,
    pub satisfied: u64,
    pub failures: Vec<RequirementFailure>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IsomorphismReport {
    pub generators_checked: u64,
    pub failures: Vec<GeneratorFailure>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ChainReport {
    pub links_checked: u64,
    pub failures: Vec<GeneratorFailure>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub freeness: FreenessReport,
    pub density: DensityReport,
    pub isomorphism: IsomorphismReport,
    pub chain: ChainReport,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.freeness.failures.is_empty()
            && self.density.failures.is_empty()
            && self.isomorphism.failures.is_empty()
            && self.chain.failures.is_empty()
    }
}

/// Generator graphs as raw lookup tables; conflicting pairs are kept as
/// given and reported by the isomorphism check.
struct Graphs {
    fwd: BTreeMap<GeneratorLabel, BTreeMap<PointId, PointId>>,
    bwd: BTreeMap<GeneratorLabel, BTreeMap<PointId, PointId>>,
}

impl Graphs {
    fn new(c: &Certificate) -> Self {
        let mut fwd = BTreeMap::new();
        let mut bwd = BTreeMap::new();
        for g in &c.generators {
            let f: &mut BTreeMap<_, _> = fwd.entry(g.label).or_default();
            let b: &mut BTreeMap<_, _> = bwd.entry(g.label).or_default();
            for &(x, y) in &g.pairs {
                f.entry(x).or_insert(y);
                b.entry(y).or_insert(x);
            }
        }
        Graphs { fwd, bwd }
    }

    fn eval(&self, w: &ReducedWord, p: PointId) -> Result<Option<PointId>, GeneratorLabel> {
        let mut cur = p;
        for l in w.letters() {
            let table = match l.sign {
                Sign::Plus => self.fwd.get(&l.label),
                Sign::Minus => self.bwd.get(&l.label),
            }
            .ok_or(l.label)?;
            match table.get(&cur) {
                Some(&n) => cur = n,
                None => return Ok(None),
            }
        }
        Ok(Some(cur))
    }
}

pub fn rebuild_structure(c: &Certificate) -> Result<Structure, CertificateError> {
    let s = c.structure.rebuild(c.header.kind, c.header.seed)?;
    if let Some(reg) = &c.registry {
        reg.rebuild(&s)?;
    }
    Ok(s)
}

pub fn verify_isomorphism(c: &Certificate, s: &Structure) -> IsomorphismReport {
    let mut report = IsomorphismReport::default();
    let mut seen = BTreeSet::new();
    for g in &c.generators {
        report.generators_checked += 1;
        let reason = if !seen.insert(g.label) {
            Some("generator listed twice".to_string())
        } else {
            match s.is_partial_isomorphism(&g.pairs) {
                Ok(true) => None,
                Ok(false) => Some("not a partial isomorphism".to_string()),
                Err(e) => Some(e.to_string()),
            }
        };
        if let Some(reason) = reason {
            report.failures.push(GeneratorFailure { label: g.label, reason });
        }
    }
    report
}

/// Re-evaluates every claimed witness. Reduced words of length at most
/// `max_len` over the certificate's labels that carry no witness are counted
/// as out of budget.
pub fn verify_freeness(c: &Certificate, max_len: usize) -> FreenessReport {
    let graphs = Graphs::new(c);
    let mut report = FreenessReport::default();
    let mut witnessed_words = HashSet::new();
    for (index, wt) in c.killed_words.iter().enumerate() {
        report.words_checked += 1;
        let fail = |reason: String| WordFailure { index, word: wt.word.clone(), reason };
        if wt.word.is_empty() {
            report.failures.push(fail("empty word".into()));
            continue;
        }
        if wt.start == wt.end {
            report.failures.push(fail(format!("start and end are both {}", wt.start)));
            continue;
        }
        match graphs.eval(&wt.word, wt.start) {
            Err(l) => report.failures.push(fail(format!("unknown generator {l}"))),
            Ok(None) => report.failures.push(fail(format!("undefined at {}", wt.start))),
            Ok(Some(q)) if q != wt.end => {
                report.failures.push(fail(format!("sends {} to {q}, not {}", wt.start, wt.end)))
            }
            Ok(Some(_)) => {
                report.witnessed += 1;
                if wt.word.len() <= max_len {
                    witnessed_words.insert(&wt.word);
                }
            }
        }
    }
    let k = c.generators.iter().map(|g| g.label).collect::<BTreeSet<_>>().len() as u64;
    let total: u128 = (1..=max_len as u32).map(|l| reduced_word_count(k, l)).sum();
    report.out_of_budget = total.saturating_sub(witnessed_words.len() as u128);
    report
}

/// Each logged requirement must be contained in its generator. Tree
/// certificates must also log every small partial isomorphism of each
/// recorded fragment.
pub fn verify_density(c: &Certificate, s: &Structure) -> DensityReport {
    let graphs = Graphs::new(c);
    let mut report = DensityReport::default();
    for (index, e) in c.density_log.iter().enumerate() {
        report.requirements_checked += 1;
        let fail = |reason: String| RequirementFailure {
            index: Some(index),
            label: Some(e.label),
            requirement: e.requirement.clone(),
            reason,
        };
        let Some(table) = graphs.fwd.get(&e.label) else {
            report.failures.push(fail(format!("unknown generator {}", e.label)));
            continue;
        };
        match e.requirement.iter().find(|(a, b)| table.get(a) != Some(b)) {
            Some((a, b)) => report.failures.push(fail(format!("{} lacks {a} ↦ {b}", e.label))),
            None => report.satisfied += 1,
        }
    }
    if let (Module::Tree, Some(fragments)) = (c.header.module, &c.fragments) {
        let size = c.header.parameters.get("density_size").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
        let logged: HashSet<&Vec<(PointId, PointId)>> = c.density_log.iter().map(|e| &e.requirement).collect();
        for frag in fragments {
            let frag: BTreeSet<PointId> = frag.iter().copied().filter(|&p| s.contains(p)).collect();
            for req in density_requirements(s, &frag, size) {
                let pairs = req.to_pairs();
                if !logged.contains(&pairs) {
                    report.failures.push(RequirementFailure {
                        index: None,
                        label: None,
                        requirement: pairs,
                        reason: "requirement on a recorded fragment is not logged".into(),
                    });
                }
            }
        }
    }
    report
}

/// In tree certificates, free generator `(s, i)` must extend `(s - 1, i)`.
pub fn verify_chains(c: &Certificate) -> ChainReport {
    let mut report = ChainReport::default();
    if c.header.module != Module::Tree {
        return report;
    }
    let graphs = Graphs::new(c);
    for (label, table) in &graphs.fwd {
        if label.role != Role::Free || label.level < 2 {
            continue;
        }
        let parent = GeneratorLabel::free(label.level - 1, label.index);
        let Some(ptable) = graphs.fwd.get(&parent) else { continue };
        report.links_checked += 1;
        if let Some((a, b)) = ptable.iter().find(|(a, b)| table.get(a) != Some(b)) {
            report.failures.push(GeneratorFailure {
                label: *label,
                reason: format!("does not extend {parent} at {a} ↦ {b}"),
            });
        }
    }
    report
}

pub fn verify(c: &Certificate, max_len: usize) -> Result<VerifyReport, CertificateError> {
    let s = rebuild_structure(c)?;
    Ok(VerifyReport {
        freeness: verify_freeness(c, max_len),
        density: verify_density(c, &s),
        isomorphism: verify_isomorphism(c, &s),
        chain: verify_chains(c),
    })
}
