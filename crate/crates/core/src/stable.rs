//! Array constructions on the equivalence-class structure.
//!
//! Classes play the role of types. An [`ArrayRegistry`] is a grid of fresh
//! points `(i, ζ, ξ)` where the point lies in class `i`, `ζ` is a column and
//! `ξ` a row. Rows are moved by [`IndexPermutation`]s, which realize the left
//! regular representation of a free group of finite rank on ℕ, so a word
//! over generators moves rows exactly when the matching group element is not
//! the identity.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automorphisms::{AutomorphismError, LazyAutomorphism, PartialAutomorphism};
use crate::structures::{ClassSpec, Constraint, PointId, QfType, Structure, StructureError, StructureKind};
use crate::words::{evaluate_with, GeneratorLabel, Letter, ReducedWord, Role, Sign, WordError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StableError {
    #[error("array constructions need an equivalence structure, not {0}")]
    WrongKind(StructureKind),
    #[error("registry dimensions must be positive")]
    EmptyDims,
    #[error("rank must be positive")]
    ZeroRank,
    #[error("letter {0} is not one of the rank-{1} generators")]
    ForeignLetter(Letter, u32),
    #[error("index arithmetic overflowed")]
    IndexOverflow,
    #[error("row {row} of cell {cell:?} leaves the registry")]
    RowOutOfRange { cell: ArrayIndex, row: u64 },
    #[error("class map is not a permutation of the registry classes")]
    NotAPermutation,
    #[error("class {0} is sent into more than one class")]
    NotClassCoherent(u32),
    #[error("no point of class {0} is in the domain")]
    ClassNotRepresented(u32),
    #[error("domain and range differ")]
    DomainNotRange,
    #[error("requirement is not a partial isomorphism")]
    NotIsomorphism,
    #[error("point {0} is not in the base")]
    NotOnBase(PointId),
    #[error("no column is untouched by every generator")]
    NoCommonColumn,
    #[error("word {0} fixes the chosen cell")]
    NoWitness(ReducedWord),
    #[error("no state for generator {0}")]
    MissingLabel(GeneratorLabel),
    #[error(transparent)]
    Automorphism(#[from] AutomorphismError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// Label of the `j`-th abstract generator of the free group acting on rows.
pub fn abstract_label(j: u32) -> GeneratorLabel {
    GeneratorLabel::free(0, j)
}

/// Length-lex bijection between ℕ and the reduced words of rank `rank`.
/// Letters are ordered `a_0, a_0⁻¹, a_1, a_1⁻¹, …`; `ε` has index 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WordIndex {
    rank: u32,
}

impl WordIndex {
    pub fn new(rank: u32) -> Result<Self, StableError> {
        if rank == 0 {
            return Err(StableError::ZeroRank);
        }
        Ok(WordIndex { rank })
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    /// Number of reduced words of length `len`.
    fn count(&self, len: u32) -> Option<u64> {
        if len == 0 {
            return Some(1);
        }
        let k2 = 2 * self.rank as u64;
        (k2 - 1).checked_pow(len - 1)?.checked_mul(k2)
    }

    fn code(&self, l: &Letter) -> Result<u64, StableError> {
        if l.label.level != 0 || l.label.index >= self.rank || l.label.role != Role::Free {
            return Err(StableError::ForeignLetter(*l, self.rank));
        }
        Ok(2 * l.label.index as u64 + matches!(l.sign, Sign::Minus) as u64)
    }

    fn letter(code: u64) -> Letter {
        let label = abstract_label((code / 2) as u32);
        if code.is_multiple_of(2) {
            Letter::pos(label)
        } else {
            Letter::neg(label)
        }
    }

    pub fn index_of(&self, w: &ReducedWord) -> Result<u64, StableError> {
        let len = w.len() as u32;
        let mut offset = 0u64;
        for l in 0..len {
            offset = offset
                .checked_add(self.count(l).ok_or(StableError::IndexOverflow)?)
                .ok_or(StableError::IndexOverflow)?;
        }
        let mut value = 0u64;
        let mut prev: Option<u64> = None;
        for letter in w.letters() {
            let c = self.code(letter)?;
            let digit = match prev {
                None => c,
                Some(p) => c - (c > (p ^ 1)) as u64,
            };
            let radix = if prev.is_none() { 0 } else { 2 * self.rank as u64 - 1 };
            value = value
                .checked_mul(radix)
                .and_then(|v| v.checked_add(digit))
                .ok_or(StableError::IndexOverflow)?;
            prev = Some(c);
        }
        offset.checked_add(value).ok_or(StableError::IndexOverflow)
    }

    /// `(length, offset of that length, position within it)` for index `n`.
    fn locate(&self, n: u64) -> (u32, u64, u64) {
        let mut offset = 0u64;
        let mut len = 0u32;
        loop {
            match self.count(len) {
                Some(c) if n - offset >= c => {
                    offset += c;
                    len += 1;
                }
                _ => return (len, offset, n - offset),
            }
        }
    }

    fn offset_of_len(&self, len: u32) -> Option<u64> {
        (0..len).try_fold(0u64, |acc, l| acc.checked_add(self.count(l)?))
    }

    /// `index(x · word_of(n))` for the letter with code `code`, computed
    /// without building any word.
    fn left_multiply(&self, code: u64, n: u64) -> Result<u64, StableError> {
        let overflow = || StableError::IndexOverflow;
        let r = 2 * self.rank as u64 - 1;
        let (len, _, v) = self.locate(n);
        if len == 0 {
            return Ok(1 + code);
        }
        let p = r.pow(len - 1);
        let (c0, rest) = (v / p, v % p);
        if c0 == code ^ 1 {
            if len == 1 {
                return Ok(0);
            }
            let p2 = r.pow(len - 2);
            let (r1, rest2) = (rest / p2, rest % p2);
            let code1 = r1 + (r1 >= (c0 ^ 1)) as u64;
            let value = code1 * p2 + rest2;
            return self.offset_of_len(len - 1).and_then(|o| o.checked_add(value)).ok_or_else(overflow);
        }
        let r0 = c0 - (c0 > (code ^ 1)) as u64;
        let value = code
            .checked_mul(p.checked_mul(r).ok_or_else(overflow)?)
            .and_then(|x| x.checked_add(r0 * p))
            .and_then(|x| x.checked_add(rest))
            .ok_or_else(overflow)?;
        self.offset_of_len(len + 1).and_then(|o| o.checked_add(value)).ok_or_else(overflow)
    }

    pub fn word_of(&self, n: u64) -> Result<ReducedWord, StableError> {
        let mut rest = n;
        let mut len = 0u32;
        loop {
            match self.count(len) {
                Some(c) if rest >= c => {
                    rest -= c;
                    len += 1;
                }
                _ => break,
            }
        }
        if len == 0 {
            return Ok(ReducedWord::empty());
        }
        let radix = 2 * self.rank as u64 - 1;
        let mut digits = vec![0u64; len as usize];
        for d in digits.iter_mut().skip(1).rev() {
            *d = rest % radix;
            rest /= radix;
        }
        digits[0] = rest;
        let mut letters = Vec::with_capacity(len as usize);
        let mut prev: Option<u64> = None;
        for d in digits {
            let c = match prev {
                None => d,
                Some(p) => d + (d >= (p ^ 1)) as u64,
            };
            letters.push(Self::letter(c));
            prev = Some(c);
        }
        Ok(ReducedWord::try_from_letters(letters).expect("decoded words are reduced"))
    }
}

/// The permutation `n ↦ index(w · word_of(n))` of ℕ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPermutation {
    pub rank: u32,
    pub word: ReducedWord,
}

impl IndexPermutation {
    pub fn new(rank: u32, word: ReducedWord) -> Result<Self, StableError> {
        let index = WordIndex::new(rank)?;
        for l in word.letters() {
            index.code(l)?;
        }
        Ok(IndexPermutation { rank, word })
    }

    pub fn identity(rank: u32) -> Result<Self, StableError> {
        Self::new(rank, ReducedWord::empty())
    }

    /// Left multiplication by the `j`-th generator.
    pub fn generator(rank: u32, j: u32) -> Result<Self, StableError> {
        Self::new(rank, ReducedWord::try_from_letters(vec![Letter::pos(abstract_label(j))]).expect("one letter"))
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    pub fn inverse(&self) -> Self {
        IndexPermutation { rank: self.rank, word: self.word.inverse() }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &IndexPermutation) -> Self {
        IndexPermutation { rank: self.rank, word: self.word.concat(&other.word) }
    }

    pub fn apply(&self, n: u64) -> Result<u64, StableError> {
        let index = WordIndex { rank: self.rank };
        self.word.letters().iter().rev().try_fold(n, |m, l| index.left_multiply(index.code(l)?, m))
    }

    pub fn apply_inverse(&self, n: u64) -> Result<u64, StableError> {
        let index = WordIndex { rank: self.rank };
        self.word.letters().iter().try_fold(n, |m, l| index.left_multiply(index.code(l)? ^ 1, m))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArrayIndex {
    pub type_idx: u32,
    pub column: u32,
    pub row: u64,
}

impl ArrayIndex {
    pub fn new(type_idx: u32, column: u32, row: u64) -> Self {
        ArrayIndex { type_idx, column, row }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayDims {
    pub types: u32,
    pub columns: u32,
    pub rows: u64,
}

impl ArrayDims {
    pub fn new(types: u32, columns: u32, rows: u64) -> Self {
        ArrayDims { types, columns, rows }
    }

    pub fn contains(&self, idx: ArrayIndex) -> bool {
        idx.type_idx < self.types && idx.column < self.columns && idx.row < self.rows
    }

    fn offset(&self, idx: ArrayIndex) -> usize {
        ((idx.type_idx as u64 * self.columns as u64 + idx.column as u64) * self.rows + idx.row) as usize
    }
}

/// A grid of distinct fresh points; cell `(i, ζ, ξ)` lies in class `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrayRegistry {
    dims: ArrayDims,
    cells: Vec<PointId>,
    by_point: HashMap<PointId, ArrayIndex>,
    base: BTreeSet<PointId>,
}

impl ArrayRegistry {
    /// Adds one fresh point per cell, in `(i, ζ, ξ)` order. Classes
    /// `0..dims.types` are created if missing.
    pub fn build(s: &mut Structure, dims: ArrayDims, base: BTreeSet<PointId>) -> Result<Self, StableError> {
        if s.kind() != StructureKind::EqClasses {
            return Err(StableError::WrongKind(s.kind()));
        }
        if dims.types == 0 || dims.columns == 0 || dims.rows == 0 {
            return Err(StableError::EmptyDims);
        }
        for &b in &base {
            if !s.contains(b) {
                return Err(StructureError::UnknownPoint(b).into());
            }
        }
        while s.class_count() < dims.types {
            s.create_point(&QfType::new(Vec::new(), Constraint::Class(ClassSpec::Fresh)))?;
        }
        let mut cells = Vec::with_capacity((dims.types as u64 * dims.columns as u64 * dims.rows) as usize);
        let mut by_point = HashMap::new();
        for i in 0..dims.types {
            let t = QfType::new(Vec::new(), Constraint::Class(ClassSpec::Tag(i)));
            for z in 0..dims.columns {
                for x in 0..dims.rows {
                    let p = s.create_point(&t)?;
                    cells.push(p);
                    by_point.insert(p, ArrayIndex::new(i, z, x));
                }
            }
        }
        Ok(ArrayRegistry { dims, cells, by_point, base })
    }

    /// Builds `per_class` base points in each of the classes `0..dims.types`,
    /// then the array over them.
    pub fn with_base(s: &mut Structure, dims: ArrayDims, per_class: usize) -> Result<Self, StableError> {
        if s.kind() != StructureKind::EqClasses {
            return Err(StableError::WrongKind(s.kind()));
        }
        let mut base = BTreeSet::new();
        for i in 0..dims.types {
            for _ in 0..per_class {
                let spec = if i < s.class_count() { ClassSpec::Tag(i) } else { ClassSpec::Fresh };
                base.insert(s.create_point(&QfType::new(Vec::new(), Constraint::Class(spec)))?);
            }
        }
        Self::build(s, dims, base)
    }

    /// Rebuilds a registry from a cell table, checking it against `s`.
    pub fn from_cells(
        s: &Structure,
        dims: ArrayDims,
        table: &[(ArrayIndex, PointId)],
        base: BTreeSet<PointId>,
    ) -> Result<Self, StableError> {
        let total = (dims.types as u64 * dims.columns as u64 * dims.rows) as usize;
        let mut cells = vec![None; total];
        let mut by_point = HashMap::new();
        for &(idx, p) in table {
            if !dims.contains(idx) || !s.contains(p) || s.class_of(p) != Some(idx.type_idx) {
                return Err(StructureError::Malformed(format!("cell {idx:?} ↦ {p}")).into());
            }
            if by_point.insert(p, idx).is_some() || cells[dims.offset(idx)].replace(p).is_some() {
                return Err(StructureError::Malformed(format!("cell {idx:?} repeated")).into());
            }
        }
        let cells = cells
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| StructureError::Malformed("cell table is incomplete".into()))?;
        Ok(ArrayRegistry { dims, cells, by_point, base })
    }

    pub fn dims(&self) -> ArrayDims {
        self.dims
    }

    pub fn base(&self) -> &BTreeSet<PointId> {
        &self.base
    }

    pub fn cell(&self, idx: ArrayIndex) -> Option<PointId> {
        self.dims.contains(idx).then(|| self.cells[self.dims.offset(idx)])
    }

    pub fn index_of(&self, p: PointId) -> Option<ArrayIndex> {
        self.by_point.get(&p).copied()
    }

    /// All cells in `(i, ζ, ξ)` order.
    pub fn cells(&self) -> impl Iterator<Item = (ArrayIndex, PointId)> + '_ {
        let d = self.dims;
        (0..d.types).flat_map(move |i| {
            (0..d.columns).flat_map(move |z| {
                (0..d.rows).map(move |x| {
                    let idx = ArrayIndex::new(i, z, x);
                    (idx, self.cells[d.offset(idx)])
                })
            })
        })
    }
}

/// A permutation of class indices; classes not listed are fixed.
pub type ClassPerm = BTreeMap<u32, u32>;

pub fn class_apply(perm: &ClassPerm, c: u32) -> u32 {
    perm.get(&c).copied().unwrap_or(c)
}

pub fn class_inverse(perm: &ClassPerm) -> ClassPerm {
    perm.iter().map(|(&a, &b)| (b, a)).collect()
}

fn is_permutation(perm: &ClassPerm) -> bool {
    let targets: BTreeSet<u32> = perm.values().copied().collect();
    targets.len() == perm.len() && perm.keys().all(|k| targets.contains(k))
}

/// The permutation of `classes` induced by `g`: `c ↦ c'` iff `g` sends the
/// members of class `c` it is defined on into class `c'`.
pub fn type_action(s: &Structure, g: &PartialAutomorphism, classes: &[u32]) -> Result<ClassPerm, StableError> {
    let mut perm = ClassPerm::new();
    for &c in classes {
        let mut target = None;
        for &m in s.class_members(c) {
            if let Some(img) = g.get(m) {
                let ci = s.class_of(img).ok_or(StructureError::UnknownPoint(img))?;
                match target {
                    None => target = Some(ci),
                    Some(t) if t != ci => return Err(StableError::NotClassCoherent(c)),
                    _ => {}
                }
            }
        }
        perm.insert(c, target.ok_or(StableError::ClassNotRepresented(c))?);
    }
    if !is_permutation(&perm) {
        return Err(StableError::NotAPermutation);
    }
    Ok(perm)
}

/// Class map of `g` on every class it meets, without representation checks.
fn met_class_map(s: &Structure, g: &PartialAutomorphism) -> Result<ClassPerm, StableError> {
    let mut perm = ClassPerm::new();
    for (a, b) in g.pairs() {
        let (ca, cb) = (s.class_of(a).unwrap_or(u32::MAX), s.class_of(b).unwrap_or(u32::MAX));
        if *perm.entry(ca).or_insert(cb) != cb {
            return Err(StableError::NotClassCoherent(ca));
        }
    }
    Ok(perm)
}

/// `g` together with `(i, ζ, ξ) ↦ (fg(i), ζ, h(ξ))` on every cell. Cells whose
/// image row leaves the registry are skipped, or rejected if `strict`.
pub fn star_extension(
    reg: &ArrayRegistry,
    g: &PartialAutomorphism,
    fg: &ClassPerm,
    h: &IndexPermutation,
    strict: bool,
) -> Result<PartialAutomorphism, StableError> {
    let types = reg.dims.types;
    let full: ClassPerm = (0..types).map(|i| (i, class_apply(fg, i))).collect();
    if !is_permutation(&full) || fg.keys().any(|&k| k >= types) {
        return Err(StableError::NotAPermutation);
    }
    for (a, b) in g.pairs() {
        for p in [a, b] {
            if !reg.base.contains(&p) {
                return Err(StableError::NotOnBase(p));
            }
        }
    }
    let mut out = g.clone();
    for (idx, p) in reg.cells() {
        let row = h.apply(idx.row)?;
        let target = ArrayIndex::new(full[&idx.type_idx], idx.column, row);
        match reg.cell(target) {
            Some(q) => {
                out.try_insert(p, q)?;
            }
            None if strict => return Err(StableError::RowOutOfRange { cell: idx, row }),
            None => {}
        }
    }
    Ok(out)
}

/// The class and row action of one star generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarAction {
    pub classes: ClassPerm,
    pub rows: IndexPermutation,
}

/// Image of `idx` under `w`, letting rows run past the registry.
pub fn star_image(
    stars: &BTreeMap<GeneratorLabel, StarAction>,
    w: &ReducedWord,
    idx: ArrayIndex,
) -> Result<ArrayIndex, StableError> {
    star_image_with(|l| stars.get(l).map(|st| (&st.classes, &st.rows)), w, idx)
}

fn star_image_with<'a>(
    lookup: impl Fn(&GeneratorLabel) -> Option<(&'a ClassPerm, &'a IndexPermutation)>,
    w: &ReducedWord,
    idx: ArrayIndex,
) -> Result<ArrayIndex, StableError> {
    let mut cur = idx;
    for l in w.letters() {
        let (classes, rows) = lookup(&l.label).ok_or(StableError::MissingLabel(l.label))?;
        cur = match l.sign {
            Sign::Plus => ArrayIndex::new(class_apply(classes, cur.type_idx), cur.column, rows.apply(cur.row)?),
            Sign::Minus => {
                let back = classes.iter().find(|(_, &b)| b == cur.type_idx).map_or(cur.type_idx, |(&a, _)| a);
                ArrayIndex::new(back, cur.column, rows.apply_inverse(cur.row)?)
            }
        };
    }
    Ok(cur)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayWitness {
    pub word: ReducedWord,
    pub start: ArrayIndex,
    pub end: ArrayIndex,
    pub start_point: PointId,
    /// The point at `end`, if `end` lies inside the registry.
    pub end_point: Option<PointId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StarOutcome {
    Moved(ArrayWitness),
    IdentityOnArray,
}

/// A registered cell that `w` moves, preferring one whose image is also
/// registered.
pub fn star_freeness_witness(
    reg: &ArrayRegistry,
    stars: &BTreeMap<GeneratorLabel, StarAction>,
    w: &ReducedWord,
) -> Result<StarOutcome, StableError> {
    let mut fallback = None;
    for (idx, p) in reg.cells() {
        let end = star_image(stars, w, idx)?;
        if end == idx {
            continue;
        }
        let wt = ArrayWitness { word: w.clone(), start: idx, end, start_point: p, end_point: reg.cell(end) };
        if wt.end_point.is_some() {
            return Ok(StarOutcome::Moved(wt));
        }
        fallback.get_or_insert(wt);
    }
    Ok(fallback.map_or(StarOutcome::IdentityOnArray, StarOutcome::Moved))
}

/// Bookkeeping for extending one requirement to a generator that acts
/// freely on the untouched columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseExtensionState {
    pub label: GeneratorLabel,
    pub requirement: PartialAutomorphism,
    /// Cells whose points the requirement moves or hits.
    pub touched: BTreeSet<ArrayIndex>,
    /// Points on which the closure map is a permutation.
    pub closure: BTreeSet<PointId>,
    pub closure_map: PartialAutomorphism,
    pub untouched_columns: BTreeSet<u32>,
    pub class_map: ClassPerm,
    pub index_perm: IndexPermutation,
    pub result: LazyAutomorphism,
}

/// Extends `g`, a permutation of a finite set, by `(i, ζ, ξ) ↦ (i', ζ, f(ξ))`
/// on every column that `g` does not touch.
pub fn dense_extend(
    reg: &ArrayRegistry,
    s: &Structure,
    label: GeneratorLabel,
    g: &PartialAutomorphism,
    f: &IndexPermutation,
    stage: u32,
) -> Result<DenseExtensionState, StableError> {
    let dom: BTreeSet<PointId> = g.domain().collect();
    let ran: BTreeSet<PointId> = g.range().collect();
    if dom != ran {
        return Err(StableError::DomainNotRange);
    }
    if !s.is_partial_isomorphism(&g.to_pairs())? {
        return Err(StableError::NotIsomorphism);
    }
    let class_map = met_class_map(s, g)?;
    let touched: BTreeSet<ArrayIndex> = dom.iter().filter_map(|&p| reg.index_of(p)).collect();
    // dom = ran already contains every touched cell, so g permutes it
    let closure = dom;
    let closure_map = g.clone();
    let used: BTreeSet<u32> = touched.iter().map(|c| c.column).collect();
    let untouched_columns: BTreeSet<u32> = (0..reg.dims.columns).filter(|z| !used.contains(z)).collect();

    let mut pairs = closure_map.to_pairs();
    for (idx, p) in reg.cells() {
        if !untouched_columns.contains(&idx.column) {
            continue;
        }
        let target = ArrayIndex::new(class_apply(&class_map, idx.type_idx), idx.column, f.apply(idx.row)?);
        if let Some(q) = reg.cell(target) {
            pairs.push((p, q));
        }
    }
    let mut result = LazyAutomorphism::new(label);
    result.commit_pairs(s, &pairs, stage)?;
    Ok(DenseExtensionState {
        label,
        requirement: g.clone(),
        touched,
        closure,
        closure_map,
        untouched_columns,
        class_map,
        index_perm: f.clone(),
        result,
    })
}

/// Least column untouched by every state.
pub fn common_column<'a>(states: impl IntoIterator<Item = &'a DenseExtensionState> + Clone) -> Option<u32> {
    let first = states.clone().into_iter().next()?;
    first
        .untouched_columns
        .iter()
        .copied()
        .find(|z| states.clone().into_iter().all(|st| st.untouched_columns.contains(z)))
}

/// Evaluates `w` on cell `(0, ζ, 0)` of the least common untouched column
/// `ζ` of the generators in `w`, through their column actions.
pub fn free_column_witness(
    reg: &ArrayRegistry,
    states: &[&DenseExtensionState],
    w: &ReducedWord,
) -> Result<ArrayWitness, StableError> {
    let find = |l: &GeneratorLabel| states.iter().find(|s| s.label == *l).copied();
    let mut involved: Vec<&DenseExtensionState> = Vec::new();
    for l in w.labels() {
        let st = find(&l).ok_or(StableError::MissingLabel(l))?;
        if !involved.iter().any(|s| s.label == l) {
            involved.push(st);
        }
    }
    let column = common_column(involved.iter().copied()).ok_or(StableError::NoCommonColumn)?;
    let start = ArrayIndex::new(0, column, 0);
    let end = star_image_with(|l| find(l).map(|s| (&s.class_map, &s.index_perm)), w, start)?;
    if end == start {
        return Err(StableError::NoWitness(w.clone()));
    }
    Ok(ArrayWitness {
        word: w.clone(),
        start,
        end,
        start_point: reg.cell(start).ok_or(StableError::NoCommonColumn)?,
        end_point: reg.cell(end),
    })
}

/// First point of `candidates` that the committed graphs move along `w`,
/// with its image.
pub fn concrete_witness(
    candidates: impl IntoIterator<Item = PointId>,
    gens: &BTreeMap<GeneratorLabel, PartialAutomorphism>,
    w: &ReducedWord,
) -> Result<Option<(PointId, PointId)>, StableError> {
    for p in candidates {
        if let Some(q) = evaluate_with(w, |l| gens.get(l), p)? {
            if q != p {
                return Ok(Some((p, q)));
            }
        }
    }
    Ok(None)
}

/// A random permutation of at most `max_size` cells lying in at most
/// `max_columns` columns that respects classes.
pub fn random_permutation_requirement(
    reg: &ArrayRegistry,
    rng: &mut impl Rng,
    max_size: usize,
    max_columns: usize,
) -> PartialAutomorphism {
    let d = reg.dims;
    let mut columns: Vec<u32> = (0..d.columns).collect();
    columns.shuffle(rng);
    columns.truncate(rng.gen_range(1..=max_columns.clamp(1, d.columns as usize)));
    let mut classes: Vec<u32> = (0..d.types).collect();
    classes.shuffle(rng);
    let class_perm: ClassPerm = (0..d.types).zip(classes.iter().copied()).collect();

    // cycles of the class permutation
    let mut seen = BTreeSet::new();
    let mut cycles = Vec::new();
    for i in 0..d.types {
        if seen.contains(&i) {
            continue;
        }
        let mut cyc = vec![i];
        seen.insert(i);
        let mut j = class_perm[&i];
        while j != i {
            cyc.push(j);
            seen.insert(j);
            j = class_perm[&j];
        }
        cycles.push(cyc);
    }
    cycles.shuffle(rng);

    let mut pairs = Vec::new();
    let mut budget = max_size;
    for cyc in cycles {
        if budget < cyc.len() {
            continue;
        }
        let k = rng.gen_range(0..=budget / cyc.len());
        if k == 0 {
            continue;
        }
        budget -= k * cyc.len();
        let pick = |rng: &mut _, class: u32| -> Vec<PointId> {
            let mut all: Vec<PointId> = columns
                .iter()
                .flat_map(|&z| (0..d.rows).map(move |x| ArrayIndex::new(class, z, x)))
                .filter_map(|idx| reg.cell(idx))
                .collect();
            all.shuffle(rng);
            all.truncate(k);
            all
        };
        let chosen: Vec<Vec<PointId>> = cyc.iter().map(|&c| pick(rng, c)).collect();
        for (n, _) in cyc.iter().enumerate() {
            let next = (n + 1) % cyc.len();
            for (a, b) in chosen[n].iter().zip(&chosen[next]) {
                pairs.push((*a, *b));
            }
        }
    }
    PartialAutomorphism::from_pairs(pairs).expect("distinct cells")
}
