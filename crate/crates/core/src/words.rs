//! Reduced words over generator labels.
//!
//! Words are stored and applied first-letter-first: `[a, b]` means "apply `a`,
//! then `b`".

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::automorphisms::PartialAutomorphism;
use crate::structures::PointId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Free,
    Density,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Free => "free",
            Role::Density => "density",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GeneratorLabel {
    pub level: u32,
    pub index: u32,
    pub role: Role,
}

impl GeneratorLabel {
    pub fn free(level: u32, index: u32) -> Self {
        GeneratorLabel { level, index, role: Role::Free }
    }

    pub fn density(level: u32, index: u32) -> Self {
        GeneratorLabel { level, index, role: Role::Density }
    }
}

impl fmt::Display for GeneratorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.level, self.index, self.role.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed generator label {0:?}")]
pub struct LabelParseError(pub String);

impl FromStr for GeneratorLabel {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || LabelParseError(s.to_string());
        let mut parts = s.split('.');
        let level = parts.next().and_then(|p| p.parse().ok()).ok_or_else(err)?;
        let index = parts.next().and_then(|p| p.parse().ok()).ok_or_else(err)?;
        let role = match parts.next() {
            Some("free") => Role::Free,
            Some("density") => Role::Density,
            _ => return Err(err()),
        };
        if parts.next().is_some() {
            return Err(err());
        }
        Ok(GeneratorLabel { level, index, role })
    }
}

impl Serialize for GeneratorLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GeneratorLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub label: GeneratorLabel,
    pub sign: Sign,
}

impl Letter {
    pub fn pos(label: GeneratorLabel) -> Self {
        Letter { label, sign: Sign::Plus }
    }

    pub fn neg(label: GeneratorLabel) -> Self {
        Letter { label, sign: Sign::Minus }
    }

    pub fn inverse(self) -> Self {
        Letter { label: self.label, sign: self.sign.flip() }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Plus => write!(f, "{}", self.label),
            Sign::Minus => write!(f, "{}^-1", self.label),
        }
    }
}

/// Serialized as a `[label, sign]` pair, e.g. `["1.0.free", -1]`.
impl Serialize for Letter {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (self.label, self.sign.as_i8()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Letter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (label, sign): (GeneratorLabel, i8) = Deserialize::deserialize(deserializer)?;
        let sign = match sign {
            1 => Sign::Plus,
            -1 => Sign::Minus,
            other => return Err(serde::de::Error::custom(format!("bad sign {other}"))),
        };
        Ok(Letter { label, sign })
    }
}

/// A word with no adjacent `x x⁻¹` pair.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ReducedWord(Vec<Letter>);

impl<'de> Deserialize<'de> for ReducedWord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let letters = Vec::<Letter>::deserialize(deserializer)?;
        ReducedWord::try_from_letters(letters)
            .ok_or_else(|| serde::de::Error::custom("word is not reduced"))
    }
}

impl ReducedWord {
    pub fn empty() -> Self {
        ReducedWord(Vec::new())
    }

    /// Accepts `letters` only if they are already reduced.
    pub fn try_from_letters(letters: Vec<Letter>) -> Option<Self> {
        if is_reduced(&letters) {
            Some(ReducedWord(letters))
        } else {
            None
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        ReducedWord(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    /// `self` followed by `other`, reduced.
    pub fn concat(&self, other: &ReducedWord) -> Self {
        let mut letters = self.0.clone();
        for &l in &other.0 {
            push_reducing(&mut letters, l);
        }
        ReducedWord(letters)
    }

    pub fn labels(&self) -> impl Iterator<Item = GeneratorLabel> + '_ {
        self.0.iter().map(|l| l.label)
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

fn push_reducing(stack: &mut Vec<Letter>, l: Letter) {
    if stack.last() == Some(&l.inverse()) {
        stack.pop();
    } else {
        stack.push(l);
    }
}

pub fn is_reduced(letters: &[Letter]) -> bool {
    letters
        .windows(2)
        .all(|w| w[0].label != w[1].label || w[0].sign == w[1].sign)
}

/// Free reduction.
pub fn reduce(letters: &[Letter]) -> ReducedWord {
    let mut stack = Vec::with_capacity(letters.len());
    for &l in letters {
        push_reducing(&mut stack, l);
    }
    ReducedWord(stack)
}

/// Lazily enumerates the nonempty reduced words of length at most `max_len`
/// over `labels` in length-lexicographic order. Letters are ordered by label
/// position, then `+` before `-`.
#[derive(Clone, Debug)]
pub struct WordIter {
    labels: Vec<GeneratorLabel>,
    max_len: usize,
    // letter codes: 2 * label position + (1 if inverse)
    current: Vec<usize>,
    done: bool,
}

impl WordIter {
    pub fn new(labels: Vec<GeneratorLabel>, max_len: usize) -> Self {
        let done = labels.is_empty() || max_len == 0;
        WordIter { labels, max_len, current: Vec::new(), done }
    }

    pub fn labels(&self) -> &[GeneratorLabel] {
        &self.labels
    }

    fn alphabet(&self) -> usize {
        2 * self.labels.len()
    }

    /// Smallest valid continuation after position `i - 1`.
    fn first_code_after(&self, prev: Option<usize>) -> usize {
        match prev {
            Some(p) if p ^ 1 == 0 => 1,
            _ => 0,
        }
    }

    fn next_code(&self, code: usize, prev: Option<usize>) -> Option<usize> {
        let mut c = code + 1;
        if let Some(p) = prev {
            if c == p ^ 1 {
                c += 1;
            }
        }
        (c < self.alphabet()).then_some(c)
    }

    fn advance(&mut self) -> bool {
        // odometer increment at the last position, carrying leftwards
        let mut i = self.current.len();
        while i > 0 {
            i -= 1;
            let prev = if i == 0 { None } else { Some(self.current[i - 1]) };
            if let Some(c) = self.next_code(self.current[i], prev) {
                self.current[i] = c;
                for j in i + 1..self.current.len() {
                    self.current[j] = self.first_code_after(Some(self.current[j - 1]));
                }
                return true;
            }
        }
        let len = self.current.len() + 1;
        if len > self.max_len {
            return false;
        }
        self.current.clear();
        for j in 0..len {
            let prev = if j == 0 { None } else { Some(self.current[j - 1]) };
            self.current.push(self.first_code_after(prev));
        }
        true
    }

    fn word(&self) -> ReducedWord {
        ReducedWord(
            self.current
                .iter()
                .map(|&c| Letter {
                    label: self.labels[c / 2],
                    sign: if c % 2 == 0 { Sign::Plus } else { Sign::Minus },
                })
                .collect(),
        )
    }
}

impl Iterator for WordIter {
    type Item = ReducedWord;

    fn next(&mut self) -> Option<ReducedWord> {
        if self.done {
            return None;
        }
        if !self.advance() {
            self.done = true;
            return None;
        }
        Some(self.word())
    }
}

pub fn enumerate_words(labels: &[GeneratorLabel], max_len: usize) -> Vec<ReducedWord> {
    WordIter::new(labels.to_vec(), max_len).collect()
}

/// Number of reduced words of length exactly `len` over `k` labels.
pub fn reduced_word_count(k: u64, len: u32) -> u128 {
    if len == 0 {
        return 1;
    }
    if k == 0 {
        return 0;
    }
    let k = k as u128;
    2 * k * (2 * k - 1).pow(len - 1)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("no assignment for generator {0}")]
    MissingLabel(GeneratorLabel),
}

/// Applies `w` to `p`, first letter first. Returns `Ok(None)` once some letter
/// is undefined at the current point.
pub fn evaluate_with<'a>(
    w: &ReducedWord,
    lookup: impl Fn(&GeneratorLabel) -> Option<&'a PartialAutomorphism>,
    p: PointId,
) -> Result<Option<PointId>, WordError> {
    let maps = w
        .letters()
        .iter()
        .map(|l| lookup(&l.label).ok_or(WordError::MissingLabel(l.label)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cur = p;
    for (l, g) in w.letters().iter().zip(maps) {
        let next = match l.sign {
            Sign::Plus => g.get(cur),
            Sign::Minus => g.inverse_get(cur),
        };
        match next {
            Some(q) => cur = q,
            None => return Ok(None),
        }
    }
    Ok(Some(cur))
}

pub fn evaluate(
    w: &ReducedWord,
    assign: &BTreeMap<GeneratorLabel, PartialAutomorphism>,
    p: PointId,
) -> Result<Option<PointId>, WordError> {
    evaluate_with(w, |l| assign.get(l), p)
}
