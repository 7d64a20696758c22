//! Self-contained JSON certificates.
//!
//! Keys appear in the order of the struct fields below; every list is sorted
//! (points and pairs by source id, generators by label). Two exports of the
//! same state are byte-identical.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::free_extension::Witness;
use crate::stable::{ArrayDims, ArrayIndex, ArrayRegistry, ClassPerm};
use crate::structures::{PointId, Structure, StructureKind};
use crate::tree::TreeState;
use crate::words::{GeneratorLabel, ReducedWord};

pub const FORMAT: &str = "densefree-certificate/1";

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("malformed certificate: {0}")]
    Malformed(String),
    #[error("cannot read certificate: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Module {
    Tree,
    Stable,
    Dense,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub module: Module,
    pub kind: StructureKind,
    pub seed: u64,
    pub parameters: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureData {
    pub point_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(PointId, PointId)>>,
    /// Points from least to greatest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<PointId>>,
    /// Class of each point, by id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<u32>>,
}

impl StructureData {
    pub fn of(s: &Structure) -> Self {
        let kind = s.kind();
        StructureData {
            point_count: s.len() as u32,
            edges: (kind == StructureKind::RandomGraph).then(|| s.edges()),
            order: (kind == StructureKind::Dlo).then(|| s.order_list()),
            classes: (kind == StructureKind::EqClasses).then(|| s.classes().to_vec()),
        }
    }

    pub fn rebuild(&self, kind: StructureKind, seed: u64) -> Result<Structure, CertificateError> {
        let empty = Vec::new();
        Structure::from_parts(
            kind,
            seed,
            self.point_count,
            self.edges.as_ref().unwrap_or(&empty),
            self.order.as_deref().unwrap_or(&[]),
            self.classes.as_deref().unwrap_or(&[]),
        )
        .map_err(|e| CertificateError::Malformed(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub label: GeneratorLabel,
    pub pairs: Vec<(PointId, PointId)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub requirement: Vec<(PointId, PointId)>,
    pub label: GeneratorLabel,
    pub stage: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub label: GeneratorLabel,
    pub classes: Vec<(u32, u32)>,
    pub rows: ReducedWord,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryData {
    pub dims: ArrayDims,
    pub base: Vec<PointId>,
    /// `(type, column, row, point)`.
    pub cells: Vec<(u32, u32, u64, PointId)>,
    pub actions: Vec<ActionRecord>,
}

impl RegistryData {
    pub fn of(reg: &ArrayRegistry, actions: Vec<ActionRecord>) -> Self {
        RegistryData {
            dims: reg.dims(),
            base: reg.base().iter().copied().collect(),
            cells: reg.cells().map(|(i, p)| (i.type_idx, i.column, i.row, p)).collect(),
            actions,
        }
    }

    pub fn rebuild(&self, s: &Structure) -> Result<ArrayRegistry, CertificateError> {
        let table: Vec<(ArrayIndex, PointId)> =
            self.cells.iter().map(|&(i, z, x, p)| (ArrayIndex::new(i, z, x), p)).collect();
        ArrayRegistry::from_cells(s, self.dims, &table, self.base.iter().copied().collect())
            .map_err(|e| CertificateError::Malformed(e.to_string()))
    }
}

pub fn action_record(label: GeneratorLabel, classes: &ClassPerm, rows: &ReducedWord) -> ActionRecord {
    ActionRecord { label, classes: classes.iter().map(|(&a, &b)| (a, b)).collect(), rows: rows.clone() }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub points: u64,
    pub generators: u64,
    pub killed_words: u64,
    pub density_requirements: u64,
    /// Words the construction enumerated but could not witness.
    pub unwitnessed_words: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub header: Header,
    pub structure: StructureData,
    pub generators: Vec<GeneratorRecord>,
    pub killed_words: Vec<Witness>,
    pub density_log: Vec<DensityRecord>,
    /// Fragment at the start of each stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragments: Option<Vec<Vec<PointId>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<RegistryData>,
    pub summary: Summary,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("certificates always serialize");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, CertificateError> {
        let c: Certificate = serde_json::from_str(text)?;
        if c.header.format != FORMAT {
            return Err(CertificateError::Malformed(format!("unknown format {:?}", c.header.format)));
        }
        Ok(c)
    }

    pub fn fill_summary(&mut self, unwitnessed_words: u64) {
        self.summary = Summary {
            points: self.structure.point_count as u64,
            generators: self.generators.len() as u64,
            killed_words: self.killed_words.len() as u64,
            density_requirements: self.density_log.len() as u64,
            unwitnessed_words,
        };
    }
}

pub fn parameters<T: Serialize>(params: &T) -> BTreeMap<String, serde_json::Value> {
    match serde_json::to_value(params).expect("parameters serialize") {
        serde_json::Value::Object(m) => m.into_iter().collect(),
        other => BTreeMap::from([("value".to_string(), other)]),
    }
}

pub fn export_tree(st: &TreeState) -> Certificate {
    let mut params = parameters(&st.params);
    params.remove("kind");
    params.remove("seed");
    let mut c = Certificate {
        header: Header {
            format: FORMAT.to_string(),
            module: Module::Tree,
            kind: st.params.kind,
            seed: st.params.seed,
            parameters: params,
        },
        structure: StructureData::of(&st.structure),
        generators: st
            .gens
            .iter()
            .map(|(&label, g)| GeneratorRecord { label, pairs: g.committed().to_pairs() })
            .collect(),
        killed_words: st.witnesses.clone(),
        density_log: st
            .density_log
            .iter()
            .map(|e| DensityRecord { requirement: e.requirement.to_pairs(), label: e.label, stage: e.stage })
            .collect(),
        fragments: Some(st.fragment_history.clone()),
        registry: None,
        summary: Summary::default(),
    };
    c.fill_summary(0);
    c
}
