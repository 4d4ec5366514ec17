use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::SentenceRecord;
use crate::jsonl;
use crate::numerics::{Real, Tensor};
use crate::{Error, Result};

/// One line of an external-vector file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalEntry {
    pub id: String,
    pub vectors: Vec<Vec<f32>>,
}

/// Precomputed per-token contextual vectors keyed by sentence id.
#[derive(Clone, Debug, Default)]
pub struct ExternalVectors {
    entries: HashMap<String, Vec<Vec<f32>>>,
}

impl ExternalVectors {
    pub fn from_entries(entries: impl IntoIterator<Item = ExternalEntry>) -> Result<Self> {
        let mut map = HashMap::new();
        for e in entries {
            if map.insert(e.id.clone(), e.vectors).is_some() {
                return Err(Error::Validation(format!("duplicate external vectors for {}", e.id)));
            }
        }
        Ok(ExternalVectors { entries: map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let rows = jsonl::read::<ExternalEntry>(path)?;
        Self::from_entries(rows.into_iter().map(|(_, e)| e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Matrix aligned with `record.tokens`; with `bos` the first row is the
    /// sentence-start vector and `T + 1` rows are required.
    pub fn lookup<F: Real>(&self, record: &SentenceRecord, dim: usize, bos: bool) -> Result<Tensor<F>> {
        let rows = self
            .entries
            .get(&record.id)
            .ok_or_else(|| Error::Lookup(format!("no external vectors for sentence {}", record.id)))?;
        let expected = record.len() + usize::from(bos);
        if rows.len() != expected {
            return Err(Error::Alignment {
                id: record.id.clone(),
                expected,
                found: rows.len(),
            });
        }
        let mut data = Vec::with_capacity(expected * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::dim(
                    "external vectors",
                    format!(
                        "sentence {} row {i} has length {}, expected {dim}",
                        record.id,
                        row.len()
                    ),
                ));
            }
            data.extend(row.iter().map(|&x| F::of(x as f64)));
        }
        Tensor::matrix(expected, dim, data)
    }
}
