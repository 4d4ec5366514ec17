use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AuthorMeta, SentenceRecord, Vocabulary};
use crate::numerics::{Graph, ParamStore, Real, Var};
use crate::{Error, Result};

use super::tables::EmbeddingTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoricalFeature {
    Author,
    Century,
    Form,
    Structure,
}

impl CategoricalFeature {
    pub const ALL: [CategoricalFeature; 4] = [
        CategoricalFeature::Author,
        CategoricalFeature::Century,
        CategoricalFeature::Form,
        CategoricalFeature::Structure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CategoricalFeature::Author => "author",
            CategoricalFeature::Century => "century",
            CategoricalFeature::Form => "form",
            CategoricalFeature::Structure => "structure",
        }
    }

    pub fn value(self, meta: &AuthorMeta) -> String {
        match self {
            CategoricalFeature::Author => meta.author.clone(),
            CategoricalFeature::Century => meta.century_of_birth.to_string(),
            CategoricalFeature::Form => meta.form.to_string(),
            CategoricalFeature::Structure => meta.structure.clone(),
        }
    }
}

/// Sorts and deduplicates a feature list into the fixed concatenation order.
pub fn canonical_features(features: &[CategoricalFeature]) -> Vec<CategoricalFeature> {
    let mut out = features.to_vec();
    out.sort();
    out.dedup();
    out
}

/// Value vocabulary of each feature in `features`, built from `records`.
pub fn categorical_vocabs<'a>(
    records: impl IntoIterator<Item = &'a SentenceRecord> + Clone,
    features: &[CategoricalFeature],
) -> Vec<Vocabulary> {
    canonical_features(features)
        .into_iter()
        .map(|f| {
            let mut values: Vec<String> = records.clone().into_iter().map(|r| f.value(&r.metadata)).collect();
            values.sort();
            values.dedup();
            Vocabulary::from_surfaces(values)
        })
        .collect()
}

/// One independent embedding space per metadata feature; values not seen
/// when the vocabularies were built share the UNK row of their feature.
#[derive(Clone, Debug)]
pub struct CategoricalEmbedder {
    pub features: Vec<CategoricalFeature>,
    pub tables: Vec<EmbeddingTable>,
    pub dim_per_feature: usize,
}

impl CategoricalEmbedder {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        features: &[CategoricalFeature],
        vocabs: Vec<Vocabulary>,
        dim_per_feature: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let features = canonical_features(features);
        if features.is_empty() {
            return Err(Error::Config("categorical embedding needs at least one feature".into()));
        }
        if vocabs.len() != features.len() {
            return Err(Error::Config(format!(
                "{} categorical vocabularies for {} features",
                vocabs.len(),
                features.len()
            )));
        }
        let tables = features
            .iter()
            .zip(vocabs)
            .map(|(f, vocab)| {
                EmbeddingTable::random(
                    store,
                    &format!("categorical.{}", f.name()),
                    vocab,
                    dim_per_feature,
                    false,
                    rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CategoricalEmbedder {
            features,
            tables,
            dim_per_feature,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.features.len() * self.dim_per_feature
    }

    /// `1 × (dim_per_feature · |features|)` in the order author, century,
    /// form, structure.
    pub fn embed<F: Real>(&self, g: &mut Graph<'_, F>, meta: &AuthorMeta) -> Result<Var> {
        let parts = self
            .features
            .iter()
            .zip(&self.tables)
            .map(|(f, table)| table.lookup(g, &[f.value(meta)]))
            .collect::<Result<Vec<_>>>()?;
        g.concat(&parts, 1)
    }
}
