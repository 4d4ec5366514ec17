use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, SentenceRecord};
use crate::encoders::Encoder;
use crate::features::{
    embed_sequence, CategoricalMode, EmbedCache, ExternalVectors, FeatureTables, FeatureVocabs, Pretrained,
};
use crate::numerics::{init, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::{jsonl, Error, Result};

use super::config::ModelConfig;

/// Output of the classifier for one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub probability_positive: f64,
    pub predicted: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<Vec<f64>>,
}

impl PredictionRecord {
    /// Ties at 0.5 go to the positive class.
    pub fn new(id: String, probability_positive: f64, attention: Option<Vec<f64>>) -> Self {
        let predicted = if probability_positive >= 0.5 {
            Label::Positive
        } else {
            Label::Negative
        };
        PredictionRecord {
            id,
            probability_positive,
            predicted,
            attention,
        }
    }
}

/// Reads JSON-lines predictions, rejecting duplicate ids.
pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, p) in jsonl::read::<PredictionRecord>(path)? {
        if !seen.insert(p.id.clone()) {
            return Err(Error::Validation(format!(
                "{}:{line}: duplicate prediction id {}",
                path.display(),
                p.id
            )));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn save_predictions(path: &Path, predictions: &[PredictionRecord]) -> Result<()> {
    jsonl::write(path, predictions)
}

/// Logits and, for the attention encoder, the attention row of one sentence.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub logits: Var,
    pub attention: Option<Var>,
}

/// Features, encoder and a two-way affine classifier over one parameter
/// store.
#[derive(Clone, Debug)]
pub struct Model<F> {
    pub config: ModelConfig,
    pub vocabs: FeatureVocabs,
    pub store: ParamStore<F>,
    pub tables: FeatureTables,
    pub encoder: Encoder,
    pub head_weight: ParamId,
    pub head_bias: ParamId,
}

impl<F: Real> Model<F> {
    /// Builds and initialises every parameter from `seed`: word and
    /// character tables uniform ±0.1 (or pretrained), dense weights Xavier,
    /// biases zero.
    pub fn new(config: ModelConfig, vocabs: FeatureVocabs, pretrained: &Pretrained, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let tables = FeatureTables::new(&mut store, &config.features, &vocabs, pretrained, &mut rng)?;
        let encoder = Encoder::new(&mut store, &config.encoder, config.features.token_dim(), &mut rng)?;
        let width = config.head_input_dim();
        let head_weight = store.register("head.weight", init::xavier_uniform(&mut rng, width, 2), true)?;
        let head_bias = store.register("head.bias", Tensor::zeros(&[1, 2]), true)?;
        Ok(Model {
            config,
            vocabs,
            store,
            tables,
            encoder,
            head_weight,
            head_bias,
        })
    }

    pub fn set_external(&mut self, vectors: Arc<ExternalVectors>) {
        self.tables.external = Some(vectors);
    }

    /// Records the forward pass of `record` on `g`, which must be bound to
    /// this model's store or a copy of it at any precision.
    pub fn forward<G: Real>(
        &self,
        g: &mut Graph<'_, G>,
        record: &SentenceRecord,
        cache: &mut EmbedCache,
    ) -> Result<Forward> {
        let features = &self.config.features;
        let bos = self.config.uses_bos();
        let seq = embed_sequence(g, record, features, &self.tables, bos, cache)?;
        let mask = vec![true; record.len() + usize::from(bos)];
        let encoded = self.encoder.encode(g, seq, &mask)?;
        let mut vector = encoded.vector;
        if features.categorical_mode == CategoricalMode::Head {
            let emb = self.tables.categorical.as_ref().expect("built with the model");
            let meta = emb.embed(g, &record.metadata)?;
            vector = g.concat(&[vector, meta], 1)?;
        }
        let (w, b) = (g.param(self.head_weight), g.param(self.head_bias));
        let logits = g.matmul(vector, w)?;
        let logits = g.add(logits, b)?;
        Ok(Forward {
            logits,
            attention: encoded.attention,
        })
    }

    /// Probability of the positive class and the sentence loss, without
    /// recording gradients.
    pub fn score(&self, record: &SentenceRecord) -> Result<(PredictionRecord, f64)> {
        let mut g = Graph::inference(&self.store);
        let out = self.forward(&mut g, record, &mut EmbedCache::new())?;
        let z = g.value(out.logits).data();
        let (neg, pos) = (z[0].f64(), z[1].f64());
        let probability = 1.0 / (1.0 + (neg - pos).exp());
        let attention = out
            .attention
            .map(|a| g.value(a).data().iter().map(|x| x.f64()).collect());
        // log-sum-exp minus the target logit
        let max = neg.max(pos);
        let lse = max + ((neg - max).exp() + (pos - max).exp()).ln();
        let loss = lse - if record.label.is_positive() { pos } else { neg };
        Ok((PredictionRecord::new(record.id.clone(), probability, attention), loss))
    }

    pub fn predict(&self, record: &SentenceRecord) -> Result<PredictionRecord> {
        self.score(record).map(|(p, _)| p)
    }
}
