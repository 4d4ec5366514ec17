//! Per-token input vectors: word embeddings, character encodings, external
//! contextual vectors and metadata embeddings, concatenated in a fixed order.

mod categorical;
mod chars;
mod external;
mod tables;

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use categorical::{canonical_features, categorical_vocabs, CategoricalEmbedder, CategoricalFeature};
pub use chars::CharEncoder;
pub use external::{ExternalEntry, ExternalVectors};
pub use tables::{load_word_vectors, write_word_vectors, EmbeddingTable, WordVectors, INIT_BOUND};

use crate::corpus::{build_vocab, SentenceRecord, VocabField, Vocabulary};
use crate::numerics::{Graph, ParamStore, Real, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    TokenWord,
    TokenChar,
    LemmaWord,
    LemmaChar,
    External,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoricalMode {
    /// Appended to every token vector before the encoder.
    Encoder,
    /// Appended to the sentence vector before the classifier.
    Head,
    #[default]
    None,
}

fn default_word_dim() -> usize {
    200
}
fn default_char_emb_dim() -> usize {
    100
}
fn default_char_encoder_out() -> usize {
    300
}
fn default_external_dim() -> usize {
    768
}
fn default_categorical_dim() -> usize {
    64
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub sources: Vec<Source>,
    #[serde(default = "default_word_dim")]
    pub word_dim: usize,
    #[serde(default = "default_char_emb_dim")]
    pub char_emb_dim: usize,
    #[serde(default = "default_char_encoder_out")]
    pub char_encoder_out: usize,
    #[serde(default = "default_external_dim")]
    pub external_dim: usize,
    #[serde(default)]
    pub categorical_mode: CategoricalMode,
    #[serde(default)]
    pub categorical_features: Vec<CategoricalFeature>,
    #[serde(default = "default_categorical_dim")]
    pub categorical_dim_per_feature: usize,
    #[serde(default = "default_true")]
    pub freeze_word_embeddings: bool,
}

impl FeatureConfig {
    /// Default dimensions over the given sources, no metadata.
    pub fn new(sources: &[Source]) -> Self {
        FeatureConfig {
            sources: sources.to_vec(),
            word_dim: default_word_dim(),
            char_emb_dim: default_char_emb_dim(),
            char_encoder_out: default_char_encoder_out(),
            external_dim: default_external_dim(),
            categorical_mode: CategoricalMode::None,
            categorical_features: Vec::new(),
            categorical_dim_per_feature: default_categorical_dim(),
            freeze_word_embeddings: true,
        }
    }

    pub fn with_categorical(mut self, mode: CategoricalMode, features: &[CategoricalFeature]) -> Self {
        self.categorical_mode = mode;
        self.categorical_features = features.to_vec();
        self
    }

    pub fn has(&self, source: Source) -> bool {
        self.sources.contains(&source)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Config("at least one feature source is required".into()));
        }
        let mut sorted = self.sources.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.sources.len() {
            return Err(Error::Config("feature sources listed more than once".into()));
        }
        let dims = [
            ("word_dim", self.word_dim),
            ("char_emb_dim", self.char_emb_dim),
            ("char_encoder_out", self.char_encoder_out),
            ("external_dim", self.external_dim),
            ("categorical_dim_per_feature", self.categorical_dim_per_feature),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.char_encoder_out.is_multiple_of(2) {
            return Err(Error::Config("char_encoder_out must be even".into()));
        }
        if self.categorical_mode != CategoricalMode::None && self.categorical_features.is_empty() {
            return Err(Error::Config(
                "categorical_mode is set but no categorical_features are listed".into(),
            ));
        }
        Ok(())
    }

    fn source_dim(&self, source: Source) -> usize {
        match source {
            Source::TokenWord | Source::LemmaWord => self.word_dim,
            Source::TokenChar | Source::LemmaChar => self.char_encoder_out,
            Source::External => self.external_dim,
        }
    }

    /// Width of the metadata vector, zero when metadata is unused.
    pub fn categorical_dim(&self) -> usize {
        match self.categorical_mode {
            CategoricalMode::None => 0,
            _ => canonical_features(&self.categorical_features).len() * self.categorical_dim_per_feature,
        }
    }

    /// Width of one token vector as fed to the encoder.
    pub fn token_dim(&self) -> usize {
        let text: usize = self.sources.iter().map(|&s| self.source_dim(s)).sum();
        match self.categorical_mode {
            CategoricalMode::Encoder => text + self.categorical_dim(),
            _ => text,
        }
    }
}

/// Vocabularies backing every configured table; persisted with checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVocabs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vocabulary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<Vocabulary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_chars: Option<Vocabulary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma_chars: Option<Vocabulary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categorical: Vec<Vocabulary>,
}

impl FeatureVocabs {
    /// Text vocabularies come from `text_records`; metadata vocabularies
    /// from `meta_records` (normally the training set only, so metadata
    /// values first seen at test time fall back to the unknown row).
    pub fn build(config: &FeatureConfig, text_records: &[&SentenceRecord], meta_records: &[&SentenceRecord]) -> Self {
        let text = || text_records.iter().copied();
        let pick = |s: Source, field: VocabField| config.has(s).then(|| build_vocab(text(), field));
        FeatureVocabs {
            tokens: pick(Source::TokenWord, VocabField::Tokens),
            lemmas: pick(Source::LemmaWord, VocabField::Lemmas),
            token_chars: pick(Source::TokenChar, VocabField::TokenChars),
            lemma_chars: pick(Source::LemmaChar, VocabField::LemmaChars),
            categorical: match config.categorical_mode {
                CategoricalMode::None => Vec::new(),
                _ => categorical_vocabs(meta_records.iter().copied(), &config.categorical_features),
            },
        }
    }
}

/// Pretrained word vectors for the token and lemma tables.
#[derive(Clone, Debug, Default)]
pub struct Pretrained {
    pub tokens: Option<WordVectors>,
    pub lemmas: Option<WordVectors>,
}

/// Everything `embed_sequence` reads.
#[derive(Clone, Debug, Default)]
pub struct FeatureTables {
    pub token_word: Option<EmbeddingTable>,
    pub token_char: Option<CharEncoder>,
    pub lemma_word: Option<EmbeddingTable>,
    pub lemma_char: Option<CharEncoder>,
    pub categorical: Option<CategoricalEmbedder>,
    /// Input data rather than parameters; attached at run time.
    pub external: Option<Arc<ExternalVectors>>,
}

fn vocab_for(v: &Option<Vocabulary>, what: &str) -> Result<Vocabulary> {
    v.clone()
        .ok_or_else(|| Error::Config(format!("no {what} vocabulary for a configured source")))
}

impl FeatureTables {
    /// Registers parameters in a fixed order so that a rebuild from the same
    /// config and vocabularies yields identical parameter names.
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        config: &FeatureConfig,
        vocabs: &FeatureVocabs,
        pretrained: &Pretrained,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let word_table = |store: &mut ParamStore<F>,
                          rng: &mut R,
                          name: &str,
                          vocab: Vocabulary,
                          vectors: &Option<WordVectors>|
         -> Result<EmbeddingTable> {
            let frozen = config.freeze_word_embeddings;
            match vectors {
                Some(v) => {
                    let m = v.matrix(&vocab, config.word_dim, rng)?;
                    EmbeddingTable::new(store, name, vocab, m, frozen)
                }
                None => EmbeddingTable::random(store, name, vocab, config.word_dim, frozen, rng),
            }
        };
        let mut tables = FeatureTables::default();
        if config.has(Source::TokenWord) {
            let vocab = vocab_for(&vocabs.tokens, "token")?;
            tables.token_word = Some(word_table(store, rng, "token_word", vocab, &pretrained.tokens)?);
        }
        if config.has(Source::TokenChar) {
            let charset = vocab_for(&vocabs.token_chars, "token character")?;
            tables.token_char = Some(CharEncoder::new(
                store,
                "token_char",
                charset,
                config.char_emb_dim,
                config.char_encoder_out,
                rng,
            )?);
        }
        if config.has(Source::LemmaWord) {
            let vocab = vocab_for(&vocabs.lemmas, "lemma")?;
            tables.lemma_word = Some(word_table(store, rng, "lemma_word", vocab, &pretrained.lemmas)?);
        }
        if config.has(Source::LemmaChar) {
            let charset = vocab_for(&vocabs.lemma_chars, "lemma character")?;
            tables.lemma_char = Some(CharEncoder::new(
                store,
                "lemma_char",
                charset,
                config.char_emb_dim,
                config.char_encoder_out,
                rng,
            )?);
        }
        if config.categorical_mode != CategoricalMode::None {
            tables.categorical = Some(CategoricalEmbedder::new(
                store,
                &config.categorical_features,
                vocabs.categorical.clone(),
                config.categorical_dim_per_feature,
                rng,
            )?);
        }
        Ok(tables)
    }
}

/// Memo of character encodings within one graph, so repeated words are
/// encoded once. Must not outlive the graph it was filled from.
#[derive(Default)]
pub struct EmbedCache {
    chars: HashMap<(Source, String), Var>,
}

impl EmbedCache {
    pub fn new() -> Self {
        Self::default()
    }
}

fn char_rows<F: Real>(
    g: &mut Graph<'_, F>,
    encoder: &CharEncoder,
    source: Source,
    words: &[String],
    cache: &mut EmbedCache,
) -> Result<Var> {
    let mut rows = Vec::with_capacity(words.len());
    for w in words {
        let key = (source, w.clone());
        let v = match cache.chars.get(&key) {
            Some(&v) => v,
            None => {
                let v = encoder.encode(g, w)?;
                cache.chars.insert(key, v);
                v
            }
        };
        rows.push(v);
    }
    g.concat(&rows, 0)
}

fn missing(source: &str) -> Error {
    Error::Config(format!("source {source} is configured but its table was not built"))
}

/// `T × token_dim` matrix for `record` (`T + 1` rows when `bos` is set and
/// external vectors carry a sentence-start row).
pub fn embed_sequence<F: Real>(
    g: &mut Graph<'_, F>,
    record: &SentenceRecord,
    config: &FeatureConfig,
    tables: &FeatureTables,
    bos: bool,
    cache: &mut EmbedCache,
) -> Result<Var> {
    if bos && config.sources.iter().any(|&s| s != Source::External) {
        return Err(Error::Config(
            "sentence-start pooling requires external vectors as the only source".into(),
        ));
    }
    let mut parts = Vec::new();
    if config.has(Source::TokenWord) {
        let t = tables.token_word.as_ref().ok_or_else(|| missing("token-word"))?;
        parts.push(t.lookup(g, &record.tokens)?);
    }
    if config.has(Source::TokenChar) {
        let enc = tables.token_char.as_ref().ok_or_else(|| missing("token-char"))?;
        parts.push(char_rows(g, enc, Source::TokenChar, &record.tokens, cache)?);
    }
    if config.has(Source::LemmaWord) {
        let t = tables.lemma_word.as_ref().ok_or_else(|| missing("lemma-word"))?;
        parts.push(t.lookup(g, &record.lemmas)?);
    }
    if config.has(Source::LemmaChar) {
        let enc = tables.lemma_char.as_ref().ok_or_else(|| missing("lemma-char"))?;
        parts.push(char_rows(g, enc, Source::LemmaChar, &record.lemmas, cache)?);
    }
    if config.has(Source::External) {
        let ext = tables.external.as_ref().ok_or_else(|| missing("external"))?;
        let m = ext.lookup::<F>(record, config.external_dim, bos)?;
        parts.push(g.constant(m));
    }
    if config.categorical_mode == CategoricalMode::Encoder {
        let emb = tables.categorical.as_ref().ok_or_else(|| missing("categorical"))?;
        let v = emb.embed(g, &record.metadata)?;
        let rows = record.len() + usize::from(bos);
        let repeated = g.concat(&vec![v; rows], 0)?;
        parts.push(repeated);
    }
    if parts.len() == 1 {
        return Ok(parts[0]);
    }
    g.concat(&parts, 1)
}
