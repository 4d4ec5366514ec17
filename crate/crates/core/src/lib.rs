//! Binary sentence-semantics classification for annotated historical-language
//! corpora.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: a small reverse-mode differentiation engine and Adam.
//! * [`corpus`]: sentence records, splits, negative sampling, statistics.
//! * [`features`]: word, character, external and categorical embeddings.
//! * [`encoders`]: BiLSTM, BiGRU, attention (HAN) and pooling encoders.
//! * [`training`]: the classifier, training loop, metrics and tagging.
//! * [`baselines`]: lemma-lexicon baselines.
//! * [`diagnostics`]: attention ranks, punctuation statistics, disguise runs.

pub mod baselines;
pub mod corpus;
pub mod diagnostics;
pub mod encoders;
mod error;
pub mod features;
pub mod jsonl;
pub mod numerics;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
