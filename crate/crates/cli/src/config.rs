//! TOML run configuration.
//!
//! ```toml
//! [data]
//! corpus = "corpus.jsonl"      # with `split`, or give train/dev/test files
//! split = "split.json"
//! lemma_vectors = "lemmas.vec" # optional word2vec text files
//! token_vectors = "tokens.vec"
//! external = "bert.jsonl"      # optional precomputed contextual vectors
//!
//! [model.features]
//! sources = ["lemma-word", "lemma-char"]
//! categorical_mode = "none"
//!
//! [model.encoder]
//! kind = "han"
//! hidden_per_direction = 128
//!
//! [train]
//! seed = 0
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semtag_core::corpus::{load_corpus, CorpusSplit, SentenceRecord};
use semtag_core::features::{ExternalVectors, Pretrained, WordVectors};
use semtag_core::training::{Dataset, ModelConfig, Resources, RunConfig, TrainConfig};

use crate::args::Overrides;
use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub corpus: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub token_vectors: Option<PathBuf>,
    pub lemma_vectors: Option<PathBuf>,
    pub external: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl FileConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
            CliError::Validation(format!("{}:{line}: {}", origin.display(), e.message()))
        })
    }

    /// Reads the file, resolves relative paths and validates the run config.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let d = &mut config.data;
        for p in [
            &mut d.corpus,
            &mut d.split,
            &mut d.train,
            &mut d.dev,
            &mut d.test,
            &mut d.token_vectors,
            &mut d.lemma_vectors,
            &mut d.external,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let f = &mut self.model.features;
        let e = &mut self.model.encoder;
        let t = &mut self.train;
        if let Some(v) = o.seed {
            t.seed = v;
        }
        if let Some(v) = o.encoder {
            e.kind = v;
        }
        if let Some(v) = o.hidden {
            e.hidden_per_direction = v;
        }
        if let Some(v) = &o.sources {
            f.sources = v.clone();
        }
        if let Some(v) = o.categorical_mode {
            f.categorical_mode = v;
        }
        if let Some(v) = o.max_epochs {
            t.max_epochs = v;
        }
        if let Some(v) = o.learning_rate {
            t.learning_rate = v;
        }
        if let Some(v) = o.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = o.patience {
            t.patience = v;
        }
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        self.model.validate()?;
        self.train.validate()?;
        Ok(RunConfig {
            model: self.model.clone(),
            train: self.train.clone(),
        })
    }

    /// Every input file named by the config.
    pub fn inputs(&self) -> Vec<PathBuf> {
        let d = &self.data;
        [
            &d.corpus,
            &d.split,
            &d.train,
            &d.dev,
            &d.test,
            &d.token_vectors,
            &d.lemma_vectors,
            &d.external,
        ]
        .into_iter()
        .flatten()
        .cloned()
        .collect()
    }
}

/// Records of the three splits, owned.
pub struct LoadedData {
    pub train: Vec<SentenceRecord>,
    pub dev: Vec<SentenceRecord>,
    pub test: Vec<SentenceRecord>,
}

impl LoadedData {
    pub fn dataset(&self) -> Dataset<'_> {
        Dataset {
            train: self.train.iter().collect(),
            dev: self.dev.iter().collect(),
            test: self.test.iter().collect(),
        }
    }
}

pub fn load_data(data: &DataConfig) -> Result<LoadedData, CliError> {
    match (data, &data.corpus, &data.split) {
        (
            DataConfig {
                train: None,
                dev: None,
                test: None,
                ..
            },
            Some(corpus),
            Some(split),
        ) => {
            let records = load_corpus(corpus)?;
            let split: CorpusSplit = crate::read_json(split)?;
            let [train, dev, test] = split.materialize(&records)?;
            let own = |v: Vec<&SentenceRecord>| v.into_iter().cloned().collect();
            Ok(LoadedData {
                train: own(train),
                dev: own(dev),
                test: own(test),
            })
        }
        (
            DataConfig {
                train: Some(train),
                dev: Some(dev),
                test: Some(test),
                corpus: None,
                split: None,
                ..
            },
            _,
            _,
        ) => Ok(LoadedData {
            train: load_corpus(train)?,
            dev: load_corpus(dev)?,
            test: load_corpus(test)?,
        }),
        _ => Err(CliError::Validation(
            "[data] needs either corpus and split, or train, dev and test".into(),
        )),
    }
}

pub fn load_resources(data: &DataConfig) -> Result<Resources, CliError> {
    let vectors = |p: &Option<PathBuf>| -> Result<Option<WordVectors>, CliError> {
        p.as_deref()
            .map(|p| WordVectors::load(p, None))
            .transpose()
            .map_err(Into::into)
    };
    Ok(Resources {
        pretrained: Pretrained {
            tokens: vectors(&data.token_vectors)?,
            lemmas: vectors(&data.lemma_vectors)?,
        },
        external: data
            .external
            .as_deref()
            .map(ExternalVectors::load)
            .transpose()?
            .map(std::sync::Arc::new),
    })
}
