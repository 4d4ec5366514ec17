use serde::{Deserialize, Serialize};

use crate::encoders::{EncoderConfig, EncoderKind};
use crate::features::{FeatureConfig, Source};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monitor {
    #[default]
    DevLoss,
    DevF1,
}

fn default_batch() -> usize {
    4
}
fn default_lr() -> f64 {
    1e-4
}
fn default_patience() -> usize {
    5
}
fn default_max_epochs() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub monitor: Monitor,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: default_batch(),
            learning_rate: default_lr(),
            patience: default_patience(),
            max_epochs: default_max_epochs(),
            seed: 0,
            monitor: Monitor::DevLoss,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size, patience and max_epochs must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Feature assembly plus encoder: everything needed to build a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub features: FeatureConfig,
    pub encoder: EncoderConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.encoder.validate()?;
        if self.encoder.kind.is_pooling() && self.features.sources != [Source::External] {
            return Err(Error::Config(format!(
                "{} pools precomputed vectors and needs sources = [external]",
                self.encoder.kind.name()
            )));
        }
        Ok(())
    }

    /// Whether external vectors carry a sentence-start row.
    pub fn uses_bos(&self) -> bool {
        self.encoder.kind == EncoderKind::PoolBos
    }

    /// Width of the sentence vector produced by the encoder.
    pub fn sentence_dim(&self) -> usize {
        self.encoder.output_dim(self.features.token_dim())
    }

    /// Width of the classifier input.
    pub fn head_input_dim(&self) -> usize {
        match self.features.categorical_mode {
            crate::features::CategoricalMode::Head => self.sentence_dim() + self.features.categorical_dim(),
            _ => self.sentence_dim(),
        }
    }
}

/// A full experimental cell: network plus optimisation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}
