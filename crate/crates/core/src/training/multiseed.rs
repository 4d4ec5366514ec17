use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::SentenceRecord;
use crate::features::{ExternalVectors, FeatureVocabs, Pretrained};
use crate::{Error, Result};

use super::config::{RunConfig, TrainConfig};
use super::fit::{evaluate, train, EpochRecord};
use super::metrics::MetricsReport;
use super::model::Model;

/// Train / dev / test records of one experiment.
#[derive(Clone, Debug)]
pub struct Dataset<'a> {
    pub train: Vec<&'a SentenceRecord>,
    pub dev: Vec<&'a SentenceRecord>,
    pub test: Vec<&'a SentenceRecord>,
}

impl Dataset<'_> {
    pub fn all(&self) -> Vec<&SentenceRecord> {
        self.train.iter().chain(&self.dev).chain(&self.test).copied().collect()
    }
}

/// Inputs shared by every run of an experiment.
#[derive(Clone, Debug, Default)]
pub struct Resources {
    pub pretrained: Pretrained,
    pub external: Option<Arc<ExternalVectors>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub seed: u64,
    pub epoch_history: Vec<EpochRecord>,
    pub best_epoch: usize,
    #[serde(rename = "final")]
    pub final_: MetricsReport,
}

pub struct RunOutput {
    pub model: Model<f32>,
    pub report: RunReport,
}

/// Builds a model for `config` with `seed`. Text vocabularies cover every
/// split (word tables are frozen, mirroring vectors pretrained on the whole
/// corpus); metadata vocabularies cover the training split only.
pub fn build_model(config: &RunConfig, data: &Dataset<'_>, resources: &Resources, seed: u64) -> Result<Model<f32>> {
    let vocabs = FeatureVocabs::build(&config.model.features, &data.all(), &data.train);
    let mut model = Model::new(config.model.clone(), vocabs, &resources.pretrained, seed)?;
    if let Some(ext) = &resources.external {
        model.set_external(ext.clone());
    }
    Ok(model)
}

/// One seeded run: build, train with early stopping, score the test split.
pub fn run_single(config: &RunConfig, data: &Dataset<'_>, resources: &Resources, seed: u64) -> Result<RunOutput> {
    let mut model = build_model(config, data, resources, seed)?;
    let train_config = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let outcome = train(&mut model, &data.train, &data.dev, &train_config)?;
    let final_ = evaluate(&model, &data.test)?;
    let report = RunReport {
        config: RunConfig {
            model: config.model.clone(),
            train: train_config,
        },
        seed,
        epoch_history: outcome.history,
        best_epoch: outcome.best_epoch,
        final_,
    };
    Ok(RunOutput { model, report })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single run.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("cannot summarise zero runs".into()));
        }
        let n = values.len();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Ok(Summary { median, mean, std })
    }

    /// Percentages as "median ± std".
    pub fn cell(&self) -> String {
        format!("{:.2} ± {:.2}", 100.0 * self.median, 100.0 * self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    #[serde(rename = "TPR")]
    pub tpr: String,
    #[serde(rename = "TNR")]
    pub tnr: String,
    #[serde(rename = "Precision")]
    pub precision: String,
    #[serde(rename = "F1")]
    pub f1: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub tpr: Summary,
    pub tnr: Summary,
    pub precision: Summary,
    pub f1: Summary,
    pub table: ResultTable,
}

impl SeedAggregate {
    /// Pure fold over the final test metrics of `reports`.
    pub fn from_reports(reports: &[RunReport]) -> Result<Self> {
        let pick = |f: fn(&MetricsReport) -> f64| -> Result<Summary> {
            Summary::of(&reports.iter().map(|r| f(&r.final_)).collect::<Vec<_>>())
        };
        let tpr = pick(|m| m.tpr)?;
        let tnr = pick(|m| m.tnr)?;
        let precision = pick(|m| m.precision)?;
        let f1 = pick(|m| m.f1)?;
        Ok(SeedAggregate {
            runs: reports.len(),
            seeds: reports.iter().map(|r| r.seed).collect(),
            table: ResultTable {
                tpr: tpr.cell(),
                tnr: tnr.cell(),
                precision: precision.cell(),
                f1: f1.cell(),
            },
            tpr,
            tnr,
            precision,
            f1,
        })
    }
}

/// Runs seeds `base_seed .. base_seed + n` on a pool of `jobs` workers.
/// Each run owns its model; results come back in seed order.
pub fn run_multiseed(
    config: &RunConfig,
    data: &Dataset<'_>,
    resources: &Resources,
    base_seed: u64,
    n: usize,
    jobs: usize,
) -> Result<(Vec<RunOutput>, SeedAggregate)> {
    if n == 0 {
        return Err(Error::Contract("multiseed needs at least one seed".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let seeds: Vec<u64> = (0..n as u64).map(|i| base_seed + i).collect();
    let outputs = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_single(config, data, resources, s))
            .collect::<Result<Vec<_>>>()
    })?;
    let reports: Vec<RunReport> = outputs.iter().map(|o| o.report.clone()).collect();
    let aggregate = SeedAggregate::from_reports(&reports)?;
    Ok((outputs, aggregate))
}
