use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::SentenceRecord;
use crate::features::EmbedCache;
use crate::numerics::{adam_step, AdamState, Graph, Real};
use crate::{Error, Result};

use super::config::{Monitor, TrainConfig};
use super::metrics::MetricsReport;
use super::model::{Model, PredictionRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev: MetricsReport,
}

/// Patience counter over a monitored dev quantity.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    pub monitor: Monitor,
    pub patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    wait: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(monitor: Monitor, patience: usize) -> Self {
        EarlyStopping {
            monitor,
            patience,
            best: None,
            best_epoch: 0,
            wait: 0,
        }
    }

    /// Feeds the value for `epoch`; only strict improvements reset patience.
    pub fn observe(&mut self, epoch: usize, value: f64) -> StopDecision {
        let improved = match (self.best, self.monitor) {
            (None, _) => true,
            (Some(b), Monitor::DevLoss) => value < b,
            (Some(b), Monitor::DevF1) => value > b,
        };
        if improved {
            self.best = Some(value);
            self.best_epoch = epoch;
            self.wait = 0;
        } else {
            self.wait += 1;
        }
        StopDecision {
            improved,
            stop: self.wait >= self.patience,
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Predictions in input order plus the mean cross-entropy.
pub fn predict_with_loss<F: Real>(
    model: &Model<F>,
    records: &[&SentenceRecord],
) -> Result<(Vec<PredictionRecord>, f64)> {
    let mut preds = Vec::with_capacity(records.len());
    let mut total = 0.0;
    for r in records {
        let (p, loss) = model.score(r)?;
        total += loss;
        preds.push(p);
    }
    let mean = if records.is_empty() {
        0.0
    } else {
        total / records.len() as f64
    };
    Ok((preds, mean))
}

pub fn metrics_for(records: &[&SentenceRecord], preds: &[PredictionRecord]) -> MetricsReport {
    MetricsReport::from_pairs(records.iter().zip(preds).map(|(r, p)| (r.label, p.predicted)))
}

pub fn evaluate<F: Real>(model: &Model<F>, records: &[&SentenceRecord]) -> Result<MetricsReport> {
    let (preds, _) = predict_with_loss(model, records)?;
    Ok(metrics_for(records, &preds))
}

/// Predictions for every record, highest probability first, ties by id.
pub fn tag_corpus<F: Real>(model: &Model<F>, records: &[&SentenceRecord]) -> Result<Vec<PredictionRecord>> {
    let mut out = records.iter().map(|r| model.predict(r)).collect::<Result<Vec<_>>>()?;
    sort_predictions(&mut out);
    Ok(out)
}

pub fn sort_predictions(preds: &mut [PredictionRecord]) {
    preds.sort_by(|a, b| {
        b.probability_positive
            .partial_cmp(&a.probability_positive)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
}

/// Mini-batch Adam with early stopping on the dev set. On return the model
/// holds the parameters of the best dev epoch.
pub fn train<F: Real>(
    model: &mut Model<F>,
    train: &[&SentenceRecord],
    dev: &[&SentenceRecord],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Contract("training needs non-empty train and dev sets".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(&model.store, config.learning_rate);
    let mut stopper = EarlyStopping::new(config.monitor, config.patience);
    let mut best = model.store.clone();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let grads = {
                let mut g = Graph::with_params(&model.store);
                let mut cache = EmbedCache::new();
                let mut losses = Vec::with_capacity(batch.len());
                for &i in batch {
                    let out = model.forward(&mut g, train[i], &mut cache)?;
                    losses.push(g.softmax_cross_entropy(out.logits, train[i].label.class())?);
                }
                let mut total = losses[0];
                for &l in &losses[1..] {
                    total = g.add(total, l)?;
                }
                let loss = g.scale(total, F::of(1.0 / batch.len() as f64));
                let value = g.value(loss).item().f64();
                if !value.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        batch: batch_no + 1,
                    });
                }
                epoch_loss += value * batch.len() as f64;
                g.backward(loss)?
            };
            model.store.accumulate(&grads);
            fill_missing_grads(&mut model.store);
            adam_step(&mut model.store, &mut adam)?;
            model.store.zero_grad();
        }
        let (preds, dev_loss) = predict_with_loss(model, dev)?;
        let dev_metrics = metrics_for(dev, &preds);
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            dev_loss,
            dev: dev_metrics,
        });
        let watched = match config.monitor {
            Monitor::DevLoss => dev_loss,
            Monitor::DevF1 => dev_metrics.f1,
        };
        let decision = stopper.observe(epoch, watched);
        if decision.improved {
            best.copy_values_from(&model.store);
        }
        if decision.stop {
            break;
        }
    }
    model.store.copy_values_from(&best);
    Ok(TrainOutcome {
        history,
        best_epoch: stopper.best_epoch(),
    })
}

// A trainable parameter untouched by a batch gets a zero gradient so the
// optimizer sees every parameter each step.
fn fill_missing_grads<F: Real>(store: &mut crate::numerics::ParamStore<F>) {
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    for id in ids {
        let p = store.get_mut(id);
        if p.requires_grad && p.grad.is_none() {
            p.grad = Some(vec![F::zero(); p.value.len()]);
        }
    }
}
