//! Post-hoc analyses over tagged sentences: where the attention of a
//! trained attention model falls relative to the gold tokens, how often
//! punctuation takes the top attention weight, and how predictions move
//! when a text is presented under another author's metadata.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{AuthorMeta, Label, SentenceRecord};
use crate::numerics::Real;
use crate::training::{Model, PredictionRecord};
use crate::{Error, Result};

pub const DEFAULT_PUNCTUATION: [&str; 6] = [".", "!", "?", ";", ":", ","];

fn attention_of(prediction: &PredictionRecord) -> Result<&[f64]> {
    prediction
        .attention
        .as_deref()
        .ok_or_else(|| Error::Contract(format!("prediction {} carries no attention weights", prediction.id)))
}

/// Token indices ordered by attention weight, highest first; equal weights
/// keep the earlier token first.
fn attention_order(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order
}

/// Relative rank `r / T` of each gold token, where `r` is its 1-based
/// position when tokens are sorted by attention.
pub fn relative_rank(prediction: &PredictionRecord, gold_indices: &[usize]) -> Result<Vec<f64>> {
    let weights = attention_of(prediction)?;
    let t = weights.len();
    let mut rank = vec![0usize; t];
    for (r, i) in attention_order(weights).into_iter().enumerate() {
        rank[i] = r + 1;
    }
    gold_indices
        .iter()
        .map(|&i| {
            rank.get(i).map(|&r| r as f64 / t as f64).ok_or_else(|| {
                Error::Contract(format!(
                    "gold index {i} outside the {t} attention weights of {}",
                    prediction.id
                ))
            })
        })
        .collect()
}

/// Relative ranks of gold tokens, pooled per token, split by whether the
/// sentence was found (TP) or missed (FN).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttentionAnalysis {
    pub true_positive: Vec<f64>,
    pub false_negative: Vec<f64>,
}

fn index_predictions(predictions: &[PredictionRecord]) -> HashMap<&str, &PredictionRecord> {
    predictions.iter().map(|p| (p.id.as_str(), p)).collect()
}

fn prediction_for<'a>(
    by_id: &HashMap<&str, &'a PredictionRecord>,
    record: &SentenceRecord,
) -> Result<&'a PredictionRecord> {
    by_id
        .get(record.id.as_str())
        .copied()
        .ok_or_else(|| Error::Lookup(format!("no prediction for sentence {}", record.id)))
}

fn aligned_attention<'a>(prediction: &'a PredictionRecord, record: &SentenceRecord) -> Result<&'a [f64]> {
    let weights = attention_of(prediction)?;
    if weights.len() != record.len() {
        return Err(Error::Alignment {
            id: record.id.clone(),
            expected: record.len(),
            found: weights.len(),
        });
    }
    Ok(weights)
}

/// Ranks the gold tokens of every gold-positive record.
pub fn analyze_attention(records: &[&SentenceRecord], predictions: &[PredictionRecord]) -> Result<AttentionAnalysis> {
    let by_id = index_predictions(predictions);
    let mut out = AttentionAnalysis::default();
    for record in records.iter().filter(|r| r.label == Label::Positive) {
        let prediction = prediction_for(&by_id, record)?;
        aligned_attention(prediction, record)?;
        let gold: Vec<usize> = record.gold_spans.iter().map(|s| s.index).collect();
        let ranks = relative_rank(prediction, &gold)?;
        match prediction.predicted {
            Label::Positive => out.true_positive.extend(ranks),
            Label::Negative => out.false_negative.extend(ranks),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub lower: f64,
    pub upper: f64,
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Counts ranks in `buckets` equal-width bins `(lower, upper]` over (0, 1].
pub fn rank_histogram(analysis: &AttentionAnalysis, buckets: usize) -> Result<Vec<HistogramRow>> {
    if buckets == 0 {
        return Err(Error::Contract("histogram needs at least one bucket".into()));
    }
    let mut rows: Vec<HistogramRow> = (0..buckets)
        .map(|b| HistogramRow {
            lower: b as f64 / buckets as f64,
            upper: (b + 1) as f64 / buckets as f64,
            tp: 0,
            fn_: 0,
        })
        .collect();
    // Rank r/T lands in bucket ceil(r/T * B) - 1; the small slack keeps
    // exact multiples such as 0.3 from spilling upward through rounding.
    let bucket = |rank: f64| (((rank * buckets as f64) - 1e-9).ceil() as usize).clamp(1, buckets) - 1;
    for &r in &analysis.true_positive {
        rows[bucket(r)].tp += 1;
    }
    for &r in &analysis.false_negative {
        rows[bucket(r)].fn_ += 1;
    }
    Ok(rows)
}

pub fn write_histogram_csv<W: Write>(rows: &[HistogramRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PunctuationRow {
    pub mark: String,
    pub occurrences: usize,
    pub top: usize,
    pub rate: f64,
}

/// For each mark of `marks` that occurs at least once, the fraction of its
/// occurrences that carry their sentence's maximum attention weight.
pub fn punctuation_attention_stats(
    records: &[&SentenceRecord],
    predictions: &[PredictionRecord],
    marks: &[&str],
) -> Result<Vec<PunctuationRow>> {
    let by_id = index_predictions(predictions);
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for record in records {
        let prediction = prediction_for(&by_id, record)?;
        let weights = aligned_attention(prediction, record)?;
        let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (token, &w) in record.tokens.iter().zip(weights) {
            if let Some(&mark) = marks.iter().find(|m| **m == token) {
                let entry = counts.entry(mark).or_default();
                entry.0 += 1;
                entry.1 += usize::from(w == max);
            }
        }
    }
    Ok(marks
        .iter()
        .filter_map(|m| counts.get(m).map(|&(n, top)| (m, n, top)))
        .map(|(m, n, top)| PunctuationRow {
            mark: m.to_string(),
            occurrences: n,
            top,
            rate: top as f64 / n as f64,
        })
        .collect())
}

pub fn write_punctuation_csv<W: Write>(rows: &[PunctuationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisguiseCell {
    pub feature_set: String,
    pub persona: String,
    pub positive: usize,
    pub total: usize,
    pub percent: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DisguiseReport {
    pub cells: Vec<DisguiseCell>,
}

impl DisguiseReport {
    pub fn get(&self, feature_set: &str, persona: &str) -> Option<&DisguiseCell> {
        self.cells
            .iter()
            .find(|c| c.feature_set == feature_set && c.persona == persona)
    }

    /// Largest minus smallest percentage over the personas of one feature set.
    pub fn spread(&self, feature_set: &str) -> f64 {
        let pcts = self
            .cells
            .iter()
            .filter(|c| c.feature_set == feature_set)
            .map(|c| c.percent);
        let (lo, hi) = pcts.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    /// One row per feature set, one column per persona.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut personas: Vec<&str> = Vec::new();
        let mut sets: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !personas.contains(&c.persona.as_str()) {
                personas.push(&c.persona);
            }
            if !sets.contains(&c.feature_set.as_str()) {
                sets.push(&c.feature_set);
            }
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(std::iter::once("feature_set").chain(personas.iter().copied()))?;
        for set in sets {
            let mut row = vec![set.to_string()];
            for p in &personas {
                row.push(
                    self.get(set, p)
                        .map(|c| format!("{:.2}", c.percent))
                        .unwrap_or_default(),
                );
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Re-tags every record under each persona's metadata with each named
/// model and reports the share tagged positive.
pub fn disguise_experiment<F: Real>(
    models: &[(String, &Model<F>)],
    records: &[&SentenceRecord],
    personas: &[(String, AuthorMeta)],
) -> Result<DisguiseReport> {
    let mut report = DisguiseReport::default();
    if records.is_empty() {
        return Ok(report);
    }
    for (set, model) in models {
        for (name, meta) in personas {
            let mut positive = 0;
            for record in records {
                let mut disguised = (*record).clone();
                disguised.metadata = meta.clone();
                positive += usize::from(model.predict(&disguised)?.predicted == Label::Positive);
            }
            report.cells.push(DisguiseCell {
                feature_set: set.clone(),
                persona: name.clone(),
                positive,
                total: records.len(),
                percent: 100.0 * positive as f64 / records.len() as f64,
            });
        }
    }
    Ok(report)
}
