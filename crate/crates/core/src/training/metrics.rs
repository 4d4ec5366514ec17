use serde::{Deserialize, Serialize};

use crate::corpus::Label;

/// Which ratios hit a zero denominator and were reported as 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateFlags {
    pub tpr: bool,
    pub tnr: bool,
    pub precision: bool,
    pub f1: bool,
}

impl DegenerateFlags {
    pub fn any(&self) -> bool {
        self.tpr || self.tnr || self.precision || self.f1
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub tpr: f64,
    pub tnr: f64,
    pub precision: f64,
    pub f1: f64,
    pub degenerate: DegenerateFlags,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl MetricsReport {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let (tpr, d_tpr) = ratio(tp, tp + fn_);
        let (tnr, d_tnr) = ratio(tn, fp + tn);
        let (precision, d_precision) = ratio(tp, tp + fp);
        // 2PR/(P+R) written over the counts, which avoids compounding the
        // rounding of the two ratios.
        let (f1, d_f1) = ratio(2 * tp, 2 * tp + fp + fn_);
        let d_f1 = d_f1 || tp == 0;
        MetricsReport {
            tp,
            fp,
            fn_,
            tn,
            tpr,
            tnr,
            precision,
            f1,
            degenerate: DegenerateFlags {
                tpr: d_tpr,
                tnr: d_tnr,
                precision: d_precision,
                f1: d_f1,
            },
        }
    }

    /// Confusion counts over `(gold, predicted)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (gold, pred) in pairs {
            match (gold.is_positive(), pred.is_positive()) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        Self::from_counts(tp, fp, fn_, tn)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}
