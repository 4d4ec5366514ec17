//! Lemma-lexicon baselines.
//!
//! A sentence is tagged positive when any of its lemmas is in the lexicon.
//! The four variants shrink the lexicon step by step: all inventory lemmas,
//! then without stopwords, then without lemmas that only occur inside
//! multi-word phrases, then without lemmas of figurative origin.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, SentenceRecord};
use crate::training::MetricsReport;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryRow {
    pub lemma: String,
    pub stopword: bool,
    pub multiword_only: bool,
    pub figurative: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Inventory {
    rows: Vec<InventoryRow>,
}

fn parse_flag(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" | "" => Some(false),
        _ => None,
    }
}

impl Inventory {
    /// Rejects empty and duplicate lemmas.
    pub fn new(rows: Vec<InventoryRow>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for row in &rows {
            if row.lemma.trim().is_empty() {
                return Err(Error::Validation("inventory row with an empty lemma".into()));
            }
            if !seen.insert(row.lemma.as_str()) {
                return Err(Error::Validation(format!("duplicate inventory lemma {:?}", row.lemma)));
            }
        }
        Ok(Self { rows })
    }

    /// Reads `lemma,stopword,multiword_only,figurative` with a header row.
    /// Flags accept 1/0, true/false and yes/no.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(File::open(path).map_err(|e| Error::io(path, e))?);
        let expected = ["lemma", "stopword", "multiword_only", "figurative"];
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header {}", expected.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let bad = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            let record = record.map_err(|e| bad(e.to_string()))?;
            let flag = |k: usize| {
                let raw = record.get(k).unwrap_or("");
                parse_flag(raw).ok_or_else(|| bad(format!("bad {} flag {raw:?}", expected[k])))
            };
            rows.push(InventoryRow {
                lemma: record.get(0).unwrap_or("").to_string(),
                stopword: flag(1)?,
                multiword_only: flag(2)?,
                figurative: flag(3)?,
            });
        }
        Self::new(rows)
    }

    /// Marks every listed lemma as a stopword, in addition to rows already
    /// flagged in the inventory.
    pub fn with_stopwords(mut self, stopwords: &BTreeSet<String>) -> Self {
        for row in &mut self.rows {
            row.stopword |= stopwords.contains(&row.lemma);
        }
        self
    }

    pub fn rows(&self) -> &[InventoryRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// One lemma per line; blank lines and `#` comments are ignored.
pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let word = line.trim();
        if !word.is_empty() && !word.starts_with('#') {
            out.insert(word.to_string());
        }
    }
    Ok(out)
}

/// How many inventory lemmas each filter removed on the way to a variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusions {
    pub stopword: usize,
    pub multiword_only: usize,
    pub figurative: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub variant: u8,
    pub lemmas: BTreeSet<String>,
    pub exclusions: Exclusions,
}

pub const VARIANTS: [u8; 4] = [1, 2, 3, 4];

pub fn build_baseline(inventory: &Inventory, variant: u8) -> Result<Lexicon> {
    if !VARIANTS.contains(&variant) {
        return Err(Error::Contract(format!(
            "unknown baseline variant {variant}, expected 1 to 4"
        )));
    }
    let mut lemmas = BTreeSet::new();
    let mut exclusions = Exclusions::default();
    for row in inventory.rows() {
        if variant >= 2 && row.stopword {
            exclusions.stopword += 1;
        } else if variant >= 3 && row.multiword_only {
            exclusions.multiword_only += 1;
        } else if variant >= 4 && row.figurative {
            exclusions.figurative += 1;
        } else {
            lemmas.insert(row.lemma.clone());
        }
    }
    Ok(Lexicon {
        variant,
        lemmas,
        exclusions,
    })
}

pub fn baseline_classify(lexicon: &Lexicon, record: &SentenceRecord) -> Label {
    if record.lemmas.iter().any(|l| lexicon.lemmas.contains(l)) {
        Label::Positive
    } else {
        Label::Negative
    }
}

pub fn evaluate_baseline<'a, I>(lexicon: &Lexicon, records: I) -> MetricsReport
where
    I: IntoIterator<Item = &'a SentenceRecord>,
{
    MetricsReport::from_pairs(records.into_iter().map(|r| (r.label, baseline_classify(lexicon, r))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub variant: u8,
    pub lexicon_size: usize,
    pub exclusions: Exclusions,
    pub metrics: MetricsReport,
}

/// Builds and evaluates all four variants on `records`.
pub fn run_baselines(inventory: &Inventory, records: &[&SentenceRecord]) -> Result<Vec<BaselineRow>> {
    VARIANTS
        .iter()
        .map(|&v| {
            let lexicon = build_baseline(inventory, v)?;
            Ok(BaselineRow {
                variant: v,
                lexicon_size: lexicon.lemmas.len(),
                exclusions: lexicon.exclusions,
                metrics: evaluate_baseline(&lexicon, records.iter().copied()),
            })
        })
        .collect()
}
