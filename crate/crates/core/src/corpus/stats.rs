use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::SentenceRecord;
use crate::{Error, Result};

/// One period bucket. `bucket` is the first year of the bucket (negative is
/// BCE). `literal_pct` and `figurative_pct` give the share of all
/// non-figurative (resp. figurative) annotated examples that fall in the
/// bucket.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsRow {
    pub bucket: i64,
    pub word_pct: f64,
    pub literal_pct: f64,
    pub figurative_pct: f64,
}

/// First year of a birth century: century 1 starts at year 0 (1 CE is
/// folded onto 0), century -1 at -100.
fn century_start(century: i32) -> i64 {
    let c = i64::from(century);
    if c > 0 {
        (c - 1) * 100
    } else {
        c * 100
    }
}

#[derive(Default)]
struct Tally {
    words: usize,
    literal: usize,
    figurative: usize,
}

/// Words per period bucket and annotated examples per bucket and style.
/// Examples with no gold span are not counted in the style columns; an
/// example is figurative when any of its gold tokens is.
pub fn corpus_stats(records: &[SentenceRecord], bucket_years: u32) -> Result<Vec<StatsRow>> {
    if bucket_years == 0 {
        return Err(Error::Contract("bucket size must be positive".into()));
    }
    let width = i64::from(bucket_years);
    let mut buckets: BTreeMap<i64, Tally> = BTreeMap::new();
    for r in records {
        let year = century_start(r.metadata.century_of_birth);
        let t = buckets.entry(year.div_euclid(width) * width).or_default();
        t.words += r.tokens.len();
        if !r.gold_spans.is_empty() {
            if r.gold_spans.iter().any(|s| s.style.is_figurative()) {
                t.figurative += 1;
            } else {
                t.literal += 1;
            }
        }
    }
    let total = |f: fn(&Tally) -> usize| buckets.values().map(f).sum::<usize>();
    let (words, literal, figurative) = (total(|t| t.words), total(|t| t.literal), total(|t| t.figurative));
    let pct = |n: usize, d: usize| if d == 0 { 0.0 } else { 100.0 * n as f64 / d as f64 };
    Ok(buckets
        .into_iter()
        .map(|(bucket, t)| StatsRow {
            bucket,
            word_pct: pct(t.words, words),
            literal_pct: pct(t.literal, literal),
            figurative_pct: pct(t.figurative, figurative),
        })
        .collect())
}

pub fn write_stats_csv<W: Write>(rows: &[StatsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["bucket", "word_pct", "literal_pct", "figurative_pct"])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
