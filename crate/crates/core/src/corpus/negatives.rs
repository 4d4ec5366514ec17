use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Label, SentenceRecord};
use crate::{Error, Result};

/// Groups records by `work_id`, keeping first-appearance order of works and
/// of sentences within a work.
pub fn group_by_work(records: Vec<SentenceRecord>) -> Vec<(String, Vec<SentenceRecord>)> {
    let mut order: Vec<(String, Vec<SentenceRecord>)> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for r in records {
        let slot = *index.entry(r.work_id.clone()).or_insert_with(|| {
            order.push((r.work_id.clone(), Vec::new()));
            order.len() - 1
        });
        order[slot].1.push(r);
    }
    order
}

/// Draws up to `k` sentences per work uniformly without replacement. A draw
/// whose token sequence equals a known positive is discarded and replaced by
/// the next draw until `k` clean sentences are found or the work runs out.
/// Returned sentences are labelled negative and stripped of gold spans.
pub fn sample_negatives(
    works: &[(String, Vec<SentenceRecord>)],
    positives: &HashSet<Vec<String>>,
    k: usize,
    seed: u64,
) -> Result<Vec<SentenceRecord>> {
    if k == 0 {
        return Err(Error::Contract("negative sampling needs k >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (_, sentences) in works {
        let mut order: Vec<usize> = (0..sentences.len()).collect();
        order.shuffle(&mut rng);
        let mut picked: Vec<usize> = order
            .into_iter()
            .filter(|&i| !positives.contains(&sentences[i].tokens))
            .take(k)
            .collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| {
            let mut r = sentences[i].clone();
            r.label = Label::Negative;
            r.gold_spans.clear();
            r
        }));
    }
    Ok(out)
}
