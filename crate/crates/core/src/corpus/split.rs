use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, SentenceRecord};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Full,
    Partial,
}

/// Train/dev/test id lists. The three lists are pairwise disjoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub name: SplitName,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// Per-label sample counts as `[train, dev, test]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitTargets {
    pub positive: [usize; 3],
    pub negative: [usize; 3],
}

impl SplitTargets {
    pub const FULL: SplitTargets = SplitTargets {
        positive: [2013, 252, 251],
        negative: [19940, 2493, 2491],
    };

    /// The reduced training set keeps the full split's dev and test.
    pub const PARTIAL: SplitTargets = SplitTargets {
        positive: [420, 252, 251],
        negative: [3970, 2493, 2491],
    };

    pub fn of(name: SplitName) -> Self {
        match name {
            SplitName::Full => Self::FULL,
            SplitName::Partial => Self::PARTIAL,
        }
    }

    /// Every count multiplied by `ratio` and floored.
    pub fn scaled(self, ratio: f64) -> Self {
        let f = |xs: [usize; 3]| xs.map(|x| (x as f64 * ratio).floor() as usize);
        SplitTargets {
            positive: f(self.positive),
            negative: f(self.negative),
        }
    }
}

struct Drawn {
    train: Vec<usize>,
    dev: Vec<usize>,
    test: Vec<usize>,
}

fn draw(pool: &[usize], counts: [usize; 3], what: &str, rng: &mut ChaCha8Rng) -> Result<Drawn> {
    let needed: usize = counts.iter().sum();
    if pool.len() < needed {
        return Err(Error::Count {
            what: what.to_string(),
            needed,
            available: pool.len(),
        });
    }
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    let [n_train, n_dev, n_test] = counts;
    Ok(Drawn {
        test: shuffled[..n_test].to_vec(),
        dev: shuffled[n_test..n_test + n_dev].to_vec(),
        train: shuffled[n_test + n_dev..n_test + n_dev + n_train].to_vec(),
    })
}

/// Builds the full or partial split. `ratio` scales every target count
/// (1.0 for the published corpus). Both splits drawn from one corpus and
/// seed share dev and test; the partial training set is a seeded random
/// subset of the full one.
pub fn build_splits(records: &[SentenceRecord], name: SplitName, seed: u64, ratio: f64) -> Result<CorpusSplit> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Config(format!("split ratio must be positive, got {ratio}")));
    }
    let full = SplitTargets::FULL.scaled(ratio);
    let by_label = |label: Label| -> Vec<usize> {
        records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = draw(
        &by_label(Label::Positive),
        full.positive,
        "positive sentences",
        &mut rng,
    )?;
    let mut neg = draw(
        &by_label(Label::Negative),
        full.negative,
        "negative sentences",
        &mut rng,
    )?;

    if name == SplitName::Partial {
        let partial = SplitTargets::PARTIAL.scaled(ratio);
        let mut sub = ChaCha8Rng::seed_from_u64(seed);
        sub.set_stream(1);
        for (drawn, keep) in [(&mut pos, partial.positive[0]), (&mut neg, partial.negative[0])] {
            drawn.train.shuffle(&mut sub);
            drawn.train.truncate(keep);
        }
    }

    let ids = |a: &[usize], b: &[usize]| -> Vec<String> {
        let mut idx: Vec<usize> = a.iter().chain(b).copied().collect();
        idx.sort_unstable();
        idx.into_iter().map(|i| records[i].id.clone()).collect()
    };
    let split = CorpusSplit {
        name,
        train: ids(&pos.train, &neg.train),
        dev: ids(&pos.dev, &neg.dev),
        test: ids(&pos.test, &neg.test),
    };
    debug_assert!(split.is_disjoint());
    Ok(split)
}

impl CorpusSplit {
    pub fn is_disjoint(&self) -> bool {
        let mut seen = HashSet::new();
        self.train
            .iter()
            .chain(&self.dev)
            .chain(&self.test)
            .all(|id| seen.insert(id))
    }

    /// Resolves the id lists against `records`.
    pub fn materialize<'a>(&self, records: &'a [SentenceRecord]) -> Result<[Vec<&'a SentenceRecord>; 3]> {
        let by_id: std::collections::HashMap<&str, &SentenceRecord> =
            records.iter().map(|r| (r.id.as_str(), r)).collect();
        let resolve = |ids: &[String]| -> Result<Vec<&'a SentenceRecord>> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| Error::Lookup(format!("split id {id} not in corpus")))
                })
                .collect()
        };
        Ok([resolve(&self.train)?, resolve(&self.dev)?, resolve(&self.test)?])
    }
}
