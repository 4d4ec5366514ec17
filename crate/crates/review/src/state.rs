use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use semtag_core::corpus::{AuthorMeta, Label, SentenceRecord};
use semtag_core::training::{sort_predictions, PredictionRecord};

use crate::error::{Result, ReviewError};
use crate::log::LogEntry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Pending,
    Accepted,
    Rejected,
    Skipped,
}

impl Decision {
    pub const ALL: [Decision; 4] = [
        Decision::Pending,
        Decision::Accepted,
        Decision::Rejected,
        Decision::Skipped,
    ];

    /// Forward moves are pending to any outcome and skipped to a final
    /// verdict. Moving back to pending undoes the previous decision.
    pub fn can_move_to(self, next: Decision) -> bool {
        use Decision::*;
        matches!(
            (self, next),
            (Pending, Accepted | Rejected | Skipped)
                | (Skipped, Accepted | Rejected)
                | (Accepted | Rejected | Skipped, Pending)
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReviewItem {
    /// Position of the record in the corpus file.
    pub corpus_index: usize,
    pub record: SentenceRecord,
    pub prediction: PredictionRecord,
    pub decision: Decision,
    pub decided_at: Option<String>,
    pub reviewer: Option<String>,
}

/// JSON view of an item as served over HTTP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    pub id: String,
    pub position: usize,
    pub tokens: Vec<String>,
    pub lemmas: Vec<String>,
    #[serde(default)]
    pub attention: Option<Vec<f64>>,
    pub metadata: AuthorMeta,
    pub probability_positive: f64,
    pub predicted: Label,
    pub decision: Decision,
    pub decided_at: Option<String>,
    pub reviewer: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub total: usize,
    pub pending: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub skipped: usize,
    /// accepted / (accepted + rejected), absent before any verdict.
    pub precision_so_far: Option<f64>,
}

/// Decision state of every item, in queue order (probability descending,
/// then id).
#[derive(Clone, Debug, PartialEq)]
pub struct ReviewState {
    items: Vec<ReviewItem>,
    by_id: HashMap<String, usize>,
    keys: HashMap<String, LogEntry>,
    last_seq: u64,
}

impl ReviewState {
    /// Pairs predictions with corpus records by id. Any id present in only
    /// one of the two is reported.
    pub fn new(mut predictions: Vec<PredictionRecord>, corpus: Vec<SentenceRecord>) -> Result<Self> {
        let mut records: HashMap<String, (usize, SentenceRecord)> = corpus
            .into_iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), (i, r)))
            .collect();
        let predictions_only: BTreeSet<String> = predictions
            .iter()
            .filter(|p| !records.contains_key(&p.id))
            .map(|p| p.id.clone())
            .collect();
        let predicted: BTreeSet<&str> = predictions.iter().map(|p| p.id.as_str()).collect();
        let corpus_only: BTreeSet<String> = records
            .keys()
            .filter(|id| !predicted.contains(id.as_str()))
            .cloned()
            .collect();
        if !predictions_only.is_empty() || !corpus_only.is_empty() {
            return Err(ReviewError::Orphans {
                predictions_only: predictions_only.into_iter().collect(),
                corpus_only: corpus_only.into_iter().collect(),
            });
        }
        sort_predictions(&mut predictions);
        let items: Vec<ReviewItem> = predictions
            .into_iter()
            .map(|prediction| {
                let (corpus_index, record) = records.remove(&prediction.id).expect("paired above");
                ReviewItem {
                    corpus_index,
                    record,
                    prediction,
                    decision: Decision::Pending,
                    decided_at: None,
                    reviewer: None,
                }
            })
            .collect();
        let by_id = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.record.id.clone(), i))
            .collect();
        Ok(ReviewState {
            items,
            by_id,
            keys: HashMap::new(),
            last_seq: 0,
        })
    }

    pub fn item(&self, id: &str) -> Option<&ReviewItem> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }

    pub fn items(&self) -> &[ReviewItem] {
        &self.items
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn view(&self, id: &str) -> Option<ItemView> {
        let &position = self.by_id.get(id)?;
        let it = &self.items[position];
        Some(ItemView {
            id: it.record.id.clone(),
            position,
            tokens: it.record.tokens.clone(),
            lemmas: it.record.lemmas.clone(),
            attention: it.prediction.attention.clone(),
            metadata: it.record.metadata.clone(),
            probability_positive: it.prediction.probability_positive,
            predicted: it.prediction.predicted,
            decision: it.decision,
            decided_at: it.decided_at.clone(),
            reviewer: it.reviewer.clone(),
        })
    }

    /// The entry an earlier request with this idempotency key committed.
    pub fn committed(&self, key: &str) -> Option<&LogEntry> {
        self.keys.get(key)
    }

    /// Checks that `decision` is a legal move for `id` right now. When
    /// `expected` is given, the item must currently hold that decision.
    pub fn check(&self, id: &str, decision: Decision, expected: Option<Decision>) -> Result<()> {
        let item = self.item(id).ok_or_else(|| ReviewError::UnknownItem(id.to_string()))?;
        let stale = expected.is_some_and(|e| e != item.decision);
        if stale || !item.decision.can_move_to(decision) {
            return Err(ReviewError::Conflict {
                id: id.to_string(),
                current: item.decision,
                requested: decision,
            });
        }
        Ok(())
    }

    pub fn apply(&mut self, entry: &LogEntry) -> Result<()> {
        self.check(&entry.id, entry.decision, None)?;
        let i = self.by_id[&entry.id];
        let item = &mut self.items[i];
        item.decision = entry.decision;
        if entry.decision == Decision::Pending {
            item.decided_at = None;
            item.reviewer = None;
        } else {
            item.decided_at = Some(entry.timestamp.clone());
            item.reviewer = Some(entry.reviewer.clone());
        }
        if let Some(key) = &entry.idempotency_key {
            self.keys.insert(key.clone(), entry.clone());
        }
        self.last_seq = self.last_seq.max(entry.seq);
        Ok(())
    }

    /// Items with the given decision (all items when `None`) in queue order.
    pub fn queue(&self, status: Option<Decision>, limit: usize) -> Vec<ItemView> {
        self.items
            .iter()
            .filter(|it| status.is_none_or(|s| it.decision == s))
            .take(limit)
            .filter_map(|it| self.view(&it.record.id))
            .collect()
    }

    pub fn next_pending(&self) -> Option<ItemView> {
        self.queue(Some(Decision::Pending), 1).into_iter().next()
    }

    pub fn stats(&self) -> Stats {
        let mut s = Stats {
            total: self.items.len(),
            ..Stats::default()
        };
        for it in &self.items {
            match it.decision {
                Decision::Pending => s.pending += 1,
                Decision::Accepted => s.accepted += 1,
                Decision::Rejected => s.rejected += 1,
                Decision::Skipped => s.skipped += 1,
            }
        }
        let judged = s.accepted + s.rejected;
        s.precision_so_far = (judged > 0).then(|| s.accepted as f64 / judged as f64);
        s
    }

    /// Accepted sentences in corpus order, relabelled positive.
    pub fn accepted_records(&self) -> Vec<SentenceRecord> {
        let mut accepted: Vec<&ReviewItem> = self
            .items
            .iter()
            .filter(|it| it.decision == Decision::Accepted)
            .collect();
        accepted.sort_by_key(|it| it.corpus_index);
        accepted.into_iter().map(|it| as_accepted(&it.record)).collect()
    }
}

/// Review confirms the sentence and not a particular token, so gold spans
/// are dropped.
pub(crate) fn as_accepted(record: &SentenceRecord) -> SentenceRecord {
    SentenceRecord {
        label: Label::Positive,
        gold_spans: Vec::new(),
        ..record.clone()
    }
}
