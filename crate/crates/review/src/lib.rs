//! HTTP service for reviewing tagged sentences.
//!
//! Candidates come from a predictions file and the corpus it was produced
//! from. A reviewer accepts, rejects or skips each one; decisions go to an
//! append-only log that is replayed on start, and accepted sentences can be
//! exported as a corpus fragment for retraining.
//!
//! Endpoints:
//!
//! * `GET /api/queue?status=pending&limit=N` (`status` may also be
//!   `accepted`, `rejected`, `skipped` or `all`)
//! * `GET /api/item/{id}`
//! * `POST /api/decision` with `{id, decision, reviewer}` and optional
//!   `idempotency_key` and `expected`
//! * `GET /api/stats`
//! * `GET /api/export` (JSON lines)

mod error;
mod http;
mod log;
mod state;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use semtag_core::corpus::{load_corpus, SentenceRecord};
use semtag_core::training::{load_predictions, PredictionRecord};

pub use error::{Result, ReviewError};
pub use http::router;
pub use log::{read_log, DecisionLog, LogEntry};
pub use state::{Decision, ItemView, ReviewItem, ReviewState, Stats};

/// Source of decision timestamps.
pub type Clock = Arc<dyn Fn() -> String + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub id: String,
    pub decision: Decision,
    pub reviewer: String,
    #[serde(default)]
    pub idempotency_key: Option<String>,
    /// Decision the client believes the item holds; a mismatch is a conflict.
    #[serde(default)]
    pub expected: Option<Decision>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub item: ItemView,
    pub next: Option<ItemView>,
    /// True when the request repeated an idempotency key already committed.
    pub replayed: bool,
    pub stats: Stats,
}

struct Inner {
    state: ReviewState,
    log: DecisionLog,
}

pub struct ReviewService {
    inner: Mutex<Inner>,
    clock: Clock,
}

impl ReviewService {
    pub fn open(predictions: &Path, corpus: &Path, log: &Path) -> Result<Self> {
        Self::from_parts(
            load_predictions(predictions)?,
            load_corpus(corpus)?,
            log,
            system_clock(),
        )
    }

    /// Builds the state from already loaded files and replays the log.
    pub fn from_parts(
        predictions: Vec<PredictionRecord>,
        corpus: Vec<SentenceRecord>,
        log_path: &Path,
        clock: Clock,
    ) -> Result<Self> {
        let mut state = ReviewState::new(predictions, corpus)?;
        let (log, entries) = DecisionLog::open(log_path)?;
        for (line, entry) in entries.iter().enumerate() {
            state.apply(entry).map_err(|e| ReviewError::Log {
                path: log_path.to_path_buf(),
                line: line + 1,
                message: e.to_string(),
            })?;
        }
        Ok(ReviewService {
            inner: Mutex::new(Inner { state, log }),
            clock,
        })
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Runs `f` on the current state under the writer lock.
    pub fn read<R>(&self, f: impl FnOnce(&ReviewState) -> R) -> R {
        f(&self.lock().state)
    }

    pub fn snapshot(&self) -> ReviewState {
        self.read(Clone::clone)
    }

    /// Validates, logs and applies one decision. The log write happens
    /// before the state changes, so a failed write leaves both untouched.
    pub fn decide(&self, req: DecisionRequest) -> Result<DecisionResponse> {
        if req.reviewer.trim().is_empty() {
            return Err(ReviewError::BadRequest("reviewer must not be empty".into()));
        }
        let mut inner = self.lock();
        let respond = |state: &ReviewState, replayed: bool| DecisionResponse {
            item: state.view(&req.id).expect("checked"),
            next: state.next_pending(),
            replayed,
            stats: state.stats(),
        };
        if let Some(key) = &req.idempotency_key {
            if let Some(done) = inner.state.committed(key) {
                if done.id == req.id && done.decision == req.decision {
                    return Ok(respond(&inner.state, true));
                }
                return Err(ReviewError::KeyReuse(key.clone()));
            }
        }
        inner.state.check(&req.id, req.decision, req.expected)?;
        let entry = LogEntry {
            seq: inner.state.last_seq() + 1,
            id: req.id.clone(),
            decision: req.decision,
            reviewer: req.reviewer.clone(),
            timestamp: (self.clock)(),
            idempotency_key: req.idempotency_key.clone(),
        };
        inner.log.append(&entry)?;
        inner.state.apply(&entry)?;
        Ok(respond(&inner.state, false))
    }
}

/// Accepted sentences of `corpus` according to the final decision per id
/// in `log`, relabelled positive, in corpus order.
pub fn export_accepted(log: &[LogEntry], corpus: &[SentenceRecord]) -> Result<Vec<SentenceRecord>> {
    let mut last: HashMap<&str, Decision> = HashMap::new();
    for entry in log {
        last.insert(&entry.id, entry.decision);
    }
    let known: HashMap<&str, ()> = corpus.iter().map(|r| (r.id.as_str(), ())).collect();
    if let Some(id) = last.keys().find(|id| !known.contains_key(*id)) {
        return Err(ReviewError::UnknownItem(id.to_string()));
    }
    Ok(corpus
        .iter()
        .filter(|r| last.get(r.id.as_str()) == Some(&Decision::Accepted))
        .map(state::as_accepted)
        .collect())
}

/// Serves the API on `bind` until the process is stopped.
pub async fn serve(service: Arc<ReviewService>, bind: SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| ReviewError::io(bind.to_string(), e))?;
    axum::serve(listener, router(service))
        .await
        .map_err(|e| ReviewError::io(bind.to_string(), e))
}
