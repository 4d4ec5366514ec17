use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use semtag_core::corpus::{load_corpus, save_corpus, Label, SentenceRecord};
use semtag_core::synthetic::planted_signal_corpus;
use semtag_core::training::PredictionRecord;
use semtag_review::{export_accepted, read_log, router, Clock, Decision, DecisionRequest, ReviewError, ReviewService};

fn clock() -> Clock {
    Arc::new(|| "2024-01-01T00:00:00.000Z".to_string())
}

fn fixture(n: usize) -> (Vec<SentenceRecord>, Vec<PredictionRecord>) {
    let records: Vec<SentenceRecord> = planted_signal_corpus(n, 11)
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.id = format!("s{i:04}");
            r
        })
        .collect();
    let preds = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = ((i * 37) % 100) as f64 / 100.0;
            let attention = vec![1.0 / r.len() as f64; r.len()];
            PredictionRecord::new(r.id.clone(), p, Some(attention))
        })
        .collect();
    (records, preds)
}

fn open(dir: &Path, n: usize) -> Arc<ReviewService> {
    let (records, preds) = fixture(n);
    Arc::new(ReviewService::from_parts(preds, records, &dir.join("log.jsonl"), clock()).unwrap())
}

async fn call(svc: &Arc<ReviewService>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(svc.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(svc: &Arc<ReviewService>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(svc, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn decision(id: &str, d: &str) -> Value {
    json!({ "id": id, "decision": d, "reviewer": "ana" })
}

#[tokio::test]
async fn fresh_queue_is_sorted_by_probability() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 12);
    let (status, body) = call_json(&svc, "GET", "/api/queue?limit=100", None).await;
    assert_eq!(status, StatusCode::OK);
    let items = body["items"].as_array().unwrap();
    assert_eq!(items.len(), 12);
    assert_eq!(body["matching"], 12);
    let probs: Vec<f64> = items
        .iter()
        .map(|i| i["probability_positive"].as_f64().unwrap())
        .collect();
    assert!(probs.windows(2).all(|w| w[0] >= w[1]));
    let (_, limited) = call_json(&svc, "GET", "/api/queue?limit=3", None).await;
    assert_eq!(limited["items"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn item_carries_tokens_attention_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 4);
    let (status, body) = call_json(&svc, "GET", "/api/item/s0000", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["decision"], "pending");
    assert_eq!(
        body["tokens"].as_array().unwrap().len(),
        body["attention"].as_array().unwrap().len()
    );
    assert!(body["metadata"]["author"].is_string());
    let (status, _) = call_json(&svc, "GET", "/api/item/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn decisions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 8);
    let ids: Vec<String> = svc.read(|s| s.items().iter().take(3).map(|i| i.record.id.clone()).collect());
    for (id, d) in ids.iter().zip(["accepted", "rejected", "skipped"]) {
        let (status, body) = call_json(&svc, "POST", "/api/decision", Some(decision(id, d))).await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
    drop(svc);
    let svc = open(dir.path(), 8);
    let (_, body) = call_json(&svc, "GET", "/api/queue?status=pending&limit=100", None).await;
    let pending: Vec<&str> = body["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["id"].as_str().unwrap())
        .collect();
    assert_eq!(pending.len(), 5);
    for id in &ids {
        assert!(!pending.contains(&id.as_str()));
    }
    let (_, stats) = call_json(&svc, "GET", "/api/stats", None).await;
    assert_eq!(stats["accepted"], 1);
    assert_eq!(stats["rejected"], 1);
    assert_eq!(stats["skipped"], 1);
    assert_eq!(stats["precision_so_far"], 0.5);
}

#[tokio::test]
async fn unknown_id_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 4);
    let (status, _) = call_json(&svc, "POST", "/api/decision", Some(decision("missing", "accepted"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(read_log(&dir.path().join("log.jsonl")).unwrap().is_empty());
}

#[tokio::test]
async fn second_verdict_conflicts_and_reports_the_committed_state() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 4);
    let (status, _) = call_json(&svc, "POST", "/api/decision", Some(decision("s0001", "accepted"))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = call_json(&svc, "POST", "/api/decision", Some(decision("s0001", "rejected"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["current"], "accepted");
    assert_eq!(read_log(&dir.path().join("log.jsonl")).unwrap().len(), 1);
}

#[tokio::test]
async fn stale_expectation_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 4);
    call_json(&svc, "POST", "/api/decision", Some(decision("s0001", "skipped"))).await;
    let mut req = decision("s0001", "accepted");
    req["expected"] = json!("pending");
    let (status, _) = call_json(&svc, "POST", "/api/decision", Some(req)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let mut req = decision("s0001", "accepted");
    req["expected"] = json!("skipped");
    let (status, body) = call_json(&svc, "POST", "/api/decision", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["item"]["decision"], "accepted");
}

#[tokio::test]
async fn undo_returns_an_item_to_pending() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 4);
    call_json(&svc, "POST", "/api/decision", Some(decision("s0002", "accepted"))).await;
    let (status, body) = call_json(&svc, "POST", "/api/decision", Some(decision("s0002", "pending"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["item"]["decision"], "pending");
    assert!(body["item"]["decided_at"].is_null());
    assert_eq!(body["stats"]["accepted"], 0);
    let (status, _) = call_json(&svc, "POST", "/api/decision", Some(decision("s0002", "pending"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let log = read_log(&dir.path().join("log.jsonl")).unwrap();
    assert_eq!(
        log.iter().map(|e| e.decision).collect::<Vec<_>>(),
        vec![Decision::Accepted, Decision::Pending]
    );
}

#[tokio::test]
async fn retried_request_with_the_same_key_counts_once() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 4);
    let mut req = decision("s0003", "accepted");
    req["idempotency_key"] = json!("k-1");
    let (s1, b1) = call_json(&svc, "POST", "/api/decision", Some(req.clone())).await;
    let (s2, b2) = call_json(&svc, "POST", "/api/decision", Some(req)).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(b1["replayed"], false);
    assert_eq!(b2["replayed"], true);
    assert_eq!(b2["stats"]["accepted"], 1);
    assert_eq!(read_log(&dir.path().join("log.jsonl")).unwrap().len(), 1);

    let mut other = decision("s0000", "rejected");
    other["idempotency_key"] = json!("k-1");
    let (status, _) = call_json(&svc, "POST", "/api/decision", Some(other)).await;
    assert_eq!(status, StatusCode::CONFLICT);

    drop(svc);
    let svc = open(dir.path(), 4);
    let mut again = decision("s0003", "accepted");
    again["idempotency_key"] = json!("k-1");
    let (_, body) = call_json(&svc, "POST", "/api/decision", Some(again)).await;
    assert_eq!(body["replayed"], true);
}

#[tokio::test]
async fn malformed_requests_are_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 4);
    let (status, _) = call_json(&svc, "GET", "/api/queue?status=maybe", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&svc, "POST", "/api/decision", Some(json!({ "id": "s0000" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let mut req = decision("s0000", "accepted");
    req["reviewer"] = json!(" ");
    let (status, _) = call_json(&svc, "POST", "/api/decision", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[test]
fn concurrent_conflicting_decisions_commit_once() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 4);
    let handles: Vec<_> = ["accepted", "rejected", "accepted", "rejected"]
        .into_iter()
        .map(|d| {
            let svc = svc.clone();
            std::thread::spawn(move || {
                svc.decide(DecisionRequest {
                    id: "s0000".into(),
                    decision: serde_json::from_value(json!(d)).unwrap(),
                    reviewer: "ana".into(),
                    idempotency_key: None,
                    expected: None,
                })
            })
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
    assert!(results
        .iter()
        .filter_map(|r| r.as_ref().err())
        .all(|e| matches!(e, ReviewError::Conflict { .. })));
    assert_eq!(read_log(&dir.path().join("log.jsonl")).unwrap().len(), 1);
}

#[test]
fn orphans_are_listed_at_startup() {
    let dir = tempfile::tempdir().unwrap();
    let (mut records, mut preds) = fixture(4);
    records.remove(1);
    preds.remove(2);
    match ReviewService::from_parts(preds, records, &dir.path().join("log.jsonl"), clock()) {
        Err(ReviewError::Orphans {
            predictions_only,
            corpus_only,
        }) => {
            assert_eq!(predictions_only, vec!["s0001"]);
            assert_eq!(corpus_only, vec!["s0002"]);
        }
        Err(other) => panic!("{other}"),
        Ok(_) => panic!("expected orphans"),
    }
}

#[test]
fn log_naming_an_unknown_item_fails_startup() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    std::fs::write(
        &log,
        "{\"seq\":1,\"id\":\"ghost\",\"decision\":\"accepted\",\"reviewer\":\"r\",\"timestamp\":\"t\"}\n",
    )
    .unwrap();
    let (records, preds) = fixture(4);
    assert!(matches!(
        ReviewService::from_parts(preds, records, &log, clock()),
        Err(ReviewError::Log { line: 1, .. })
    ));
}

fn random_request(rng: &mut ChaCha8Rng, ids: &[String]) -> DecisionRequest {
    let decision = Decision::ALL[rng.random_range(0..4)];
    DecisionRequest {
        id: ids[rng.random_range(0..ids.len())].clone(),
        decision,
        reviewer: format!("r{}", rng.random_range(0..3)),
        idempotency_key: rng.random_bool(0.3).then(|| format!("k{}", rng.random_range(0..20))),
        expected: None,
    }
}

#[test]
fn replaying_the_log_after_a_crash_restores_the_state() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let svc = open(dir.path(), 30);
    let ids: Vec<String> = svc.read(|s| s.items().iter().map(|i| i.record.id.clone()).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut committed = 0;
    for _ in 0..100 {
        if let Ok(r) = svc.decide(random_request(&mut rng, &ids)) {
            committed += usize::from(!r.replayed);
        }
    }
    assert!(committed > 20);
    let before = svc.snapshot();
    drop(svc);

    // A write torn by the crash must not change the replayed state.
    let mut bytes = std::fs::read(&log).unwrap();
    bytes.extend_from_slice(b"{\"seq\":999,\"id\":\"s00");
    std::fs::write(&log, bytes).unwrap();

    let svc = open(dir.path(), 30);
    assert_eq!(svc.snapshot(), before);
    assert_eq!(read_log(&log).unwrap().len(), committed);
    svc.decide(random_request(&mut rng, &ids)).ok();
    assert!(read_log(&log).is_ok());
}

#[tokio::test]
async fn export_round_trips_through_the_corpus_loader() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), 6);
    let (status, bytes) = call(&svc, "GET", "/api/export", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(bytes.is_empty());

    for (id, d) in [("s0001", "accepted"), ("s0004", "accepted"), ("s0002", "rejected")] {
        call_json(&svc, "POST", "/api/decision", Some(decision(id, d))).await;
    }
    let (_, bytes) = call(&svc, "GET", "/api/export", None).await;
    let path = dir.path().join("export.jsonl");
    std::fs::write(&path, &bytes).unwrap();
    let loaded = load_corpus(&path).unwrap();
    assert_eq!(
        loaded.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(),
        vec!["s0001", "s0004"]
    );
    assert!(loaded
        .iter()
        .all(|r| r.label == Label::Positive && r.gold_spans.is_empty()));

    let (records, _) = fixture(6);
    let offline = export_accepted(&read_log(&dir.path().join("log.jsonl")).unwrap(), &records).unwrap();
    assert_eq!(offline, loaded);

    let train = planted_signal_corpus(6, 3)
        .into_iter()
        .map(|mut r| {
            r.id = format!("train-{}", r.id);
            r
        })
        .collect::<Vec<_>>();
    let merged: Vec<SentenceRecord> = train.into_iter().chain(loaded).collect();
    let merged_path = dir.path().join("merged.jsonl");
    save_corpus(&merged_path, &merged).unwrap();
    assert_eq!(load_corpus(&merged_path).unwrap().len(), 8);
}

#[test]
fn export_of_an_unknown_id_is_an_error() {
    let (records, _) = fixture(2);
    let entry = semtag_review::LogEntry {
        seq: 1,
        id: "ghost".into(),
        decision: Decision::Accepted,
        reviewer: "r".into(),
        timestamp: "t".into(),
        idempotency_key: None,
    };
    assert!(matches!(
        export_accepted(&[entry], &records),
        Err(ReviewError::UnknownItem(_))
    ));
}
