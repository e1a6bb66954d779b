use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use emoedit::alignment::to_alignment_json;
use emoedit::audio::{encode_wav, WavEncoding};
use emoedit::editor::{apply, EditScript};
use emoedit::features::{Analyzer, FEATURE_DIM};
use emoedit::hed::{parse_hed, parse_hed_json, HedFormat, ModelBank};
use emoedit::ranker::{Level, RankingModel};
use emoedit::service::{router, AppState};
use emoedit::synth::{Synthesizer, Voice, WordSpec};

const BOUNDARY: &str = "XBOUNDARYX";

fn bank() -> ModelBank {
    let emotions = ["Angry", "Happy", "Sad"];
    let mut models = Vec::new();
    for (k, e) in emotions.iter().enumerate() {
        for level in Level::ALL {
            let mut w = vec![0.0; FEATURE_DIM];
            w[k * 4] = 1.0;
            w[4] = 0.1;
            models.push(RankingModel {
                emotion: e.to_string(),
                level,
                w,
                feature_mean: vec![0.0; FEATURE_DIM],
                feature_std: vec![1.0; FEATURE_DIM],
                score_min: -60.0,
                score_max: 10.0,
                trained_on: "service-test".into(),
            });
        }
    }
    ModelBank::new(emotions.iter().map(|s| s.to_string()).collect(), models).unwrap()
}

fn fixture() -> (Vec<u8>, String, usize) {
    let words = vec![
        WordSpec::new("hello", &["HH", "AH", "L", "OW"]),
        WordSpec::new("green", &["G", "R", "IY", "N"]),
        WordSpec::new("world", &["W", "ER", "L", "D"]),
    ];
    let r = Synthesizer::default().render_emotion(&words, &Voice::default(), "Happy", 0.5);
    (encode_wav(&r.waveform, WavEncoding::Pcm16), to_alignment_json(&r.alignment), r.alignment.phonemes.len())
}

fn multipart(parts: &[(&str, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, data) in parts {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\nContent-Type: application/octet-stream\r\n\r\n")
                .as_bytes(),
        );
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

fn app(with_bank: bool) -> Router {
    router(Arc::new(AppState::new(with_bank.then(bank), Analyzer::default(), None)), None)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn upload(app: &Router, parts: &[(&str, &[u8])]) -> (StatusCode, Value) {
    let req = Request::post("/utterances")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(parts)))
        .unwrap();
    let (s, b) = send(app, req).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn patch(app: &Router, id: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::patch(format!("/utterances/{id}/hed"))
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, b) = send(app, req).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn created(app: &Router) -> (String, Value) {
    let (wav, align, _) = fixture();
    let (s, v) = upload(app, &[("wav", &wav), ("alignment", align.as_bytes())]).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    (v["id"].as_str().unwrap().to_string(), v)
}

fn set_word_op(word: usize, value: f64) -> Value {
    json!({"ops": [{"level": "word", "selector": {"word": word}, "emotion": "Happy", "action": "set", "value": value}]})
}

#[tokio::test]
async fn upload_creates_session_with_one_row_per_phoneme() {
    let app = app(true);
    let (_, _, phonemes) = fixture();
    let (_, v) = created(&app).await;
    assert_eq!(v["version"], 0);
    assert_eq!(v["hed"]["rows"].as_array().unwrap().len(), phonemes);
    let (s, h) = get_json(&app, "/health").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(h["sessions"], 1);
}

#[tokio::test]
async fn upload_errors() {
    let app = app(true);
    let (wav, align, _) = fixture();
    let (s, v) = upload(&app, &[("wav", b"RIFF\x10\x00\x00\x00WAVEjunk"), ("alignment", align.as_bytes())]).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["module"], "audio");
    let (s, v) = upload(&app, &[("wav", &wav)]).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"]["message"].as_str().unwrap().contains("alignment"));

    let no_models = self::app(false);
    let (s, v) = upload(&no_models, &[("wav", &wav), ("alignment", align.as_bytes())]).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(v["error"]["code"], "service.no_models");
}

#[tokio::test]
async fn patch_applies_and_versions() {
    let app = app(true);
    let (id, v0) = created(&app).await;
    let before = parse_hed_json(&v0["hed"].to_string()).unwrap();

    let (s, v1) = patch(&app, &id, json!({"expected_version": 0, "script": set_word_op(1, 1.0)})).await;
    assert_eq!(s, StatusCode::OK, "{v1}");
    assert_eq!(v1["version"], 1);
    let after = parse_hed_json(&v1["hed"].to_string()).unwrap();
    let script = EditScript::from_json(&set_word_op(1, 1.0).to_string()).unwrap();
    assert_eq!(after, apply(&before, &script).unwrap());
    let changed: usize = before
        .rows()
        .iter()
        .zip(after.rows())
        .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count())
        .sum();
    assert!(changed <= 4, "only word 1's Happy word-block cells may change");

    let (s, stale) = patch(&app, &id, json!({"expected_version": 0, "script": set_word_op(0, 0.0)})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(stale["error"]["code"], "service.version_conflict");
    let (_, now) = get_json(&app, &format!("/utterances/{id}/hed")).await;
    assert_eq!(now["hed"], v1["hed"]);
    assert_eq!(now["version"], 1);

    let (s, bad) = patch(&app, &id, json!({"expected_version": 1, "script": set_word_op(99, 0.5)})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(bad["error"]["code"], "editor.index");
    let (s, _) = patch(&app, &id, json!({"expected_version": 1, "script": {"ops": 3}})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn undo_restores_initial_and_rejects_empty_history() {
    let app = app(true);
    let (id, v0) = created(&app).await;
    let undo = |app: Router, id: String| async move {
        let (s, b) = send(&app, Request::post(format!("/utterances/{id}/undo")).body(Body::empty()).unwrap()).await;
        (s, serde_json::from_slice::<Value>(&b).unwrap())
    };
    let (s, _) = undo(app.clone(), id.clone()).await;
    assert_eq!(s, StatusCode::CONFLICT);
    patch(&app, &id, json!({"expected_version": 0, "script": set_word_op(0, 0.25)})).await;
    let (s, v) = undo(app.clone(), id.clone()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["hed"], v0["hed"]);
    assert_eq!(v["version"], 2);
    assert_eq!(v["history"], 0);
}

#[tokio::test]
async fn export_round_trips_and_unknown_ids_404() {
    let app = app(true);
    let (id, v0) = created(&app).await;
    let m = parse_hed_json(&v0["hed"].to_string()).unwrap();
    for fmt in ["csv", "json"] {
        let (s, body) =
            send(&app, Request::get(format!("/utterances/{id}/export?format={fmt}")).body(Body::empty()).unwrap()).await;
        assert_eq!(s, StatusCode::OK);
        let parsed = parse_hed(std::str::from_utf8(&body).unwrap(), fmt.parse::<HedFormat>().unwrap()).unwrap();
        assert_eq!(parsed, m);
    }
    let (s, _) = send(&app, Request::get(format!("/utterances/{id}/export?format=xml")).body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, audio) = send(&app, Request::get(format!("/utterances/{id}/audio")).body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(audio, fixture().0);
    let (s, v) = get_json(&app, "/utterances/nope/hed").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "service.not_found");
}

#[tokio::test]
async fn conflicting_patches_serialize() {
    let app = app(true);
    let (id, _) = created(&app).await;
    let a = patch(&app, &id, json!({"expected_version": 0, "script": set_word_op(0, 0.1)}));
    let b = patch(&app, &id, json!({"expected_version": 0, "script": set_word_op(0, 0.9)}));
    let ((sa, _), (sb, _)) = tokio::join!(a, b);
    let ok = [sa, sb].iter().filter(|s| **s == StatusCode::OK).count();
    let conflict = [sa, sb].iter().filter(|s| **s == StatusCode::CONFLICT).count();
    assert_eq!((ok, conflict), (1, 1));
}

#[tokio::test]
async fn cors_preflight_is_answered() {
    let app = app(true);
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/utterances/x/hed")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "PATCH")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}

#[tokio::test]
async fn sessions_persist_and_restore() {
    let dir = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::new(Some(bank()), Analyzer::default(), Some(dir.path().to_path_buf())));
    let app = router(state.clone(), None);
    let (id, _) = created(&app).await;
    let (_, v1) = patch(&app, &id, json!({"expected_version": 0, "script": set_word_op(2, 0.75)})).await;
    assert_eq!(state.persist().unwrap(), 1);

    let fresh = Arc::new(AppState::new(Some(bank()), Analyzer::default(), Some(dir.path().to_path_buf())));
    assert_eq!(fresh.restore().unwrap(), 1);
    let (s, v) = get_json(&router(fresh, None), &format!("/utterances/{id}/hed")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["hed"], v1["hed"]);
    assert_eq!(v["version"], 1);
}
