#![allow(dead_code)]

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_elicit::elicit::{LazyLookup, NoiseParams};
use robust_elicit::policy::AlternativesFile;
use robust_elicit::AlternativeSet;
use robust_elicit_survey::{default_crt_questions, router, Clock, Service, ServiceOptions, SessionStore};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const ADMIN: &str = "admin-secret";
pub const START_MS: u64 = 1_700_000_000_000;

pub struct Harness {
    pub app: Router,
    pub service: Arc<Service>,
    pub now: Arc<AtomicU64>,
}

pub fn alternatives(i: usize, j: usize, seed: u64) -> AlternativesFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..i).map(|_| (0..j).map(|_| rng.random()).collect()).collect();
    let mut file = AlternativesFile::from_alternatives(&AlternativeSet::from_features(rows).unwrap());
    file.display_mask[j - 1] = false;
    file
}

pub fn harness_with(file: AlternativesFile, k: usize, store: SessionStore, seed: u64) -> Harness {
    let lookup = LazyLookup::new(file.to_alternative_set().unwrap(), k, NoiseParams::default()).unwrap();
    let now = Arc::new(AtomicU64::new(START_MS));
    let clock_now = now.clone();
    let clock: Clock = Arc::new(move || clock_now.load(Ordering::SeqCst));
    let options = ServiceOptions {
        expiry_ms: 120 * 60_000,
        admin_token: Some(ADMIN.into()),
        unique_worker_ids: true,
        seed,
        crt_questions: default_crt_questions(),
    };
    let service = Arc::new(Service::new(&file, lookup, store, options, clock).unwrap());
    Harness {
        app: router(service.clone()),
        service,
        now,
    }
}

pub fn harness(seed: u64) -> Harness {
    harness_with(alternatives(6, 3, 1), 2, SessionStore::in_memory(), seed)
}

impl Harness {
    pub fn advance(&self, ms: u64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }

    pub async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, String) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    pub async fn json(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let (status, text) = self.call(method, uri, token, body).await;
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    /// Create a session; returns (id, token).
    pub async fn create(&self, worker: Option<&str>) -> (String, String) {
        let mut body = json!({"v": 1, "demographics": {
            "age_group": "25-34", "ethnicity": "declined", "gender": "declined", "healthcare_worker": "no"
        }});
        if let Some(w) = worker {
            body["worker_id"] = json!(w);
        }
        let (status, v) = self.json(Method::POST, "/sessions", None, Some(body)).await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        (v["id"].as_str().unwrap().to_string(), v["token"].as_str().unwrap().to_string())
    }

    pub async fn next(&self, id: &str, token: &str) -> Value {
        let (status, v) = self.json(Method::GET, &format!("/sessions/{id}/next"), Some(token), None).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        v
    }

    pub async fn answer(&self, id: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.json(Method::POST, &format!("/sessions/{id}/answers"), Some(token), Some(body)).await
    }

    pub async fn export(&self) -> String {
        let (status, text) = self.call(Method::GET, "/export", Some(ADMIN), None).await;
        assert_eq!(status, StatusCode::OK, "{text}");
        text
    }
}
