//! HTTP service: pair prediction, guarded feedback and health.
//!
//! ```text
//! POST /v1/predict   {"question_a": 12 | "https://site/questions/12/slug",
//!                     "question_b": ..., "text_a"?: "...", "text_b"?: "..."}
//!                 -> {"harder": 12, "confidence": 0.81, "margin": -0.4,
//!                     "cold_start_used": false, "model_generation": 3}
//! POST /v1/feedback  {"question_a": ..., "question_b": ..., "user_says_harder": ...}
//!                 -> {"accepted": true, "harder_before": 12,
//!                     "confidence_before": 0.62, "model_generation": 4}
//! GET  /v1/health -> {"status": "ok", "model_generation": 4, "questions": 3000,
//!                     "updates": 1, "accepted_feedback": 1,
//!                     "rejected_feedback": 0, "threshold": 0.75}
//! ```
//!
//! Errors are `{"error": code, "message": text}` with status 400
//! (`bad_request`), 404 (`unknown_question`), 422 (`cold_start_feedback`,
//! feedback on a pair the model does not judge directly) or 500
//! (`internal`).
//!
//! Readers clone an `Arc` of the live model under a short read lock and never
//! wait for feedback processing; feedback is serialized by one async mutex and
//! publishes each updated model by swapping the `Arc`.

pub mod snapshot;

use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::coldstart::{predict_any, ColdStartIndex, PairSide, DEFAULT_K};
use crate::error::{Error, Result};
use crate::experiments::RunLedger;
use crate::features::NodeScoreCache;
use crate::graph::DifficultyNetwork;
use crate::ingest::Dataset;
use crate::model::{incremental_update, PairClassifier, UpdateOutcome, DEFAULT_FEEDBACK_THRESHOLD};
use crate::types::QuestionId;

pub use snapshot::{has_snapshot, read_snapshot, write_snapshot, Snapshot, SNAPSHOT_FORMAT_VERSION};

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceConfig {
    pub port: u16,
    pub snapshot_dir: Option<PathBuf>,
    pub threshold: f64,
    /// Period of background persistence; `None` persists only on shutdown.
    pub snapshot_interval: Option<Duration>,
    pub k: usize,
    pub ledger: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: DEFAULT_PORT,
            snapshot_dir: None,
            threshold: DEFAULT_FEEDBACK_THRESHOLD,
            snapshot_interval: None,
            k: DEFAULT_K,
            ledger: None,
        }
    }
}

impl ServiceConfig {
    /// Read `QDIFF_PORT`, `QDIFF_SNAPSHOT_DIR`, `QDIFF_CONFIDENCE_THRESHOLD`,
    /// `QDIFF_SNAPSHOT_INTERVAL_SECS`, `QDIFF_K` and `QDIFF_LEDGER` through
    /// `lookup`, falling back to the defaults.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<ServiceConfig> {
        fn parsed<T: std::str::FromStr>(key: &str, v: Option<String>) -> Result<Option<T>> {
            v.map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("cannot parse {key}={s:?}")))
            })
            .transpose()
        }
        let d = ServiceConfig::default();
        let cfg = ServiceConfig {
            port: parsed("QDIFF_PORT", lookup("QDIFF_PORT"))?.unwrap_or(d.port),
            snapshot_dir: lookup("QDIFF_SNAPSHOT_DIR")
                .filter(|s| !s.is_empty())
                .map(PathBuf::from),
            threshold: parsed("QDIFF_CONFIDENCE_THRESHOLD", lookup("QDIFF_CONFIDENCE_THRESHOLD"))?
                .unwrap_or(d.threshold),
            snapshot_interval: parsed::<u64>("QDIFF_SNAPSHOT_INTERVAL_SECS", lookup("QDIFF_SNAPSHOT_INTERVAL_SECS"))?
                .filter(|s| *s > 0)
                .map(Duration::from_secs),
            k: parsed("QDIFF_K", lookup("QDIFF_K"))?.unwrap_or(d.k),
            ledger: lookup("QDIFF_LEDGER").filter(|s| !s.is_empty()).map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_env() -> Result<ServiceConfig> {
        ServiceConfig::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!(
                "confidence threshold {} outside 0.5..=1",
                self.threshold
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// One complete model version.
#[derive(Debug)]
pub struct ModelVersion {
    pub model: PairClassifier,
    pub generation: u64,
}

struct Shared {
    current: RwLock<Arc<ModelVersion>>,
    writer: tokio::sync::Mutex<()>,
    network: DifficultyNetwork,
    cache: NodeScoreCache,
    index: ColdStartIndex,
    config: ServiceConfig,
    ledger: Option<RunLedger>,
    accepted: AtomicU64,
    rejected: AtomicU64,
    dirty: AtomicBool,
}

#[derive(Clone)]
pub struct Service {
    shared: Arc<Shared>,
}

/// A question given as a numeric id or a URL/path containing it.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum QuestionRef {
    Id(u64),
    Text(String),
}

impl QuestionRef {
    pub fn resolve(&self) -> Result<QuestionId> {
        match self {
            QuestionRef::Id(q) => Ok(QuestionId(*q)),
            QuestionRef::Text(s) => parse_question_ref(s),
        }
    }
}

/// A bare id, or the id in `.../questions/<id>/...`, `.../q/<id>` or the
/// last numeric path segment of a URL.
pub fn parse_question_ref(s: &str) -> Result<QuestionId> {
    let s = s.trim();
    if let Ok(q) = s.parse::<u64>() {
        return Ok(QuestionId(q));
    }
    let without_scheme = s
        .split_once("://")
        .map_or(s, |(_, rest)| rest.split_once('/').map_or("", |(_, p)| p));
    let path = without_scheme.split(['?', '#']).next().unwrap_or("");
    let segments: Vec<&str> = path.split('/').filter(|p| !p.is_empty()).collect();
    let numeric = |p: &str| p.parse::<u64>().ok();
    let named = segments
        .windows(2)
        .find(|w| matches!(w[0], "questions" | "q") && numeric(w[1]).is_some())
        .and_then(|w| numeric(w[1]));
    named
        .or_else(|| segments.iter().rev().find_map(|p| numeric(p)))
        .map(QuestionId)
        .ok_or_else(|| Error::InvalidParameter(format!("no question id in {s:?}")))
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct PredictRequest {
    pub question_a: QuestionRef,
    pub question_b: QuestionRef,
    #[serde(default)]
    pub text_a: Option<String>,
    #[serde(default)]
    pub text_b: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct PredictResponse {
    pub harder: u64,
    pub confidence: f64,
    pub margin: f64,
    pub cold_start_used: bool,
    pub model_generation: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct FeedbackRequest {
    pub question_a: QuestionRef,
    pub question_b: QuestionRef,
    pub user_says_harder: QuestionRef,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct FeedbackResponse {
    pub accepted: bool,
    pub harder_before: u64,
    pub confidence_before: f64,
    pub model_generation: u64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_generation: u64,
    pub questions: usize,
    pub updates: u64,
    pub accepted_feedback: u64,
    pub rejected_feedback: u64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

/// A request failure with its HTTP status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> ApiError {
        let (status, code) = match &e {
            Error::UnknownQuestion(_) => (StatusCode::NOT_FOUND, "unknown_question"),
            Error::ColdStart(_) => (StatusCode::UNPROCESSABLE_ENTITY, "cold_start_feedback"),
            Error::InvalidParameter(_) | Error::Malformed { .. } => (StatusCode::BAD_REQUEST, "bad_request"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &Bytes) -> std::result::Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))
}

impl Service {
    /// Serve `snapshot`, using `dataset` for question texts and the
    /// brand-new test of the cold-start path.
    pub fn new(snapshot: Snapshot, dataset: &Dataset, config: ServiceConfig) -> Result<Service> {
        config.validate()?;
        let index = ColdStartIndex::build(dataset, &snapshot.network);
        let ledger = config.ledger.clone().map(RunLedger::new);
        Ok(Service {
            shared: Arc::new(Shared {
                current: RwLock::new(Arc::new(ModelVersion {
                    model: snapshot.model,
                    generation: snapshot.generation,
                })),
                writer: tokio::sync::Mutex::new(()),
                network: snapshot.network,
                cache: snapshot.cache,
                index,
                config,
                ledger,
                accepted: AtomicU64::new(0),
                rejected: AtomicU64::new(0),
                dirty: AtomicBool::new(false),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.shared.config
    }

    /// The live model version.
    pub fn current(&self) -> Arc<ModelVersion> {
        self.shared.current.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn publish(&self, next: ModelVersion) {
        *self.shared.current.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(next);
        self.shared.dirty.store(true, Ordering::SeqCst);
    }

    fn side(&self, q: QuestionId, inline: Option<&str>) -> Result<PairSide> {
        PairSide::resolve(q, inline, &self.shared.cache, &self.shared.index)
    }

    pub fn predict(&self, req: &PredictRequest) -> Result<PredictResponse> {
        let (a, b) = (req.question_a.resolve()?, req.question_b.resolve()?);
        if a == b {
            return Err(Error::InvalidParameter(format!(
                "a pair needs two distinct questions, got {a} twice"
            )));
        }
        let sa = self.side(a, req.text_a.as_deref())?;
        let sb = self.side(b, req.text_b.as_deref())?;
        let version = self.current();
        let (v, cold) = predict_any(
            &version.model,
            &self.shared.cache,
            &self.shared.index,
            &sa,
            &sb,
            self.shared.config.k,
        )?;
        Ok(PredictResponse {
            harder: v.harder.0,
            confidence: v.confidence,
            margin: v.margin,
            cold_start_used: cold,
            model_generation: version.generation,
        })
    }

    /// Apply feedback through the confidence filter. Only pairs that the
    /// model judges directly can be corrected.
    pub async fn feedback(&self, req: &FeedbackRequest) -> Result<FeedbackResponse> {
        let (a, b) = (req.question_a.resolve()?, req.question_b.resolve()?);
        let harder = req.user_says_harder.resolve()?;
        if a == b {
            return Err(Error::InvalidParameter(format!(
                "a pair needs two distinct questions, got {a} twice"
            )));
        }
        if harder != a && harder != b {
            return Err(Error::InvalidParameter(format!(
                "{harder} is not part of the pair ({a}, {b})"
            )));
        }
        for q in [a, b] {
            if let PairSide::New { .. } = self.side(q, None)? {
                return Err(Error::ColdStart(q));
            }
        }
        let _gate = self.shared.writer.lock().await;
        let version = self.current();
        let outcome = incremental_update(
            &version.model,
            &self.shared.cache,
            a,
            b,
            harder,
            self.shared.config.threshold,
        )?;
        let fields = |before: &crate::model::Verdict| {
            vec![
                ("a", a.to_string()),
                ("b", b.to_string()),
                ("says_harder", harder.to_string()),
                ("model_harder", before.harder.to_string()),
                ("confidence", format!("{:.6}", before.confidence)),
                ("generation", version.generation.to_string()),
            ]
        };
        match outcome {
            UpdateOutcome::Rejected { before } => {
                self.shared.rejected.fetch_add(1, Ordering::SeqCst);
                tracing::info!(%a, %b, %harder, confidence = before.confidence, "feedback rejected");
                self.log("feedback_rejected", &fields(&before));
                Ok(FeedbackResponse {
                    accepted: false,
                    harder_before: before.harder.0,
                    confidence_before: before.confidence,
                    model_generation: version.generation,
                })
            }
            UpdateOutcome::Accepted { model, before } => {
                self.shared.accepted.fetch_add(1, Ordering::SeqCst);
                self.log("feedback_accepted", &fields(&before));
                let generation = version.generation + 1;
                self.publish(ModelVersion { model, generation });
                Ok(FeedbackResponse {
                    accepted: true,
                    harder_before: before.harder.0,
                    confidence_before: before.confidence,
                    model_generation: generation,
                })
            }
        }
    }

    fn log(&self, event: &str, fields: &[(&str, String)]) {
        if let Some(l) = &self.shared.ledger {
            if let Err(e) = l.append(event, fields) {
                tracing::warn!(error = %e, "cannot write run ledger");
            }
        }
    }

    pub fn health(&self) -> HealthResponse {
        let v = self.current();
        HealthResponse {
            status: "ok".into(),
            model_generation: v.generation,
            questions: self.shared.cache.len(),
            updates: v.model.updates,
            accepted_feedback: self.shared.accepted.load(Ordering::SeqCst),
            rejected_feedback: self.shared.rejected.load(Ordering::SeqCst),
            threshold: self.shared.config.threshold,
        }
    }

    /// Write the live model with the network and cache to the snapshot
    /// directory. Returns `false` when no directory is configured.
    pub fn persist(&self) -> Result<bool> {
        let Some(dir) = &self.shared.config.snapshot_dir else {
            return Ok(false);
        };
        let version = self.current();
        self.shared.dirty.store(false, Ordering::SeqCst);
        let written = write_snapshot(
            dir,
            &version.model,
            &self.shared.network,
            &self.shared.cache,
            version.generation,
        );
        if written.is_err() {
            self.shared.dirty.store(true, Ordering::SeqCst);
        }
        written.map(|_| true)
    }

    /// Persist only when feedback changed the model since the last write.
    pub fn persist_if_dirty(&self) -> Result<bool> {
        if self.shared.dirty.load(Ordering::SeqCst) {
            self.persist()
        } else {
            Ok(false)
        }
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/v1/predict", post(predict_handler))
            .route("/v1/feedback", post(feedback_handler))
            .route("/v1/health", get(health_handler))
            .with_state(self.clone())
    }
}

async fn predict_handler(
    State(svc): State<Service>,
    body: Bytes,
) -> std::result::Result<Json<PredictResponse>, ApiError> {
    let req: PredictRequest = parse_json(&body)?;
    Ok(Json(svc.predict(&req)?))
}

async fn feedback_handler(
    State(svc): State<Service>,
    body: Bytes,
) -> std::result::Result<Json<FeedbackResponse>, ApiError> {
    let req: FeedbackRequest = parse_json(&body)?;
    Ok(Json(svc.feedback(&req).await?))
}

async fn health_handler(State(svc): State<Service>) -> Json<HealthResponse> {
    Json(svc.health())
}

/// Run the service on `listener` until `shutdown` resolves, persisting on
/// the configured timer and once more on the way out.
pub async fn serve(
    svc: Service,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let timer = svc.config().snapshot_interval.map(|period| {
        let svc = svc.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            tick.tick().await;
            loop {
                tick.tick().await;
                let s = svc.clone();
                match tokio::task::spawn_blocking(move || s.persist_if_dirty()).await {
                    Ok(Err(e)) => tracing::warn!(error = %e, "periodic snapshot failed"),
                    Err(e) => tracing::warn!(error = %e, "periodic snapshot task failed"),
                    Ok(Ok(_)) => {}
                }
            }
        })
    });
    let served = axum::serve(listener, svc.router())
        .with_graceful_shutdown(shutdown)
        .await;
    if let Some(t) = timer {
        t.abort();
    }
    let persisted = svc.persist_if_dirty();
    served?;
    persisted.map(|_| ())
}
