//! HTTP front end for pipeline runs, versioned under `/v1`.
//!
//! Runs execute on the blocking pool. Submitting returns the run id as soon
//! as the run has started; progress is streamed as server-sent events and
//! the finished trace is read back from the trace store.

mod error;
mod live;
mod request;

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde_json::json;
use taskgrasp::pipeline::{
    rerun_with_part, run_pipeline, Observation, PipelineConfig, PipelineError, ProgressEvent, RunOutput, TraceStore,
    CLOUD_FILE, GRASPS_FILE, MASK_FILE,
};
use taskgrasp::reasoning::Instruction;
use tokio::sync::oneshot;

pub use error::ApiError;
use live::{LiveRuns, Message};
pub use request::{ObservationUpload, OverrideRequest, RunRequest, SceneSpec};

/// Hidden directory under the trace root holding each run's observation,
/// so overrides can re-run grounding after a restart.
const OBSERVATIONS_DIR: &str = ".observations";

pub struct AppState {
    cfg: PipelineConfig,
    store: TraceStore,
    live: LiveRuns,
}

impl AppState {
    /// `cfg.trace_dir` is where runs are published; it is required.
    pub fn new(cfg: PipelineConfig) -> Result<Self, String> {
        cfg.check()?;
        let root = cfg.trace_dir.clone().ok_or("the server needs a trace directory")?;
        Ok(Self { store: TraceStore::new(root), cfg, live: LiveRuns::default() })
    }

    fn observation_dir(&self, run_id: &str) -> PathBuf {
        self.store.root().join(OBSERVATIONS_DIR).join(run_id)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/runs", post(submit).get(list))
        .route("/v1/runs/{id}", get(trace))
        .route("/v1/runs/{id}/mask", get(mask))
        .route("/v1/runs/{id}/cloud", get(cloud))
        .route("/v1/runs/{id}/grasps", get(grasps))
        .route("/v1/runs/{id}/override", post(override_part))
        .route("/v1/runs/{id}/events", get(events))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint") })
        .with_state(state)
}

/// Binds `addr` and serves until the process exits.
pub async fn serve(cfg: PipelineConfig, addr: &str) -> Result<(), String> {
    let state = Arc::new(AppState::new(cfg)?);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("{addr}: {e}"))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(|e| e.to_string())?);
    axum::serve(listener, router(state)).await.map_err(|e| e.to_string())
}

fn parse<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("MalformedRequest", e.to_string()))
}

/// Starts `job` on the blocking pool and waits for its run id.
async fn launch(
    state: Arc<AppState>,
    obs: Observation,
    job: impl FnOnce(&Observation, &mut dyn FnMut(&ProgressEvent)) -> Result<RunOutput, PipelineError> + Send + 'static,
) -> Result<String, ApiError> {
    let (tx, rx) = oneshot::channel::<Result<String, PipelineError>>();
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut tx = Some(tx);
        let mut id: Option<String> = None;
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| job(&obs, &mut |ev| {
            if id.is_none() {
                // the first event arrives after validation, before any stage runs
                if let Err(e) = obs.save(&worker.observation_dir(&ev.run_id)) {
                    eprintln!("run {}: observation not saved: {e}", ev.run_id);
                }
                worker.live.open(&ev.run_id);
                id = Some(ev.run_id.clone());
                if let Some(tx) = tx.take() {
                    let _ = tx.send(Ok(ev.run_id.clone()));
                }
            }
            worker.live.push(ev);
        })));
        match (id, result) {
            (Some(id), Ok(result)) => {
                let complete = result.as_ref().is_ok_and(|out| out.trace.is_complete());
                worker.live.finish(&id, complete, result.err().map(|e| e.to_string()));
            }
            (Some(id), Err(_)) => worker.live.finish(&id, false, Some("run panicked".into())),
            (None, Ok(Err(e))) => {
                if let Some(tx) = tx.take() {
                    let _ = tx.send(Err(e));
                }
            }
            // dropping the sender reports the abort
            (None, _) => {}
        }
    });
    match rx.await {
        Ok(Ok(id)) => Ok(id),
        Ok(Err(e)) => Err(ApiError::from(e)),
        Err(_) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "RunAborted", "run stopped before starting")),
    }
}

async fn submit(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<serde_json::Value>, ApiError> {
    let req: RunRequest = parse(&body)?;
    let instr = Instruction::new(req.instruction.clone()).map_err(|e| ApiError::bad_request("InvalidInstruction", e.to_string()))?;
    let obs = req.observation()?;
    let mut cfg = state.cfg.clone();
    if let Some(seed) = req.seed {
        cfg.grasp.sampler.seed = seed;
    }
    let id = launch(state, obs, move |obs, progress| run_pipeline(&instr, obs, &cfg, progress)).await?;
    Ok(Json(json!({ "run_id": id })))
}

async fn override_part(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let req: OverrideRequest = parse(&body)?;
    let parent = state.store.load(&id)?;
    if parent.stage(taskgrasp::pipeline::Stage::Reasoning).is_none_or(|s| !s.is_ok()) {
        return Err(ApiError::from(PipelineError::NoReasoning));
    }
    let dir = state.observation_dir(&id);
    let obs = tokio::task::spawn_blocking(move || Observation::load(&dir))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::CONFLICT, "ObservationMissing", e.to_string()))?;
    let cfg = parent.config.clone();
    let cfg = PipelineConfig { trace_dir: state.cfg.trace_dir.clone(), ..cfg };
    let part = req.part;
    let new_id = launch(state, obs, move |obs, progress| rerun_with_part(&parent, &part, obs, &cfg, progress)).await?;
    Ok(Json(json!({ "run_id": new_id, "parent_run_id": id })))
}

async fn list(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    let store = state.store.clone();
    let traces = tokio::task::spawn_blocking(move || store.list()).await.map_err(|e| ApiError::internal(e.to_string()))??;
    let runs: Vec<_> = traces
        .iter()
        .map(|t| {
            json!({
                "run_id": t.run_id,
                "parent_run_id": t.parent_run_id,
                "instruction": t.instruction,
                "started_at": t.started_at,
                "complete": t.is_complete(),
                "error": t.error().map(|(stage, e)| json!({ "stage": stage, "kind": e.kind })),
            })
        })
        .collect();
    Ok(Json(json!({ "runs": runs })))
}

async fn trace(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match state.store.load(&id) {
        Ok(t) => Ok(([(header::CONTENT_TYPE, "application/json")], t.to_json()).into_response()),
        Err(PipelineError::NotFound(_)) if state.live.is_running(&id) => {
            Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": id, "status": "running" }))).into_response())
        }
        Err(e) => Err(e.into()),
    }
}

fn artifact(state: &AppState, id: &str, file: &str, content_type: &'static str) -> Result<Response, ApiError> {
    let bytes = state.store.artifact(id, file)?;
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}

async fn mask(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    artifact(&state, &id, MASK_FILE, "image/png")
}

async fn cloud(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    artifact(&state, &id, CLOUD_FILE, "application/json")
}

async fn grasps(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    artifact(&state, &id, GRASPS_FILE, "application/json")
}

/// `progress` events carry a [`ProgressEvent`]; the stream ends with one
/// `done` event.
async fn events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, std::convert::Infallible>>>, ApiError> {
    let feed = match state.live.subscribe(&id) {
        Some(feed) => feed,
        None => {
            // finished before this process started: only the outcome is known
            let t = state.store.load(&id)?;
            live::Feed::finished(&t.run_id, t.is_complete())
        }
    };
    let stream = futures::stream::unfold(Some(feed), |feed| async move {
        let mut feed = feed?;
        let msg = feed.next().await?;
        let event = match &msg {
            Message::Progress(ev) => Event::default().event("progress").json_data(ev).expect("event serializes"),
            Message::Done(d) => Event::default().event("done").json_data(d).expect("event serializes"),
        };
        let rest = if matches!(msg, Message::Done(_)) { None } else { Some(feed) };
        Some((Ok(event), rest))
    });
    Ok(Sse::new(stream))
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/http.md")]
mod book {}
