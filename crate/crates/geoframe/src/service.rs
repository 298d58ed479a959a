//! HTTP/JSON service over the pipeline.
//!
//! `POST /query` runs everything; `/interpret`, `/repair` and `/execute`
//! expose the stages one at a time. `/execute` validates again, so a frame
//! that skipped repair cannot reach the executor.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use geoframe_core::frame::SemanticFrame;
use geoframe_core::graph::{graph_to_json, graph_to_text};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::audit::{frame_hash, AuditLog, AuditRecord};
use crate::outputs::{ranking_value, render_map_value, summarize_frame};
use crate::pipeline::{Engine, ErrorCode, PipelineError};
use crate::sha256_hex;

pub struct AppState {
    pub engine: Engine,
    pub audit: AuditLog,
}

type Shared = Arc<AppState>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRequest {
    text: String,
    #[serde(default)]
    anchor_pick: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpretRequest {
    text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRequest {
    frame: SemanticFrame,
    #[serde(default)]
    anchor_pick: Option<usize>,
}

pub fn status_for(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::EmptyQuery => StatusCode::BAD_REQUEST,
        ErrorCode::InterpreterUnavailable | ErrorCode::InterpretationFailed => StatusCode::BAD_GATEWAY,
        ErrorCode::RepairRejected
        | ErrorCode::AmbiguousAnchor
        | ErrorCode::BadPick
        | ErrorCode::InvalidFrame
        | ErrorCode::CompileFailed => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorCode::ExecutionFailed => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn reply(status: StatusCode, body: Value) -> Response {
    (status, Json(body)).into_response()
}

fn bad_request(message: String) -> Response {
    reply(
        StatusCode::BAD_REQUEST,
        json!({"error": {"stage": "request", "code": "malformed_request", "message": message}}),
    )
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| bad_request(e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("worker panicked")
}

async fn query(State(st): State<Shared>, body: Bytes) -> Response {
    let req: QueryRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    blocking(move || {
        let resp = st.engine.run_query(&req.text, req.anchor_pick);
        st.audit.record(&AuditRecord::from_response("query", &resp));
        let status = resp.error.as_ref().map_or(StatusCode::OK, |e| status_for(e.code));
        reply(status, serde_json::to_value(&resp).expect("serializes"))
    })
    .await
}

async fn interpret(State(st): State<Shared>, body: Bytes) -> Response {
    let req: InterpretRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    blocking(move || {
        let mut rec = AuditRecord::new("interpret", st.engine.dataset_version());
        rec.query_sha256 = Some(sha256_hex(req.text.as_bytes()));
        rec.backend = Some(st.engine.interpreter.kind());
        let out = match st.engine.interpret(&req.text) {
            Ok(i) => {
                rec.raw_output_sha256 = i.raw_outputs.iter().map(|t| sha256_hex(t.as_bytes())).collect();
                rec.raw_frame_sha256 = Some(frame_hash(&i.frame));
                reply(
                    StatusCode::OK,
                    json!({
                        "raw_frame": i.frame,
                        "backend": i.backend,
                        "raw_outputs": i.raw_outputs,
                        "latency_ms": i.latency_ms,
                    }),
                )
            }
            Err(e) => {
                rec.error_stage = Some(e.stage);
                rec.error_code = Some(e.code);
                reply(status_for(e.code), json!({ "error": e }))
            }
        };
        st.audit.record(&rec);
        out
    })
    .await
}

async fn repair(State(st): State<Shared>, body: Bytes) -> Response {
    let req: FrameRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    blocking(move || {
        let mut rec = AuditRecord::new("repair", st.engine.dataset_version());
        rec.raw_frame_sha256 = Some(frame_hash(&req.frame));
        let out = match st.engine.repair(&req.frame) {
            Ok((frame, report)) => {
                rec.repair_actions = report.actions.clone();
                let ambiguity = st.engine.resolve(frame.clone(), None).err();
                let frame = match req.anchor_pick {
                    Some(n) => match st.engine.resolve(frame, Some(n)) {
                        Ok(f) => f,
                        Err(e) => {
                            rec.error_stage = Some(e.stage);
                            rec.error_code = Some(e.code);
                            st.audit.record(&rec);
                            return reply(status_for(e.code), json!({"error": e, "repair_report": report}));
                        }
                    },
                    None => frame,
                };
                rec.repaired_frame_sha256 = Some(frame_hash(&frame));
                let pending = if req.anchor_pick.is_some() { None } else { ambiguity };
                reply(
                    StatusCode::OK,
                    json!({"repaired_frame": frame, "repair_report": report, "ambiguity": pending}),
                )
            }
            Err(f) => {
                let e = PipelineError::from_repair(&f);
                rec.repair_actions = f.report.actions.clone();
                rec.error_stage = Some(e.stage);
                rec.error_code = Some(e.code);
                reply(status_for(e.code), json!({"error": e, "repair_report": f.report}))
            }
        };
        st.audit.record(&rec);
        out
    })
    .await
}

async fn execute(State(st): State<Shared>, body: Bytes) -> Response {
    let req: FrameRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    blocking(move || {
        let e = &st.engine;
        let mut rec = AuditRecord::new("execute", e.dataset_version());
        rec.repaired_frame_sha256 = Some(frame_hash(&req.frame));
        let frame = match req.anchor_pick {
            Some(n) => match e.resolve(req.frame, Some(n)) {
                Ok(f) => f,
                Err(err) => {
                    rec.error_stage = Some(err.stage);
                    rec.error_code = Some(err.code);
                    st.audit.record(&rec);
                    return reply(status_for(err.code), json!({ "error": err }));
                }
            },
            None => req.frame,
        };
        let out = match e.execute_frame(&frame) {
            Ok(ex) => {
                rec.executed = true;
                rec.provenance = ex.result.provenance.clone();
                let counts: serde_json::Map<String, Value> = ex
                    .result
                    .role_records
                    .iter()
                    .map(|(role, rs)| (role.as_str().to_string(), json!(rs.len())))
                    .collect();
                reply(
                    StatusCode::OK,
                    json!({
                        "graph_audit_text": graph_to_text(&ex.graph),
                        "graph": graph_to_json(&ex.graph),
                        "counts": counts,
                        "map": render_map_value(&ex.result),
                        "table": ex.result.ranking.as_ref().map(|_| ranking_value(&ex.result)),
                        "nl_summary": summarize_frame(&frame, &Default::default()),
                        "dataset_version": ex.result.dataset_version,
                        "provenance": ex.result.provenance,
                        "timings": {"compile_ms": ex.compile_ms, "execute_ms": ex.execute_ms},
                    }),
                )
            }
            Err(f) => {
                rec.error_stage = Some(f.error.stage);
                rec.error_code = Some(f.error.code);
                let audit = f.graph.as_ref().map(graph_to_text);
                reply(status_for(f.error.code), json!({"error": f.error, "graph_audit_text": audit}))
            }
        };
        st.audit.record(&rec);
        out
    })
    .await
}

async fn registry(State(st): State<Shared>) -> Response {
    reply(StatusCode::OK, serde_json::to_value(&st.engine.registry).expect("serializes"))
}

async fn dataset_version(State(st): State<Shared>) -> Response {
    reply(StatusCode::OK, json!({"dataset_version": st.engine.dataset_version()}))
}

async fn health(State(st): State<Shared>) -> Response {
    reply(
        StatusCode::OK,
        json!({"status": "ok", "dataset_version": st.engine.dataset_version(), "backend": st.engine.interpreter.kind()}),
    )
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/query", post(query))
        .route("/interpret", post(interpret))
        .route("/repair", post(repair))
        .route("/execute", post(execute))
        .route("/registry", get(registry))
        .route("/dataset/version", get(dataset_version))
        .route("/health", get(health))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: Shared) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
