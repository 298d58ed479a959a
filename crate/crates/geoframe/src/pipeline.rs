//! The end-to-end pipeline shared by the CLI, the service and the
//! evaluation harness: interpret, repair, resolve ambiguity, compile,
//! execute, render.

use std::collections::BTreeMap;
use std::time::Instant;

use geoframe_core::exec::{execute, NodeTrace, ResultSet};
use geoframe_core::fixture::{generate_fixture, FixtureSpec};
use geoframe_core::frame::{AnchorCandidate, SemanticFrame};
use geoframe_core::graph::{check_graph, compile, graph_to_json, graph_to_text, ExecGraph};
use geoframe_core::repair::{
    ambiguous_references, pick_candidate, repair, validate_frame, Gazetteer, NormalizationTable, Rejection,
    RepairContext, RepairFailure, RepairReport, Violation,
};
use geoframe_core::schema::SchemaRegistry;
use geoframe_core::store::Dataset;
use serde::Serialize;
use serde_json::Value;

use crate::ingest::LoadedData;
use crate::interpret::{
    build_system_prompt, BackendKind, InterpretError, Interpretation, Interpreter, SystemPrompt,
};
use crate::outputs::{ranking_value, render_map_value, summarize_frame};
use crate::registry::default_registry;
use crate::table::default_table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Interpret,
    Repair,
    Resolve,
    Validate,
    Compile,
    Execute,
}

/// Why a stage stopped the pipeline. Maps onto HTTP statuses and CLI exit
/// codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    EmptyQuery,
    InterpreterUnavailable,
    InterpretationFailed,
    RepairRejected,
    AmbiguousAnchor,
    BadPick,
    InvalidFrame,
    CompileFailed,
    ExecutionFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineError {
    pub stage: Stage,
    pub code: ErrorCode,
    pub message: String,
    /// Choices for an ambiguous place, numbered from 1 in this order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<AnchorCandidate>,
    /// Name of the ambiguous reference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection: Option<Rejection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    /// Raw backend text when interpretation failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

impl PipelineError {
    fn new(stage: Stage, code: ErrorCode, message: impl Into<String>) -> Self {
        PipelineError {
            stage,
            code,
            message: message.into(),
            candidates: Vec::new(),
            reference: None,
            rejection: None,
            violations: Vec::new(),
            raw_text: None,
        }
    }

    fn from_interpret(e: InterpretError) -> Self {
        let code = match &e {
            InterpretError::EmptyQuery => ErrorCode::EmptyQuery,
            InterpretError::Unavailable(_) => ErrorCode::InterpreterUnavailable,
            InterpretError::Failed { .. } => ErrorCode::InterpretationFailed,
        };
        let mut err = PipelineError::new(Stage::Interpret, code, e.to_string());
        if let InterpretError::Failed { raw_text, .. } = e {
            err.raw_text = Some(raw_text);
        }
        err
    }

    pub fn from_repair(f: &RepairFailure) -> Self {
        let mut err = PipelineError::new(Stage::Repair, ErrorCode::RepairRejected, f.reason.to_string());
        if let Rejection::UnrepairableStructure { violations } = &f.reason {
            err.violations = violations.clone();
        }
        err.rejection = Some(f.reason.clone());
        err
    }
}

/// A compiled and executed frame.
#[derive(Debug, Clone)]
pub struct Execution {
    pub graph: ExecGraph,
    pub result: ResultSet,
    pub compile_ms: f64,
    pub execute_ms: f64,
}

/// Failure after compilation keeps the graph for the audit view.
#[derive(Debug, Clone)]
pub struct ExecuteFailure {
    pub error: PipelineError,
    pub graph: Option<ExecGraph>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub interpret_ms: f64,
    pub repair_ms: f64,
    pub compile_ms: f64,
    pub execute_ms: f64,
    pub render_ms: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.interpret_ms + self.repair_ms + self.compile_ms + self.execute_ms + self.render_ms
    }
}

/// Every stage artifact that was produced, plus an error naming the stage
/// that stopped the run. The repair report is always present.
#[derive(Debug, Clone, Serialize)]
pub struct QueryResponse {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendKind>,
    pub raw_frame: Option<SemanticFrame>,
    /// Backend output verbatim.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub raw_outputs: Vec<String>,
    pub repaired_frame: Option<SemanticFrame>,
    pub repair_report: RepairReport,
    pub graph_audit_text: Option<String>,
    pub graph: Option<Value>,
    /// Records per role.
    pub counts: BTreeMap<String, usize>,
    /// GeoJSON feature collection.
    pub map: Option<Value>,
    /// Ranking table; absent for unranked queries.
    pub table: Option<Value>,
    pub nl_summary: Option<String>,
    pub dataset_version: String,
    pub timings: StageTimings,
    /// Per-node trace of the executed graph.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<NodeTrace>,
    pub error: Option<PipelineError>,
    #[serde(skip)]
    pub result: Option<ResultSet>,
}

impl QueryResponse {
    fn empty(version: &str) -> Self {
        QueryResponse {
            query: None,
            backend: None,
            raw_frame: None,
            raw_outputs: Vec::new(),
            repaired_frame: None,
            repair_report: RepairReport::default(),
            graph_audit_text: None,
            graph: None,
            counts: BTreeMap::new(),
            map: None,
            table: None,
            nl_summary: None,
            dataset_version: version.into(),
            timings: StageTimings::default(),
            provenance: Vec::new(),
            error: None,
            result: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// Registry, table, data and interpreter, shared read-only by every query.
#[derive(Debug)]
pub struct Engine {
    pub registry: SchemaRegistry,
    pub table: NormalizationTable,
    pub gazetteer: Gazetteer,
    pub dataset: Dataset,
    pub interpreter: Interpreter,
    pub prompt: SystemPrompt,
}

impl Engine {
    pub fn new(registry: SchemaRegistry, table: NormalizationTable, data: LoadedData, interpreter: Interpreter) -> Self {
        let gazetteer = data.gazetteer(&registry);
        let prompt = build_system_prompt(&registry);
        Engine {
            registry,
            table,
            gazetteer,
            dataset: data.dataset,
            interpreter,
            prompt,
        }
    }

    /// Shipped registry and table over a generated fixture, rule-based
    /// interpreter.
    pub fn fixture(seed: u64) -> Self {
        let reg = default_registry();
        let data = LoadedData::from(generate_fixture(seed, FixtureSpec::default(), &reg).expect("default fixture builds"));
        Engine::new(reg, default_table(), data, Interpreter::Rules)
    }

    pub fn dataset_version(&self) -> &str {
        self.dataset.version()
    }

    pub fn interpret(&self, query: &str) -> Result<Interpretation, PipelineError> {
        self.interpreter.interpret(&self.prompt, query).map_err(PipelineError::from_interpret)
    }

    pub fn repair(&self, raw: &SemanticFrame) -> Result<(SemanticFrame, RepairReport), RepairFailure> {
        let cx = RepairContext {
            registry: &self.registry,
            table: &self.table,
            gazetteer: &self.gazetteer,
        };
        repair(cx, raw)
    }

    /// Applies a 1-based pick to the first ambiguous reference, or reports
    /// the ambiguity with its candidates.
    pub fn resolve(&self, frame: SemanticFrame, pick: Option<usize>) -> Result<SemanticFrame, PipelineError> {
        let Some(&i) = ambiguous_references(&frame).first() else {
            if pick.is_some() {
                return Err(PipelineError::new(
                    Stage::Resolve,
                    ErrorCode::BadPick,
                    "anchor_pick given but no place is ambiguous",
                ));
            }
            return Ok(frame);
        };
        let r = &frame.references[i];
        let Some(n) = pick else {
            let mut err = PipelineError::new(
                Stage::Resolve,
                ErrorCode::AmbiguousAnchor,
                format!("{:?} matches {} places; pick one", r.name, r.candidates.len()),
            );
            err.candidates = r.candidates.clone();
            err.reference = Some(r.name.clone());
            return Err(err);
        };
        let picked = pick_candidate(&frame, i, n).map_err(|e| {
            let mut err = PipelineError::new(Stage::Resolve, ErrorCode::BadPick, e.to_string());
            err.candidates = r.candidates.clone();
            err.reference = Some(r.name.clone());
            err
        })?;
        // a later reference may still be ambiguous
        self.resolve(picked, None)
    }

    /// Compiles and runs a frame. The frame is validated again here, so
    /// nothing reaches the executor without passing the registry checks.
    pub fn execute_frame(&self, frame: &SemanticFrame) -> Result<Execution, ExecuteFailure> {
        let fail = |error, graph| Err(ExecuteFailure { error, graph });
        let violations = validate_frame(&self.registry, frame);
        if !violations.is_empty() {
            let mut err = PipelineError::new(
                Stage::Validate,
                ErrorCode::InvalidFrame,
                format!("frame has {} violation(s)", violations.len()),
            );
            err.violations = violations;
            return fail(err, None);
        }
        if let Some(&i) = ambiguous_references(frame).first() {
            let r = &frame.references[i];
            let mut err = PipelineError::new(
                Stage::Resolve,
                ErrorCode::AmbiguousAnchor,
                format!("{:?} is ambiguous; pick a candidate first", r.name),
            );
            err.candidates = r.candidates.clone();
            err.reference = Some(r.name.clone());
            return fail(err, None);
        }
        let t = Instant::now();
        let graph = match compile(frame, &self.registry) {
            Ok(g) => g,
            Err(e) => return fail(PipelineError::new(Stage::Compile, ErrorCode::CompileFailed, e.to_string()), None),
        };
        let faults = check_graph(&graph);
        if !faults.is_empty() {
            let msg = faults.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; ");
            return fail(PipelineError::new(Stage::Compile, ErrorCode::CompileFailed, msg), Some(graph));
        }
        let compile_ms = ms_since(t);
        let t = Instant::now();
        match execute(&graph, &self.dataset) {
            Ok(result) => Ok(Execution {
                graph,
                result,
                compile_ms,
                execute_ms: ms_since(t),
            }),
            Err(e) => fail(
                PipelineError::new(Stage::Execute, ErrorCode::ExecutionFailed, e.to_string()),
                Some(graph),
            ),
        }
    }

    pub fn run_query(&self, query: &str, pick: Option<usize>) -> QueryResponse {
        let mut resp = QueryResponse::empty(self.dataset_version());
        resp.query = Some(query.to_string());
        resp.backend = Some(self.interpreter.kind());
        match self.interpret(query) {
            Ok(i) => {
                resp.timings.interpret_ms = i.latency_ms;
                resp.raw_outputs = i.raw_outputs;
                self.continue_from_raw(resp, i.frame, pick)
            }
            Err(e) => {
                resp.error = Some(e);
                resp
            }
        }
    }

    /// The pipeline from a raw frame onward, skipping interpretation.
    pub fn run_frame(&self, raw: SemanticFrame, pick: Option<usize>) -> QueryResponse {
        self.continue_from_raw(QueryResponse::empty(self.dataset_version()), raw, pick)
    }

    fn continue_from_raw(&self, mut resp: QueryResponse, raw: SemanticFrame, pick: Option<usize>) -> QueryResponse {
        let t = Instant::now();
        let repaired = self.repair(&raw);
        resp.timings.repair_ms = ms_since(t);
        resp.raw_frame = Some(raw);
        let frame = match repaired {
            Ok((frame, report)) => {
                resp.repair_report = report;
                frame
            }
            Err(f) => {
                resp.error = Some(PipelineError::from_repair(&f));
                resp.repair_report = *f.report;
                return resp;
            }
        };
        let frame = match self.resolve(frame.clone(), pick) {
            Ok(f) => f,
            Err(e) => {
                resp.repaired_frame = Some(frame);
                resp.error = Some(e);
                return resp;
            }
        };
        resp.repaired_frame = Some(frame.clone());
        match self.execute_frame(&frame) {
            Ok(ex) => self.render_into(&mut resp, &frame, ex),
            Err(f) => {
                if let Some(g) = &f.graph {
                    resp.graph_audit_text = Some(graph_to_text(g));
                    resp.graph = Some(graph_to_json(g));
                }
                resp.error = Some(f.error);
            }
        }
        resp
    }

    fn render_into(&self, resp: &mut QueryResponse, frame: &SemanticFrame, ex: Execution) {
        resp.timings.compile_ms = ex.compile_ms;
        resp.timings.execute_ms = ex.execute_ms;
        let t = Instant::now();
        resp.graph_audit_text = Some(graph_to_text(&ex.graph));
        resp.graph = Some(graph_to_json(&ex.graph));
        resp.counts = ex
            .result
            .role_records
            .iter()
            .map(|(role, rs)| (role.as_str().to_string(), rs.len()))
            .collect();
        resp.map = Some(render_map_value(&ex.result));
        resp.table = ex.result.ranking.as_ref().map(|_| ranking_value(&ex.result));
        resp.nl_summary = Some(summarize_frame(frame, &resp.repair_report));
        resp.provenance = ex.result.provenance.clone();
        resp.result = Some(ex.result);
        resp.timings.render_ms = ms_since(t);
    }
}
