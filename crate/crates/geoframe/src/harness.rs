//! Evaluation suite: cases with ground-truth frames, run through the full
//! pipeline and scored for intent completeness, execution success and
//! repair.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use geoframe_core::frame::{frames_equal, intent_diff, SemanticFrame};
use geoframe_core::repair::ActionKind;
use serde::{Deserialize, Serialize};

use crate::interpret::BackendKind;
use crate::pipeline::Engine;

pub const DEFAULT_CASES: &str = include_str!("../../../data/cases.jsonl");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCase {
    pub id: String,
    pub group: String,
    pub query: String,
    pub ground_truth: SemanticFrame,
    pub expect_repair: bool,
    /// Raw frame used instead of the interpreter's output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_frame_override: Option<SemanticFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, thiserror::Error)]
#[error("case file line {line}: {message}")]
pub struct CaseFileError {
    pub line: usize,
    pub message: String,
}

/// One JSON case per non-blank line.
pub fn parse_cases(text: &str) -> Result<Vec<EvalCase>, CaseFileError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CaseFileError {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn default_cases() -> Vec<EvalCase> {
    parse_cases(DEFAULT_CASES).expect("shipped cases parse")
}

/// Where a case's raw frame comes from when it has no override.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// The engine's interpreter.
    Interpret,
    /// The ground truth itself, so only overrides exercise repair.
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntentComparison {
    pub equal: bool,
    pub diff: Vec<String>,
}

pub fn compare_intent(validated: &SemanticFrame, truth: &SemanticFrame) -> IntentComparison {
    let equal = frames_equal(validated, truth);
    IntentComparison {
        equal,
        diff: if equal { Vec::new() } else { intent_diff(validated, truth) },
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ActionCounts {
    pub value_normalization: usize,
    pub anchor_resolution: usize,
    pub structural: usize,
}

impl ActionCounts {
    pub fn total(&self) -> usize {
        self.value_normalization + self.anchor_resolution + self.structural
    }

    fn add(&mut self, o: &ActionCounts) {
        self.value_normalization += o.value_normalization;
        self.anchor_resolution += o.anchor_resolution;
        self.structural += o.structural;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub id: String,
    pub group: String,
    pub intent_complete: bool,
    pub exec_success: bool,
    pub repaired: bool,
    pub expect_repair: bool,
    pub used_override: bool,
    pub actions: ActionCounts,
    /// Paths where the repaired frame differs from the ground truth.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diff: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub n: usize,
    pub intent_complete: usize,
    pub exec_success: usize,
    pub repaired: usize,
    pub avg_ms: f64,
    pub max_ms: f64,
}

impl GroupSummary {
    fn of<'a>(group: &str, cases: impl IntoIterator<Item = &'a CaseResult>) -> Self {
        let mut g = GroupSummary {
            group: group.into(),
            ..Default::default()
        };
        let mut sum = 0.0;
        for c in cases {
            g.n += 1;
            g.intent_complete += c.intent_complete as usize;
            g.exec_success += c.exec_success as usize;
            g.repaired += c.repaired as usize;
            sum += c.latency_ms;
            g.max_ms = g.max_ms.max(c.latency_ms);
        }
        if g.n > 0 {
            g.avg_ms = sum / g.n as f64;
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: InputMode,
    pub backend: BackendKind,
    pub dataset_version: String,
    pub cases: Vec<CaseResult>,
    pub groups: Vec<GroupSummary>,
    pub overall: GroupSummary,
    pub actions: ActionCounts,
}

impl EvalReport {
    fn assemble(mode: InputMode, backend: BackendKind, version: &str, mut cases: Vec<CaseResult>) -> Self {
        cases.sort_by(|a, b| a.id.cmp(&b.id));
        let mut by_group: BTreeMap<&str, Vec<&CaseResult>> = BTreeMap::new();
        for c in &cases {
            by_group.entry(c.group.as_str()).or_default().push(c);
        }
        let groups = by_group.iter().map(|(g, cs)| GroupSummary::of(g, cs.iter().copied())).collect();
        let overall = GroupSummary::of("Overall", &cases);
        let mut actions = ActionCounts::default();
        for c in &cases {
            actions.add(&c.actions);
        }
        EvalReport {
            mode,
            backend,
            dataset_version: version.into(),
            cases,
            groups,
            overall,
            actions,
        }
    }

    /// Copy with every latency zeroed, for comparing runs.
    pub fn without_latency(&self) -> EvalReport {
        let mut r = self.clone();
        for c in &mut r.cases {
            c.latency_ms = 0.0;
        }
        for g in r.groups.iter_mut().chain(std::iter::once(&mut r.overall)) {
            g.avg_ms = 0.0;
            g.max_ms = 0.0;
        }
        r
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| !(c.intent_complete && c.exec_success))
    }
}

fn run_case(engine: &Engine, case: &EvalCase, mode: InputMode) -> CaseResult {
    let resp = match (&case.raw_frame_override, mode) {
        (Some(raw), _) => engine.run_frame(raw.clone(), None),
        (None, InputMode::Seeded) => engine.run_frame(case.ground_truth.clone(), None),
        (None, InputMode::Interpret) => engine.run_query(&case.query, None),
    };
    let comparison = resp.repaired_frame.as_ref().map(|f| compare_intent(f, &case.ground_truth));
    let report = &resp.repair_report;
    CaseResult {
        id: case.id.clone(),
        group: case.group.clone(),
        intent_complete: comparison.as_ref().is_some_and(|c| c.equal),
        exec_success: resp.is_ok(),
        repaired: report.repaired,
        expect_repair: case.expect_repair,
        used_override: case.raw_frame_override.is_some(),
        actions: ActionCounts {
            value_normalization: report.count(ActionKind::ValueNormalization),
            anchor_resolution: report.count(ActionKind::AnchorResolution),
            structural: report.count(ActionKind::Structural),
        },
        diff: comparison.map(|c| c.diff).unwrap_or_default(),
        error: resp.error.map(|e| e.message),
        latency_ms: resp.timings.total_ms(),
    }
}

/// Runs every case. Rule-based runs fan out over threads; a remote
/// backend is already bounded by its own limiter.
pub fn run_suite(engine: &Engine, cases: &[EvalCase], mode: InputMode) -> EvalReport {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).clamp(1, 8);
    let chunk = cases.len().div_ceil(workers).max(1);
    let results: Vec<CaseResult> = std::thread::scope(|s| {
        let handles: Vec<_> = cases
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|c| run_case(engine, c, mode)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("case worker panicked")).collect()
    });
    EvalReport::assemble(mode, engine.interpreter.kind(), engine.dataset_version(), results)
}

fn seconds(ms: f64, latency: bool) -> String {
    if latency {
        format!("{:.3}", ms / 1000.0)
    } else {
        "-".into()
    }
}

/// Markdown table with one row per group and an overall row.
pub fn render_markdown(report: &EvalReport, latency: bool) -> String {
    let mut out = String::new();
    out.push_str("| Group | n | Avg s | Max s | Repaired | Intent complete | Exec success |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for g in report.groups.iter().chain(std::iter::once(&report.overall)) {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            g.group,
            g.n,
            seconds(g.avg_ms, latency),
            seconds(g.max_ms, latency),
            g.repaired,
            g.intent_complete,
            g.exec_success
        );
    }
    let a = &report.actions;
    let _ = writeln!(
        out,
        "\nRepair actions: {} value normalization, {} anchor resolution, {} structural ({} total).",
        a.value_normalization,
        a.anchor_resolution,
        a.structural,
        a.total()
    );
    out
}

pub fn render_json(report: &EvalReport, latency: bool) -> String {
    let r = if latency { report.clone() } else { report.without_latency() };
    serde_json::to_string_pretty(&r).expect("serializes") + "\n"
}
