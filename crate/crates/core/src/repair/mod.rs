//! The gate between interpretation and execution.
//!
//! [`repair`] runs a fixed pipeline over a raw frame: validate, normalize
//! values, resolve named places, apply structural corrections, validate
//! again. Every change is recorded as a [`RepairAction`]; a frame that
//! cannot be brought to zero violations is rejected with the partial report
//! attached.

mod anchors;
mod normalize;
mod structural;
mod validate;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::frame::{canonicalize, SemanticFrame};
use crate::schema::SchemaRegistry;

pub use anchors::{
    ambiguous_references, name_key, pick_candidate, resolve_anchors, Boundary, Gazetteer,
    GazetteerEntry, GazetteerSource, PickError,
};
pub use normalize::{
    display_value, normalize_values, parse_clock, parse_clock_range, parse_date, parse_distance,
    parse_number, NormalizationRule, NormalizationTable, TableError,
};
pub use structural::structural_repair;
pub use validate::{validate_frame, Violation, ViolationKind};

/// Identifiers of the rules that are not table rows.
pub mod rules {
    pub const FOLD_CASE: &str = "fold.case";
    pub const PARSE_DISTANCE: &str = "parse.distance";
    pub const PARSE_NUMBER: &str = "parse.number";
    pub const PARSE_CLOCK: &str = "parse.clock";
    pub const PARSE_CLOCK_RANGE: &str = "parse.clock_range";
    pub const PARSE_DATE: &str = "parse.date";
    pub const ANCHOR_NAME: &str = "anchor.canonical_name";
    pub const REMOVE_TARGET: &str = "structural.remove_spurious_target";
    pub const MERGE_DUPLICATE: &str = "structural.merge_duplicate_constraint";
    pub const DROP_DANGLING: &str = "structural.drop_dangling_constraint";

    pub const BUILTIN: &[&str] = &[
        FOLD_CASE,
        PARSE_DISTANCE,
        PARSE_NUMBER,
        PARSE_CLOCK,
        PARSE_CLOCK_RANGE,
        PARSE_DATE,
        ANCHOR_NAME,
        REMOVE_TARGET,
        MERGE_DUPLICATE,
        DROP_DANGLING,
    ];

    pub fn is_builtin(id: &str) -> bool {
        BUILTIN.contains(&id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    ValueNormalization,
    AnchorResolution,
    Structural,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionKind::ValueNormalization => "value_normalization",
            ActionKind::AnchorResolution => "anchor_resolution",
            ActionKind::Structural => "structural",
        })
    }
}

/// One change made to a raw frame. `before` and `after` are display forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairAction {
    pub kind: ActionKind,
    pub path: String,
    pub before: String,
    pub after: String,
    pub rule_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rejection {
    #[error("the question is outside the supported domain")]
    Unsupported,
    #[error("{path}: no normalization for {field} value {value:?}")]
    UnrepairableValue {
        path: String,
        field: String,
        value: String,
    },
    #[error("{path}: no {entity} named {name:?}")]
    UnresolvableAnchor {
        path: String,
        entity: String,
        name: String,
    },
    #[error("frame still has {} violation(s): {}", violations.len(), summarize(violations))]
    UnrepairableStructure { violations: Vec<Violation> },
}

fn summarize(v: &[Violation]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    parts.join("; ")
}

/// Audit record of one pass through the pipeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RepairReport {
    pub actions: Vec<RepairAction>,
    /// True iff `actions` is non-empty.
    pub repaired: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<Rejection>,
    /// What validation found in the raw frame, before any change.
    #[serde(default)]
    pub initial_violations: Vec<Violation>,
}

impl RepairReport {
    fn push(&mut self, actions: Vec<RepairAction>) {
        self.actions.extend(actions);
        self.repaired = !self.actions.is_empty();
    }

    pub fn count(&self, kind: ActionKind) -> usize {
        self.actions.iter().filter(|a| a.kind == kind).count()
    }
}

/// A rejected frame with the report of everything done before the failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{reason}")]
pub struct RepairFailure {
    pub reason: Rejection,
    pub report: Box<RepairReport>,
}

/// Immutable inputs of the pipeline.
#[derive(Debug, Clone, Copy)]
pub struct RepairContext<'a> {
    pub registry: &'a SchemaRegistry,
    pub table: &'a NormalizationTable,
    pub gazetteer: &'a Gazetteer,
}

/// Runs the full pipeline. The returned frame is canonical and has zero
/// violations; references are resolved or carry candidates.
pub fn repair(
    cx: RepairContext<'_>,
    raw: &SemanticFrame,
) -> Result<(SemanticFrame, RepairReport), RepairFailure> {
    let mut report = RepairReport::default();
    let fail = |mut report: RepairReport, reason: Rejection| {
        report.rejected = Some(reason.clone());
        RepairFailure {
            reason,
            report: Box::new(report),
        }
    };
    if !raw.supported {
        return Err(fail(report, Rejection::Unsupported));
    }
    report.initial_violations = validate_frame(cx.registry, raw);

    let frame = match normalize_values(cx.registry, cx.table, raw) {
        Ok((f, acts)) => {
            report.push(acts);
            f
        }
        Err(r) => return Err(fail(report, r)),
    };
    let frame = match resolve_anchors(cx.gazetteer, &frame) {
        Ok((f, acts)) => {
            report.push(acts);
            f
        }
        Err(r) => return Err(fail(report, r)),
    };
    let (frame, acts) = structural_repair(&frame);
    report.push(acts);

    let remaining = validate_frame(cx.registry, &frame);
    if !remaining.is_empty() {
        return Err(fail(
            report,
            Rejection::UnrepairableStructure {
                violations: remaining,
            },
        ));
    }
    Ok((canonicalize(&frame), report))
}
