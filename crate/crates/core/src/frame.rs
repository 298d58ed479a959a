//! The semantic frame: the intermediate representation between a
//! natural-language question and an executable plan.
//!
//! The JSON shape is a wire contract. Top-level keys are `supported`,
//! `targets`, `references`, `spatial_constraints`, `attribute_constraints`,
//! `relations` and `ranking`; unknown keys are rejected at every level.
//! Parsing is structural only: a raw frame may still carry surface forms
//! such as `"fatal"` or `"1km"`, which the repair layer turns into canonical
//! values.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::geo::Point;
use crate::schema::{Metric, Operator, Order, Relation, RelationKind, Role, Scalar};
use crate::vocab::Token;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBinding {
    pub entity: String,
    pub role: Token<Role>,
}

/// One option offered to the user when a place name matches several
/// locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorCandidate {
    pub name: String,
    pub location: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoReference {
    pub entity: String,
    pub role: Token<Role>,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_location: Option<Point>,
    /// Dataset record the name resolved to, when it came from the store.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<AnchorCandidate>,
}

impl GeoReference {
    pub fn new(entity: &str, role: Role, name: &str) -> Self {
        GeoReference {
            entity: entity.into(),
            role: role.into(),
            name: name.into(),
            resolved_location: None,
            resolved_id: None,
            candidates: Vec::new(),
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.resolved_location.is_some()
    }

    pub fn is_ambiguous(&self) -> bool {
        !self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialConstraint {
    pub relation: Token<Relation>,
    pub target_role: Token<Role>,
    pub reference_role: Token<Role>,
    /// Meters once repaired; raw frames may carry text such as `"1km"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<Scalar>,
}

impl SpatialConstraint {
    pub fn distance(&self) -> Option<f64> {
        self.distance_m.as_ref().and_then(Scalar::as_number)
    }
}

/// Value slot of an attribute constraint: a scalar, or a list (`in`) /
/// ordered pair (`between`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    One(Scalar),
    Many(Vec<Scalar>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeConstraint {
    pub target_role: Token<Role>,
    pub field: String,
    pub operator: Token<Operator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<AttrValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationLink {
    pub kind: Token<RelationKind>,
    pub from_role: Token<Role>,
    pub to_role: Token<Role>,
    pub tolerance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingSpec {
    pub metric: Token<Metric>,
    pub target_role: Token<Role>,
    pub order: Token<Order>,
    pub top_n: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticFrame {
    pub supported: bool,
    #[serde(default)]
    pub targets: Vec<TargetBinding>,
    #[serde(default)]
    pub references: Vec<GeoReference>,
    #[serde(default)]
    pub spatial_constraints: Vec<SpatialConstraint>,
    #[serde(default)]
    pub attribute_constraints: Vec<AttributeConstraint>,
    #[serde(default)]
    pub relations: Vec<RelationLink>,
    #[serde(default)]
    pub ranking: Option<RankingSpec>,
}

impl SemanticFrame {
    /// A frame for a question outside the supported domain.
    pub fn unsupported() -> Self {
        SemanticFrame {
            supported: false,
            targets: Vec::new(),
            references: Vec::new(),
            spatial_constraints: Vec::new(),
            attribute_constraints: Vec::new(),
            relations: Vec::new(),
            ranking: None,
        }
    }

    /// Entity bound to `role`, if exactly one target carries it.
    pub fn entity_for(&self, role: Role) -> Option<&str> {
        let mut it = self.targets.iter().filter(|t| t.role.is(role));
        let first = it.next()?;
        if it.any(|t| t.entity != first.entity) {
            return None;
        }
        Some(&first.entity)
    }

    pub fn has_role(&self, role: Role) -> bool {
        self.targets.iter().any(|t| t.role.is(role))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frame serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("frame serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("frame JSON rejected at line {line}, column {column}: {message}")]
pub struct FrameParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Structural parse of frame JSON. Schema violations survive for the repair
/// layer; malformed JSON and unknown keys do not.
pub fn parse_frame(json: &str) -> Result<SemanticFrame, FrameParseError> {
    serde_json::from_str(json).map_err(|e| FrameParseError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Formats a number without a trailing `.0` for integral values.
pub fn fmt_number(n: f64) -> String {
    if n.is_finite() && libm::trunc(n) == n && libm::fabs(n) < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

/// Fixed precision used for every number inside a canonical frame.
pub const CANONICAL_DECIMALS: i32 = 3;

pub(crate) fn round_canonical(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let scale = libm::pow(10.0, CANONICAL_DECIMALS as f64);
    let r = libm::round(x * scale) / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn canon_scalar(s: &mut Scalar) {
    if let Scalar::Number(n) = s {
        *n = round_canonical(*n);
    }
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

fn cmp_scalar(a: &Scalar, b: &Scalar) -> Ordering {
    fn tag(s: &Scalar) -> u8 {
        match s {
            Scalar::Bool(_) => 0,
            Scalar::Number(_) => 1,
            Scalar::Text(_) => 2,
        }
    }
    match (a, b) {
        (Scalar::Bool(x), Scalar::Bool(y)) => x.cmp(y),
        (Scalar::Number(x), Scalar::Number(y)) => cmp_f64(*x, *y),
        (Scalar::Text(x), Scalar::Text(y)) => x.cmp(y),
        _ => tag(a).cmp(&tag(b)),
    }
}

fn cmp_opt_scalar(a: &Option<Scalar>, b: &Option<Scalar>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => cmp_scalar(x, y),
    }
}

fn cmp_attr_value(a: &Option<AttrValue>, b: &Option<AttrValue>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(AttrValue::One(x)), Some(AttrValue::One(y))) => cmp_scalar(x, y),
        (Some(AttrValue::One(_)), Some(AttrValue::Many(_))) => Ordering::Less,
        (Some(AttrValue::Many(_)), Some(AttrValue::One(_))) => Ordering::Greater,
        (Some(AttrValue::Many(x)), Some(AttrValue::Many(y))) => {
            for (p, q) in x.iter().zip(y) {
                let o = cmp_scalar(p, q);
                if o != Ordering::Equal {
                    return o;
                }
            }
            x.len().cmp(&y.len())
        }
    }
}

fn cmp_attribute(a: &AttributeConstraint, b: &AttributeConstraint) -> Ordering {
    a.target_role
        .cmp(&b.target_role)
        .then_with(|| a.field.cmp(&b.field))
        .then_with(|| a.operator.cmp(&b.operator))
        .then_with(|| cmp_attr_value(&a.value, &b.value))
}

fn cmp_spatial(a: &SpatialConstraint, b: &SpatialConstraint) -> Ordering {
    a.relation
        .cmp(&b.relation)
        .then_with(|| a.target_role.cmp(&b.target_role))
        .then_with(|| a.reference_role.cmp(&b.reference_role))
        .then_with(|| cmp_opt_scalar(&a.distance_m, &b.distance_m))
}

pub(crate) fn canonical_spatial(c: &SpatialConstraint) -> SpatialConstraint {
    let mut c = c.clone();
    if let Some(d) = &mut c.distance_m {
        canon_scalar(d);
    }
    c
}

pub(crate) fn canonical_attribute(c: &AttributeConstraint) -> AttributeConstraint {
    let mut c = c.clone();
    match &mut c.value {
        Some(AttrValue::One(s)) => canon_scalar(s),
        Some(AttrValue::Many(items)) => {
            items.iter_mut().for_each(canon_scalar);
            if c.operator.is(Operator::In) {
                items.sort_by(cmp_scalar);
                items.dedup();
            }
        }
        None => {}
    }
    c
}

/// Applies the canonical ordering and numeric precision. Idempotent; two
/// frames that differ only in list order or number spelling canonicalize to
/// identical values.
pub fn canonicalize(frame: &SemanticFrame) -> SemanticFrame {
    let mut f = frame.clone();

    f.targets
        .sort_by(|a, b| a.role.cmp(&b.role).then_with(|| a.entity.cmp(&b.entity)));

    // Candidate order is kept: users pick candidates by position.
    f.references.sort_by(|a, b| {
        a.role
            .cmp(&b.role)
            .then_with(|| a.entity.cmp(&b.entity))
            .then_with(|| a.name.cmp(&b.name))
    });

    f.spatial_constraints = f.spatial_constraints.iter().map(canonical_spatial).collect();
    f.spatial_constraints.sort_by(cmp_spatial);

    f.attribute_constraints = f.attribute_constraints.iter().map(canonical_attribute).collect();
    f.attribute_constraints.sort_by(cmp_attribute);

    for r in &mut f.relations {
        r.tolerance_m = round_canonical(r.tolerance_m);
    }
    f.relations.sort_by(|a, b| {
        a.kind
            .cmp(&b.kind)
            .then_with(|| a.from_role.cmp(&b.from_role))
            .then_with(|| a.to_role.cmp(&b.to_role))
            .then_with(|| cmp_f64(a.tolerance_m, b.tolerance_m))
    });

    f
}

/// The frame with dataset-derived resolution annotations removed, leaving
/// only what the user asked for.
pub fn intent_of(frame: &SemanticFrame) -> SemanticFrame {
    let mut f = canonicalize(frame);
    for r in &mut f.references {
        r.resolved_location = None;
        r.resolved_id = None;
        r.candidates.clear();
    }
    f
}

/// Intent equality: canonical forms identical, ignoring resolution
/// annotations.
pub fn frames_equal(a: &SemanticFrame, b: &SemanticFrame) -> bool {
    intent_of(a) == intent_of(b)
}

/// Paths at which the intents of `a` and `b` differ, e.g. `ranking.top_n`.
pub fn intent_diff(a: &SemanticFrame, b: &SemanticFrame) -> Vec<String> {
    let ja = serde_json::to_value(intent_of(a)).expect("frame serializes");
    let jb = serde_json::to_value(intent_of(b)).expect("frame serializes");
    let mut out = Vec::new();
    diff_json("", &ja, &jb, &mut out);
    out
}

fn diff_json(path: &str, a: &Json, b: &Json, out: &mut Vec<String>) {
    match (a, b) {
        (Json::Object(x), Json::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                let sub = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match (x.get(k), y.get(k)) {
                    (Some(p), Some(q)) => diff_json(&sub, p, q, out),
                    _ => out.push(sub),
                }
            }
        }
        (Json::Array(x), Json::Array(y)) => {
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                diff_json(&format!("{path}[{i}]"), p, q, out);
            }
            for i in x.len().min(y.len())..x.len().max(y.len()) {
                out.push(format!("{path}[{i}]"));
            }
        }
        _ if a == b => {}
        _ => out.push(if path.is_empty() { "$".to_string() } else { path.to_string() }),
    }
}
