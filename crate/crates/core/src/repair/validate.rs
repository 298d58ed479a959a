//! Schema validation of raw frames. Total: every problem is reported, none
//! is fixed here.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::frame::{canonical_attribute, canonical_spatial, AttrValue, SemanticFrame};
use crate::schema::{
    check_kind, GeometryKind, Operator, Relation, Role, Scalar, SchemaRegistry, ValueIssue,
    ValueKind,
};
use crate::vocab::{Token, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownEntity,
    UnknownField,
    UnknownVocabulary,
    RoleCapability,
    RoleConflict,
    PrimaryCount,
    DuplicateTarget,
    DuplicateConstraint,
    Arity,
    InvalidDistance,
    SelfReference,
    UntargetedRole,
    ReferenceMismatch,
    InvalidReference,
    MissingReference,
    UnlinkedRole,
    SpuriousTarget,
    RankingRole,
    UnsupportedMetric,
    InvalidTopN,
    RelationGeometry,
    InvalidTolerance,
    NonCanonicalValue,
    OperatorKind,
    UnsupportedContent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Sink(Vec<Violation>);

impl Sink {
    fn push(&mut self, kind: ViolationKind, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            kind,
            path: path.into(),
            message: message.into(),
        });
    }

    fn token<T: Vocab>(&mut self, tok: &Token<T>, what: &str, path: String) -> Option<T> {
        let known = tok.known();
        if known.is_none() {
            self.push(
                ViolationKind::UnknownVocabulary,
                path,
                format!("unknown {what} `{}`", tok.as_str()),
            );
        }
        known
    }
}

/// Roles that something other than a target binding points at.
fn incident_roles(f: &SemanticFrame) -> BTreeSet<Role> {
    let mut out = BTreeSet::new();
    for c in &f.spatial_constraints {
        out.extend(c.target_role.known());
        out.extend(c.reference_role.known());
    }
    for r in &f.references {
        out.extend(r.role.known());
    }
    for c in &f.attribute_constraints {
        out.extend(c.target_role.known());
    }
    for r in &f.relations {
        out.extend(r.from_role.known());
        out.extend(r.to_role.known());
    }
    if let Some(r) = &f.ranking {
        out.extend(r.target_role.known());
        // the ranking's measure
        out.insert(Role::Support);
    }
    out
}

/// Non-primary targets nothing refers to.
pub(crate) fn spurious_targets(f: &SemanticFrame) -> Vec<usize> {
    let incident = incident_roles(f);
    f.targets
        .iter()
        .enumerate()
        .filter(|(_, t)| match t.role.known() {
            Some(Role::Primary) | None => false,
            Some(r) => !incident.contains(&r),
        })
        .map(|(i, _)| i)
        .collect()
}

fn has_content(f: &SemanticFrame) -> bool {
    !(f.targets.is_empty()
        && f.references.is_empty()
        && f.spatial_constraints.is_empty()
        && f.attribute_constraints.is_empty()
        && f.relations.is_empty()
        && f.ranking.is_none())
}

fn scalar_issue(
    sink: &mut Sink,
    path: &str,
    entity: &str,
    field: &crate::schema::FieldSpec,
    s: &Scalar,
) {
    if let Err(issue) = check_kind(field, s) {
        let msg = match issue {
            ValueIssue::NotCanonical => format!(
                "`{s}` is not a canonical value of {entity}.{}",
                field.name
            ),
            other => format!("`{s}` for {entity}.{}: {other}", field.name),
        };
        sink.push(ViolationKind::NonCanonicalValue, path, msg);
    }
}

/// Every schema violation in `f`; empty iff the frame conforms.
pub fn validate_frame(reg: &SchemaRegistry, f: &SemanticFrame) -> Vec<Violation> {
    use ViolationKind as K;
    let mut v = Sink(Vec::new());
    if !f.supported {
        if has_content(f) {
            v.push(
                K::UnsupportedContent,
                "$",
                "unsupported frame must not carry targets or constraints",
            );
        }
        return v.0;
    }

    // targets
    let mut seen = BTreeSet::new();
    let mut primaries = 0;
    for (i, t) in f.targets.iter().enumerate() {
        let spec = reg.entity(&t.entity);
        if spec.is_none() {
            v.push(
                K::UnknownEntity,
                format!("targets[{i}].entity"),
                format!("unknown entity `{}`", t.entity),
            );
        }
        let Some(role) = v.token(&t.role, "role", format!("targets[{i}].role")) else {
            continue;
        };
        if role == Role::Primary {
            primaries += 1;
        }
        if let Some(spec) = spec {
            if role == Role::Scope && !spec.scope_capable {
                v.push(
                    K::RoleCapability,
                    format!("targets[{i}].role"),
                    format!("{} cannot act as a scope", spec.name),
                );
            }
            if role == Role::Anchor && !spec.anchor_capable {
                v.push(
                    K::RoleCapability,
                    format!("targets[{i}].role"),
                    format!("{} cannot act as an anchor", spec.name),
                );
            }
        }
        if !seen.insert((t.entity.as_str(), role)) {
            v.push(
                K::DuplicateTarget,
                format!("targets[{i}]"),
                format!("{} bound to {role} twice", t.entity),
            );
        }
    }
    for &role in Role::ALL {
        let entities: BTreeSet<&str> = f
            .targets
            .iter()
            .filter(|t| t.role.is(role))
            .map(|t| t.entity.as_str())
            .collect();
        if entities.len() > 1 {
            let names: Vec<&str> = entities.into_iter().collect();
            v.push(
                K::RoleConflict,
                "targets",
                format!("role {role} bound to several entities: {}", names.join(", ")),
            );
        }
    }
    if primaries != 1 {
        v.push(
            K::PrimaryCount,
            "targets",
            format!("expected exactly one primary target, found {primaries}"),
        );
    }

    let entity_of = |role: Role| f.entity_for(role);
    let geometry_of = |role: Role| entity_of(role).and_then(|e| reg.entity(e)).map(|e| e.geometry);
    let untargeted = |v: &mut Sink, role: Role, path: String| {
        if !f.has_role(role) {
            v.push(K::UntargetedRole, path, format!("role {role} is not bound by any target"));
        }
    };

    // references
    let mut refs_seen = BTreeSet::new();
    for (i, r) in f.references.iter().enumerate() {
        let base = format!("references[{i}]");
        if reg.entity(&r.entity).is_none() {
            v.push(
                K::UnknownEntity,
                format!("{base}.entity"),
                format!("unknown entity `{}`", r.entity),
            );
        }
        if r.name.trim().is_empty() {
            v.push(K::InvalidReference, format!("{base}.name"), "empty reference name");
        }
        if r.resolved_location.is_some() && !r.candidates.is_empty() {
            v.push(
                K::InvalidReference,
                base.clone(),
                "reference is both resolved and ambiguous",
            );
        }
        let Some(role) = v.token(&r.role, "role", format!("{base}.role")) else {
            continue;
        };
        if !matches!(role, Role::Anchor | Role::Scope) {
            v.push(
                K::RoleCapability,
                format!("{base}.role"),
                format!("named references bind anchor or scope roles, not {role}"),
            );
        }
        untargeted(&mut v, role, format!("{base}.role"));
        if let Some(e) = entity_of(role) {
            if e != r.entity {
                v.push(
                    K::ReferenceMismatch,
                    format!("{base}.entity"),
                    format!("{role} is bound to {e}, reference names a {}", r.entity),
                );
            }
        }
        let key = (role, r.entity.clone(), r.name.trim().to_lowercase());
        if !refs_seen.insert(key) {
            v.push(K::DuplicateConstraint, base, format!("reference `{}` repeated", r.name));
        }
    }

    // spatial constraints
    let mut spatial_seen = BTreeSet::new();
    for (i, c) in f.spatial_constraints.iter().enumerate() {
        let base = format!("spatial_constraints[{i}]");
        let relation = v.token(&c.relation, "relation", format!("{base}.relation"));
        let target = v.token(&c.target_role, "role", format!("{base}.target_role"));
        let reference = v.token(&c.reference_role, "role", format!("{base}.reference_role"));
        if let Some(t) = target {
            untargeted(&mut v, t, format!("{base}.target_role"));
        }
        if let Some(r) = reference {
            untargeted(&mut v, r, format!("{base}.reference_role"));
        }
        if target.is_some() && target == reference {
            v.push(
                K::SelfReference,
                base.clone(),
                "target_role and reference_role must differ",
            );
        }
        match (relation, &c.distance_m) {
            (Some(Relation::WithinDistance), None) => v.push(
                K::Arity,
                format!("{base}.distance_m"),
                "within_distance requires distance_m",
            ),
            (Some(Relation::WithinDistance), Some(Scalar::Number(d))) => {
                if !(d.is_finite() && *d > 0.0) {
                    v.push(
                        K::InvalidDistance,
                        format!("{base}.distance_m"),
                        format!("distance must be a positive number of meters, got {d}"),
                    );
                }
            }
            (Some(Relation::WithinDistance), Some(other)) => v.push(
                K::NonCanonicalValue,
                format!("{base}.distance_m"),
                format!("distance `{other}` is not a number of meters"),
            ),
            (Some(rel), Some(_)) => v.push(
                K::Arity,
                format!("{base}.distance_m"),
                format!("distance_m does not apply to {rel}"),
            ),
            _ => {}
        }
        if let (Some(Relation::Contains), Some(t), Some(r)) = (relation, target, reference) {
            if let (Some(gt), Some(gr)) = (geometry_of(t), geometry_of(r)) {
                if gt != GeometryKind::Polygon && gr != GeometryKind::Polygon {
                    v.push(
                        K::RelationGeometry,
                        base.clone(),
                        format!("contains needs a polygon side, got {gt} and {gr}"),
                    );
                }
            }
        }
        let key = serde_json::to_string(&canonical_spatial(c)).expect("serializes");
        if !spatial_seen.insert(key) {
            v.push(K::DuplicateConstraint, base, "spatial constraint repeated");
        }
    }

    // attribute constraints
    let mut attr_seen = BTreeSet::new();
    for (i, c) in f.attribute_constraints.iter().enumerate() {
        let base = format!("attribute_constraints[{i}]");
        let role = v.token(&c.target_role, "role", format!("{base}.target_role"));
        let op = v.token(&c.operator, "operator", format!("{base}.operator"));
        let key = serde_json::to_string(&canonical_attribute(c)).expect("serializes");
        if !attr_seen.insert(key) {
            v.push(K::DuplicateConstraint, base.clone(), "attribute constraint repeated");
        }
        let Some(role) = role else { continue };
        untargeted(&mut v, role, format!("{base}.target_role"));
        let Some(entity) = entity_of(role).and_then(|e| reg.entity(e)) else {
            continue;
        };
        let Some(field) = entity.field(&c.field) else {
            v.push(
                K::UnknownField,
                format!("{base}.field"),
                format!("{} has no field `{}`", entity.name, c.field),
            );
            continue;
        };
        let Some(op) = op else { continue };
        if op.is_ordering() && matches!(field.kind, ValueKind::Categorical | ValueKind::Text) {
            v.push(
                K::OperatorKind,
                format!("{base}.operator"),
                format!("{op} does not apply to {} field {}", field.kind, field.name),
            );
        }
        let vpath = format!("{base}.value");
        match (op, &c.value) {
            (op, None) if op.is_nullary() => {}
            (op, Some(_)) if op.is_nullary() => {
                v.push(K::Arity, vpath, format!("{op} takes no value"))
            }
            (_, None) => v.push(K::Arity, vpath, format!("{op} requires a value")),
            (Operator::Between, Some(AttrValue::Many(items))) if items.len() == 2 => {
                for s in items {
                    scalar_issue(&mut v, &vpath, &entity.name, field, s);
                }
            }
            (Operator::In, Some(AttrValue::Many(items))) if !items.is_empty() => {
                for s in items {
                    scalar_issue(&mut v, &vpath, &entity.name, field, s);
                }
            }
            (Operator::Between | Operator::In, Some(AttrValue::One(Scalar::Text(s)))) => v.push(
                K::NonCanonicalValue,
                vpath,
                format!("`{s}` is a surface form, {op} expects a list"),
            ),
            (Operator::Between, _) => v.push(K::Arity, vpath, "between requires a [low, high] pair"),
            (Operator::In, _) => v.push(K::Arity, vpath, "in requires a non-empty list"),
            (_, Some(AttrValue::One(s))) => scalar_issue(&mut v, &vpath, &entity.name, field, s),
            (op, Some(AttrValue::Many(_))) => {
                v.push(K::Arity, vpath, format!("{op} takes a single value"))
            }
        }
    }

    // relations
    let mut rel_seen = BTreeSet::new();
    for (i, r) in f.relations.iter().enumerate() {
        let base = format!("relations[{i}]");
        v.token(&r.kind, "relation kind", format!("{base}.kind"));
        let from = v.token(&r.from_role, "role", format!("{base}.from_role"));
        let to = v.token(&r.to_role, "role", format!("{base}.to_role"));
        if let Some(role) = from {
            untargeted(&mut v, role, format!("{base}.from_role"));
            if let Some(g) = geometry_of(role).filter(|g| *g != GeometryKind::Point) {
                v.push(
                    K::RelationGeometry,
                    format!("{base}.from_role"),
                    format!("snap source must be point geometry, got {g}"),
                );
            }
        }
        if let Some(role) = to {
            untargeted(&mut v, role, format!("{base}.to_role"));
            if let Some(g) = geometry_of(role).filter(|g| *g != GeometryKind::Polyline) {
                v.push(
                    K::RelationGeometry,
                    format!("{base}.to_role"),
                    format!("snap target must be polyline geometry, got {g}"),
                );
            }
        }
        if from.is_some() && from == to {
            v.push(K::SelfReference, base.clone(), "from_role and to_role must differ");
        }
        if !(r.tolerance_m.is_finite() && r.tolerance_m > 0.0) {
            v.push(
                K::InvalidTolerance,
                format!("{base}.tolerance_m"),
                format!("tolerance must be a positive number of meters, got {}", r.tolerance_m),
            );
        }
        let key = serde_json::to_string(r).expect("serializes");
        if !rel_seen.insert(key) {
            v.push(K::DuplicateConstraint, base, "relation repeated");
        }
    }

    // ranking
    if let Some(r) = &f.ranking {
        if let Some(m) = v.token(&r.metric, "metric", "ranking.metric".into()) {
            if !reg.ranking_metrics.contains(&m) {
                v.push(
                    K::UnsupportedMetric,
                    "ranking.metric",
                    format!("metric {m} is not enabled in this registry"),
                );
            }
        }
        if let Some(role) = v.token(&r.target_role, "role", "ranking.target_role".into()) {
            if role != Role::Primary {
                v.push(
                    K::RankingRole,
                    "ranking.target_role",
                    format!("rankings apply to the primary role, not {role}"),
                );
            }
        }
        v.token(&r.order, "order", "ranking.order".into());
        if r.top_n == 0 {
            v.push(K::InvalidTopN, "ranking.top_n", "top_n must be at least 1");
        }
    }

    // role linkage
    let spurious = spurious_targets(f);
    for &i in &spurious {
        let t = &f.targets[i];
        v.push(
            K::SpuriousTarget,
            format!("targets[{i}]"),
            format!("spurious {} target {}: nothing refers to it", t.role, t.entity),
        );
    }
    let spatial_roles: BTreeSet<Role> = f
        .spatial_constraints
        .iter()
        .flat_map(|c| [c.target_role.known(), c.reference_role.known()])
        .flatten()
        .collect();
    let mut checked = BTreeSet::new();
    for (i, t) in f.targets.iter().enumerate() {
        let Some(role) = t.role.known() else { continue };
        if spurious.contains(&i) || !checked.insert(role) {
            continue;
        }
        let has_ref = f.references.iter().any(|r| r.role.is(role));
        if matches!(role, Role::Anchor | Role::Scope) && !has_ref {
            v.push(
                K::MissingReference,
                format!("targets[{i}]"),
                format!("{role} target {} has no named reference", t.entity),
            );
        }
        if matches!(role, Role::Anchor | Role::Filter) && !spatial_roles.contains(&role) {
            v.push(
                K::UnlinkedRole,
                format!("targets[{i}]"),
                format!("{role} target {} is not used by any spatial constraint", t.entity),
            );
        }
    }

    v.0
}

/// Short `entity/role` label for a target, used in reports.
pub(crate) fn target_label(entity: &str, role: &Token<Role>) -> String {
    let mut s = entity.to_string();
    s.push('/');
    s.push_str(role.as_str());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::parse_frame;
    use crate::testkit;

    fn kinds(f: &SemanticFrame) -> Vec<ViolationKind> {
        validate_frame(&testkit::registry(), f)
            .into_iter()
            .map(|v| v.kind)
            .collect()
    }

    fn frame(extra: &str) -> SemanticFrame {
        parse_frame(&format!(
            r#"{{"supported": true, "targets": [{{"entity": "Crash", "role": "primary"}}]{extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn ranking_example_is_clean() {
        assert!(kinds(&testkit::ranking_frame()).is_empty());
        assert!(kinds(&testkit::proximity_frame()).is_empty());
    }

    #[test]
    fn raw_categorical_value_is_one_violation() {
        let f = frame(
            r#", "attribute_constraints": [{"target_role": "primary", "field": "first_hrmf",
                 "operator": "eq", "value": "cyclists"}]"#,
        );
        let v = validate_frame(&testkit::registry(), &f);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::NonCanonicalValue);
        assert_eq!(v[0].path, "attribute_constraints[0].value");
    }

    #[test]
    fn dangling_anchor_is_one_spurious_violation() {
        let mut f = testkit::proximity_frame();
        f.targets.push(crate::frame::TargetBinding {
            entity: "School".into(),
            role: Role::Anchor.into(),
        });
        assert_eq!(kinds(&f), [ViolationKind::SpuriousTarget]);
    }

    #[test]
    fn duplicate_attribute_constraint() {
        let f = frame(
            r#", "attribute_constraints": [
                 {"target_role": "primary", "field": "severity", "operator": "eq", "value": "Fatal injury"},
                 {"target_role": "primary", "field": "severity", "operator": "eq", "value": "Fatal injury"}]"#,
        );
        assert_eq!(kinds(&f), [ViolationKind::DuplicateConstraint]);
    }

    #[test]
    fn arity_rules() {
        let f = frame(
            r#", "attribute_constraints": [
                 {"target_role": "primary", "field": "speed_limit", "operator": "between", "value": [30]},
                 {"target_role": "primary", "field": "speed_limit", "operator": "is_null", "value": 3},
                 {"target_role": "primary", "field": "severity", "operator": "in", "value": []},
                 {"target_role": "primary", "field": "speed_limit", "operator": "gt"}]"#,
        );
        assert_eq!(kinds(&f), [ViolationKind::Arity; 4]);
    }

    #[test]
    fn ordering_operator_on_categorical() {
        let f = frame(
            r#", "attribute_constraints": [{"target_role": "primary", "field": "severity",
                 "operator": "gt", "value": "Fatal injury"}]"#,
        );
        assert_eq!(kinds(&f), [ViolationKind::OperatorKind]);
    }

    #[test]
    fn role_problems() {
        let f = parse_frame(
            r#"{"supported": true,
                "targets": [{"entity": "Crash", "role": "primary"}, {"entity": "School", "role": "scope"}],
                "references": [{"entity": "School", "role": "scope", "name": "X"}]}"#,
        )
        .unwrap();
        assert_eq!(kinds(&f), [ViolationKind::RoleCapability]);

        let f = parse_frame(
            r#"{"supported": true, "targets": [{"entity": "Crash", "role": "support"}]}"#,
        )
        .unwrap();
        assert!(kinds(&f).contains(&ViolationKind::PrimaryCount));
    }

    #[test]
    fn spatial_constraint_rules() {
        let f = frame(
            r#", "spatial_constraints": [
                 {"relation": "within_distance", "target_role": "primary", "reference_role": "anchor"},
                 {"relation": "intersects", "target_role": "primary", "reference_role": "primary", "distance_m": 5}]"#,
        );
        let k = kinds(&f);
        assert!(k.contains(&ViolationKind::Arity));
        assert!(k.contains(&ViolationKind::UntargetedRole));
        assert!(k.contains(&ViolationKind::SelfReference));
    }

    #[test]
    fn contains_between_points_is_rejected() {
        let f = parse_frame(
            r#"{"supported": true,
                "targets": [{"entity": "Crash", "role": "primary"}, {"entity": "School", "role": "filter"}],
                "spatial_constraints": [{"relation": "contains", "target_role": "primary", "reference_role": "filter"}]}"#,
        )
        .unwrap();
        assert_eq!(kinds(&f), [ViolationKind::RelationGeometry]);
    }

    #[test]
    fn snap_geometry() {
        let f = parse_frame(
            r#"{"supported": true,
                "targets": [{"entity": "Road", "role": "primary"}, {"entity": "Crash", "role": "support"}],
                "relations": [{"kind": "snap_to_road", "from_role": "primary", "to_role": "support", "tolerance_m": 20}],
                "ranking": {"metric": "crash_count", "target_role": "primary", "order": "highest", "top_n": 3}}"#,
        )
        .unwrap();
        assert_eq!(kinds(&f), [ViolationKind::RelationGeometry; 2]);
    }

    #[test]
    fn raw_tokens_reported() {
        let f = frame(
            r#", "ranking": {"metric": "crash_count", "target_role": "primary", "order": "most", "top_n": 0}"#,
        );
        assert_eq!(
            kinds(&f),
            [ViolationKind::UnknownVocabulary, ViolationKind::InvalidTopN]
        );
    }

    #[test]
    fn unsupported_frames() {
        assert!(kinds(&SemanticFrame::unsupported()).is_empty());
        let mut f = frame("");
        f.supported = false;
        assert_eq!(kinds(&f), [ViolationKind::UnsupportedContent]);
    }
}
