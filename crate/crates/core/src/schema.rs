//! Machine-readable domain schema: entities, fields, canonical values, and
//! the closed vocabularies a frame may use.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

vocab! {
    /// Analytical function of an entity inside a query.
    pub enum Role {
        /// Geocoded reference point.
        Anchor => "anchor",
        /// Spatial pre-filter on the primary stream.
        Filter => "filter",
        /// Displayed or ranked.
        Primary => "primary",
        /// Geographic boundary.
        Scope => "scope",
        /// Aggregation measure.
        Support => "support",
    }
}

vocab! {
    pub enum Relation {
        Contains => "contains",
        Intersects => "intersects",
        NearestTo => "nearest_to",
        WithinDistance => "within_distance",
    }
}

vocab! {
    pub enum Operator {
        Between => "between",
        Eq => "eq",
        Gt => "gt",
        Gte => "gte",
        In => "in",
        IsNull => "is_null",
        Lt => "lt",
        Lte => "lte",
        NotNull => "not_null",
    }
}

vocab! {
    pub enum Metric {
        CrashCount => "crash_count",
    }
}

vocab! {
    pub enum Order {
        Highest => "highest",
        Lowest => "lowest",
    }
}

vocab! {
    pub enum RelationKind {
        SnapToRoad => "snap_to_road",
    }
}

vocab! {
    pub enum GeometryKind {
        Point => "point",
        Polyline => "polyline",
        Polygon => "polygon",
    }
}

vocab! {
    pub enum ValueKind {
        Categorical => "categorical",
        Date => "date",
        Numeric => "numeric",
        Text => "text",
        TimeOfDay => "time_of_day",
    }
}

impl Operator {
    /// Operators that take no value.
    pub fn is_nullary(self) -> bool {
        matches!(self, Operator::IsNull | Operator::NotNull)
    }

    pub fn is_ordering(self) -> bool {
        matches!(
            self,
            Operator::Gt | Operator::Gte | Operator::Lt | Operator::Lte | Operator::Between
        )
    }
}

/// A single attribute value as it appears in frames and records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl Scalar {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Scalar::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Scalar::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Number(n) => write!(f, "{}", crate::frame::fmt_number(*n)),
            Scalar::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.into())
    }
}

impl From<f64> for Scalar {
    fn from(n: f64) -> Self {
        Scalar::Number(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    pub kind: ValueKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default)]
    pub nullable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    pub name: String,
    pub geometry: GeometryKind,
    #[serde(default)]
    pub scope_capable: bool,
    #[serde(default)]
    pub anchor_capable: bool,
    /// Text field used as the display name (ranking tables, gazetteer).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_field: Option<String>,
    #[serde(default, rename = "field")]
    pub fields: Vec<FieldSpec>,
}

impl EntitySpec {
    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// The loaded domain schema. Immutable once checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaRegistry {
    pub version: String,
    #[serde(default = "default_metrics")]
    pub ranking_metrics: Vec<Metric>,
    #[serde(default, rename = "entity")]
    pub entities: Vec<EntitySpec>,
}

fn default_metrics() -> Vec<Metric> {
    alloc::vec![Metric::CrashCount]
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("duplicate entity `{0}`")]
    DuplicateEntity(String),
    #[error("duplicate field `{field}` on entity `{entity}`")]
    DuplicateField { entity: String, field: String },
    #[error("categorical field `{entity}.{field}` declares no canonical values")]
    EmptyCanonicalSet { entity: String, field: String },
    #[error("field `{entity}.{field}` of kind {kind} cannot declare canonical values")]
    UnexpectedCanonicalSet {
        entity: String,
        field: String,
        kind: ValueKind,
    },
    #[error("duplicate canonical value `{value}` on `{entity}.{field}`")]
    DuplicateCanonicalValue {
        entity: String,
        field: String,
        value: String,
    },
    #[error("label field `{field}` is not a text field of `{entity}`")]
    BadLabelField { entity: String, field: String },
    #[error("ranking metric `{0}` listed twice")]
    DuplicateMetric(Metric),
}

/// Why a value does not conform to a registry field.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValueIssue {
    #[error("unknown entity")]
    UnknownEntity,
    #[error("unknown field for entity")]
    UnknownField,
    #[error("not a canonical value")]
    NotCanonical,
    #[error("expected a {0} value")]
    WrongKind(ValueKind),
    #[error("time of day outside [0, 1440) minutes")]
    TimeOutOfRange,
    #[error("not an ISO date (YYYY-MM-DD)")]
    BadDate,
    #[error("field is not nullable")]
    NullNotAllowed,
}

impl SchemaRegistry {
    pub fn empty(version: &str) -> Self {
        SchemaRegistry {
            version: version.into(),
            ranking_metrics: default_metrics(),
            entities: Vec::new(),
        }
    }

    /// Checks every registry invariant, returning the registry unchanged
    /// when they hold.
    pub fn checked(self) -> Result<Self, SchemaError> {
        let mut names = BTreeSet::new();
        for e in &self.entities {
            if !names.insert(e.name.as_str()) {
                return Err(SchemaError::DuplicateEntity(e.name.clone()));
            }
            let mut fields = BTreeSet::new();
            for f in &e.fields {
                if !fields.insert(f.name.as_str()) {
                    return Err(SchemaError::DuplicateField {
                        entity: e.name.clone(),
                        field: f.name.clone(),
                    });
                }
                match (f.kind, &f.values) {
                    (ValueKind::Categorical, None) => {
                        return Err(SchemaError::EmptyCanonicalSet {
                            entity: e.name.clone(),
                            field: f.name.clone(),
                        })
                    }
                    (ValueKind::Categorical, Some(v)) if v.is_empty() => {
                        return Err(SchemaError::EmptyCanonicalSet {
                            entity: e.name.clone(),
                            field: f.name.clone(),
                        })
                    }
                    (ValueKind::Categorical, Some(v)) => {
                        let mut seen = BTreeSet::new();
                        for value in v {
                            if !seen.insert(value.as_str()) {
                                return Err(SchemaError::DuplicateCanonicalValue {
                                    entity: e.name.clone(),
                                    field: f.name.clone(),
                                    value: value.clone(),
                                });
                            }
                        }
                    }
                    (kind, Some(_)) => {
                        return Err(SchemaError::UnexpectedCanonicalSet {
                            entity: e.name.clone(),
                            field: f.name.clone(),
                            kind,
                        })
                    }
                    (_, None) => {}
                }
            }
            if let Some(label) = &e.label_field {
                if e.field(label).map(|f| f.kind) != Some(ValueKind::Text) {
                    return Err(SchemaError::BadLabelField {
                        entity: e.name.clone(),
                        field: label.clone(),
                    });
                }
            }
        }
        let mut metrics = BTreeSet::new();
        for m in &self.ranking_metrics {
            if !metrics.insert(*m) {
                return Err(SchemaError::DuplicateMetric(*m));
            }
        }
        Ok(self)
    }

    pub fn entity(&self, name: &str) -> Option<&EntitySpec> {
        self.entities.iter().find(|e| e.name == name)
    }

    pub fn field(&self, entity: &str, field: &str) -> Option<&FieldSpec> {
        self.entity(entity).and_then(|e| e.field(field))
    }

    pub fn relations(&self) -> &'static [Relation] {
        Relation::ALL
    }

    pub fn operators(&self) -> &'static [Operator] {
        Operator::ALL
    }

    pub fn roles(&self) -> &'static [Role] {
        Role::ALL
    }

    /// Entities sorted by name, the order used wherever output must not
    /// depend on file layout.
    pub fn entities_sorted(&self) -> Vec<&EntitySpec> {
        let mut v: Vec<_> = self.entities.iter().collect();
        v.sort_by(|a, b| a.name.cmp(&b.name));
        v
    }

    /// Checks one value against `entity.field`. `None` stands for null.
    pub fn validate_field_value(
        &self,
        entity: &str,
        field: &str,
        value: Option<&Scalar>,
    ) -> Result<(), ValueIssue> {
        let spec = self.entity(entity).ok_or(ValueIssue::UnknownEntity)?;
        let field = spec.field(field).ok_or(ValueIssue::UnknownField)?;
        match value {
            None if field.nullable => Ok(()),
            None => Err(ValueIssue::NullNotAllowed),
            Some(v) => check_kind(field, v),
        }
    }
}

pub(crate) fn check_kind(field: &FieldSpec, value: &Scalar) -> Result<(), ValueIssue> {
    match field.kind {
        ValueKind::Categorical => {
            let s = value
                .as_text()
                .ok_or(ValueIssue::WrongKind(ValueKind::Categorical))?;
            let canon = field.values.as_deref().unwrap_or_default();
            if canon.iter().any(|c| c == s) {
                Ok(())
            } else {
                Err(ValueIssue::NotCanonical)
            }
        }
        ValueKind::Numeric => value
            .as_number()
            .filter(|n| n.is_finite())
            .map(|_| ())
            .ok_or(ValueIssue::WrongKind(ValueKind::Numeric)),
        ValueKind::TimeOfDay => {
            let n = value
                .as_number()
                .ok_or(ValueIssue::WrongKind(ValueKind::TimeOfDay))?;
            if (0.0..1440.0).contains(&n) {
                Ok(())
            } else {
                Err(ValueIssue::TimeOutOfRange)
            }
        }
        ValueKind::Date => {
            let s = value.as_text().ok_or(ValueIssue::WrongKind(ValueKind::Date))?;
            if is_iso_date(s) {
                Ok(())
            } else {
                Err(ValueIssue::BadDate)
            }
        }
        ValueKind::Text => value
            .as_text()
            .map(|_| ())
            .ok_or(ValueIssue::WrongKind(ValueKind::Text)),
    }
}

pub(crate) fn is_iso_date(s: &str) -> bool {
    s.len() == 10 && chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;

    #[test]
    fn canonical_severity_accepted() {
        let reg = testkit::registry();
        assert_eq!(
            reg.validate_field_value("Crash", "severity", Some(&"Fatal injury".into())),
            Ok(())
        );
    }

    #[test]
    fn raw_severity_rejected_as_non_canonical() {
        let reg = testkit::registry();
        let err = reg
            .validate_field_value("Crash", "severity", Some(&"fatal".into()))
            .unwrap_err();
        assert_eq!(err.to_string(), "not a canonical value");
    }

    #[test]
    fn school_has_no_speed_limit() {
        let reg = testkit::registry();
        let err = reg
            .validate_field_value("School", "speed_limit", Some(&Scalar::Number(30.0)))
            .unwrap_err();
        assert_eq!(err.to_string(), "unknown field for entity");
    }

    #[test]
    fn time_of_day_bounds() {
        let reg = testkit::registry();
        let ok = |n: f64| reg.validate_field_value("Crash", "crash_time", Some(&n.into()));
        assert!(ok(0.0).is_ok());
        assert!(ok(1439.0).is_ok());
        assert_eq!(ok(1440.0), Err(ValueIssue::TimeOutOfRange));
        assert_eq!(ok(-1.0), Err(ValueIssue::TimeOutOfRange));
    }

    #[test]
    fn dates_must_be_iso() {
        let reg = testkit::registry();
        let v = |s: &str| reg.validate_field_value("Crash", "crash_date", Some(&s.into()));
        assert!(v("2025-02-05").is_ok());
        assert_eq!(v("2025-02-30"), Err(ValueIssue::BadDate));
        assert_eq!(v("February 5 2025"), Err(ValueIssue::BadDate));
    }

    #[test]
    fn empty_registry_is_valid() {
        let reg = SchemaRegistry::empty("0").checked().unwrap();
        assert!(reg.entities.is_empty());
    }

    #[test]
    fn categorical_without_values_is_conflict() {
        let mut reg = testkit::registry();
        reg.entities[0].fields[0].values = Some(Vec::new());
        assert!(matches!(
            reg.checked(),
            Err(SchemaError::EmptyCanonicalSet { .. })
        ));
    }

    #[test]
    fn duplicate_entity_is_conflict() {
        let mut reg = testkit::registry();
        let dup = reg.entities[1].clone();
        reg.entities.push(dup);
        assert_eq!(
            reg.checked(),
            Err(SchemaError::DuplicateEntity("Road".into()))
        );
    }

    #[test]
    fn closed_sets_match_frame_vocabulary() {
        let reg = testkit::registry();
        let rel: Vec<_> = reg.relations().iter().map(|r| r.as_str()).collect();
        assert_eq!(rel, ["contains", "intersects", "nearest_to", "within_distance"]);
        assert_eq!(reg.operators().len(), 9);
        assert_eq!(reg.roles().len(), 5);
        assert_eq!(reg.ranking_metrics, [Metric::CrashCount]);
    }
}
