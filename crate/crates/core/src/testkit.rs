//! Shared fixtures for unit tests.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::frame::SemanticFrame;
use crate::geo::{Geometry, Point, Polygon};
use crate::repair::{NormalizationRule, NormalizationTable};
use crate::schema::{EntitySpec, FieldSpec, GeometryKind, SchemaRegistry, ValueKind};
use crate::store::{Dataset, EntityRecord};

fn cat(name: &str, values: &[&str]) -> FieldSpec {
    FieldSpec {
        name: name.into(),
        kind: ValueKind::Categorical,
        values: Some(values.iter().map(|v| v.to_string()).collect()),
        unit: None,
        nullable: true,
    }
}

fn plain(name: &str, kind: ValueKind, unit: Option<&str>) -> FieldSpec {
    FieldSpec {
        name: name.into(),
        kind,
        values: None,
        unit: unit.map(String::from),
        nullable: true,
    }
}

fn entity(
    name: &str,
    geometry: GeometryKind,
    scope: bool,
    anchor: bool,
    label: Option<&str>,
    fields: Vec<FieldSpec>,
) -> EntitySpec {
    EntitySpec {
        name: name.into(),
        geometry,
        scope_capable: scope,
        anchor_capable: anchor,
        label_field: label.map(String::from),
        fields,
    }
}

pub const SEVERITY: [&str; 4] = [
    "Property damage only (none injured)",
    "Non-fatal injury",
    "Fatal injury",
    "Unknown",
];

/// A trimmed copy of the shipped registry (fewer first-harmful-event codes).
pub fn registry() -> SchemaRegistry {
    let sidewalk = ["yes", "no", "unknown"];
    SchemaRegistry {
        version: "test".into(),
        ranking_metrics: vec![crate::schema::Metric::CrashCount],
        entities: vec![
            entity(
                "Crash",
                GeometryKind::Point,
                false,
                false,
                None,
                vec![
                    cat("severity", &SEVERITY),
                    cat(
                        "first_hrmf",
                        &[
                            "Collision with pedestrian",
                            "Collision with cyclist",
                            "Collision with motor vehicle in traffic",
                            "Collision with fixed object",
                            "Collision with animal - deer",
                            "Unknown",
                        ],
                    ),
                    plain("crash_date", ValueKind::Date, None),
                    plain("crash_time", ValueKind::TimeOfDay, Some("minutes-since-midnight")),
                    cat("sidewalk_left", &sidewalk),
                    cat("sidewalk_right", &sidewalk),
                    plain("speed_limit", ValueKind::Numeric, Some("mph")),
                    cat(
                        "junction_type",
                        &["Not at junction", "Four-way intersection", "Traffic circle", "Unknown"],
                    ),
                ],
            ),
            entity(
                "Road",
                GeometryKind::Polyline,
                false,
                false,
                None,
                vec![
                    plain("speed_limit", ValueKind::Numeric, Some("mph")),
                    plain("opp_speed_limit", ValueKind::Numeric, Some("mph")),
                    cat("sidewalk_left", &sidewalk),
                    cat("sidewalk_right", &sidewalk),
                ],
            ),
            entity(
                "School",
                GeometryKind::Point,
                false,
                true,
                Some("name"),
                vec![plain("name", ValueKind::Text, None)],
            ),
            entity(
                "BusStop",
                GeometryKind::Point,
                false,
                true,
                Some("stop_name"),
                vec![
                    plain("stop_id", ValueKind::Text, None),
                    plain("stop_name", ValueKind::Text, None),
                ],
            ),
            entity(
                "Crosswalk",
                GeometryKind::Polygon,
                false,
                false,
                None,
                vec![plain("crosswalk_id", ValueKind::Text, None)],
            ),
            entity(
                "Town",
                GeometryKind::Polygon,
                true,
                true,
                Some("name"),
                vec![plain("name", ValueKind::Text, None)],
            ),
        ],
    }
    .checked()
    .unwrap()
}

/// The validated frame for "top 5 schools by pedestrian crashes within 500m
/// in Boston".
pub const RANKING_FRAME: &str = r#"{
  "supported": true,
  "targets": [
    {"entity": "School", "role": "primary"},
    {"entity": "Crash",  "role": "support"},
    {"entity": "Town",   "role": "scope"}
  ],
  "references": [
    {"entity": "Town", "role": "scope", "name": "Boston"}
  ],
  "spatial_constraints": [
    {"relation": "within_distance",
     "target_role": "support",
     "reference_role": "primary",
     "distance_m": 500.0}
  ],
  "attribute_constraints": [
    {"target_role": "support",
     "field": "first_hrmf",
     "operator": "eq",
     "value": "Collision with pedestrian"}
  ],
  "relations": [],
  "ranking": {
    "metric": "crash_count",
    "target_role": "primary",
    "order": "highest",
    "top_n": 5
  }
}"#;

pub fn ranking_frame() -> SemanticFrame {
    crate::frame::parse_frame(RANKING_FRAME).unwrap()
}

/// "show crashes within 500m of all schools in Quincy"
pub fn proximity_frame() -> SemanticFrame {
    crate::frame::parse_frame(
        r#"{"supported": true,
            "targets": [{"entity": "Crash", "role": "primary"},
                        {"entity": "School", "role": "support"},
                        {"entity": "Town", "role": "scope"}],
            "references": [{"entity": "Town", "role": "scope", "name": "Quincy"}],
            "spatial_constraints": [{"relation": "within_distance", "target_role": "primary",
                                     "reference_role": "support", "distance_m": 500}]}"#,
    )
    .unwrap()
}

fn rule(id: &str, context: &str, raw: &str, canonical: &str) -> NormalizationRule {
    NormalizationRule {
        rule_id: id.into(),
        context: context.into(),
        raw: raw.into(),
        canonical: canonical.into(),
    }
}

/// A small normalization table: the curated corrections plus a few aliases.
pub fn table() -> NormalizationTable {
    NormalizationTable::new([
        rule("test.hrmf.cyclists", "first_hrmf", "cyclists", "Collision with cyclist"),
        rule("test.hrmf.cyclist", "first_hrmf", "cyclist", "Collision with cyclist"),
        rule("test.hrmf.pedestrian", "first_hrmf", "pedestrian", "Collision with pedestrian"),
        rule("test.hrmf.bike", "first_hrmf", "bike", "Collision with cyclist"),
        rule("test.severity.injury", "severity", "injury", "Non-fatal injury"),
        rule("test.severity.fatal", "severity", "fatal", "Fatal injury"),
        rule("test.severity.pdo", "severity", "pdo", "Property damage only (none injured)"),
        rule("test.distance.1km", "distance", "1km", "1000"),
        rule("test.distance.half_mile", "distance", "half a mile", "804"),
        rule("test.distance.near", "distance", "near", "250"),
        rule("test.time.4to8", "time", "between 4pm and 8pm", "[960, 1200]"),
        rule("test.order.most", "order", "most", "highest"),
        rule("test.order.fewest", "order", "fewest", "lowest"),
        rule("test.entity.schools", "entity", "schools", "School"),
    ])
    .unwrap()
}

fn square(lon: f64, lat: f64, size: f64) -> Geometry {
    let p = |x: f64, y: f64| Point::new(lon + x * size, lat + y * size);
    Geometry::Polygon(Polygon::new(
        vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0), p(0.0, 0.0)],
        vec![],
    ))
}

fn pt(lon: f64, lat: f64) -> Geometry {
    Geometry::Point(Point::new(lon, lat))
}

/// Two towns side by side, three schools (two share a name), a road, a bus
/// stop and a handful of crashes.
pub fn small_dataset() -> (SchemaRegistry, Dataset) {
    let reg = registry();
    let mut b = Dataset::builder(&reg);
    b.add(
        "Town",
        vec![
            EntityRecord::new("town-quincy", "Town", square(-71.02, 42.24, 0.02)).with("name", "Quincy"),
            EntityRecord::new("town-boston", "Town", square(-71.00, 42.24, 0.02)).with("name", "Boston"),
        ],
    )
    .unwrap();
    b.add(
        "School",
        vec![
            EntityRecord::new("school-1", "School", pt(-71.015, 42.245)).with("name", "Main School"),
            EntityRecord::new("school-2", "School", pt(-70.995, 42.245)).with("name", "Main School"),
            EntityRecord::new("school-3", "School", pt(-71.010, 42.255)).with("name", "Quincy High School"),
        ],
    )
    .unwrap();
    b.add(
        "BusStop",
        vec![EntityRecord::new("busstop-1", "BusStop", pt(-71.005, 42.25))
            .with("stop_id", "BS-1")
            .with("stop_name", "Palmer St @ Brockton Ave")],
    )
    .unwrap();
    b.add(
        "Road",
        vec![EntityRecord::new(
            "road-1",
            "Road",
            Geometry::Polyline(vec![Point::new(-71.02, 42.25), Point::new(-70.98, 42.25)]),
        )
        .with("speed_limit", 30.0)],
    )
    .unwrap();
    let crash = |id: &str, lon: f64, lat: f64, sev: &str, hrmf: &str| {
        EntityRecord::new(id, "Crash", pt(lon, lat))
            .with("severity", sev)
            .with("first_hrmf", hrmf)
    };
    b.add(
        "Crash",
        vec![
            crash("crash-1", -71.0151, 42.2451, "Fatal injury", "Collision with pedestrian"),
            crash("crash-2", -71.0100, 42.2500, "Non-fatal injury", "Collision with cyclist"),
            crash("crash-3", -70.9950, 42.2452, "Unknown", "Collision with pedestrian"),
            crash("crash-4", -70.9900, 42.2550, "Fatal injury", "Collision with fixed object"),
            crash("crash-5", -71.0300, 42.2300, "Unknown", "Unknown"),
        ],
    )
    .unwrap();
    b.add("Crosswalk", vec![]).unwrap();
    let ds = b.build();
    (reg, ds)
}
