//! Shared helpers for integration tests: the shipped registry, a cached
//! small fixture, and a generator of random frames over the registry.
#![allow(dead_code)]

use std::sync::OnceLock;

use geoframe_core::fixture::{generate_fixture, Fixture, FixtureSpec};
use geoframe_core::frame::{parse_frame, SemanticFrame};
use geoframe_core::repair::{
    ambiguous_references, pick_candidate, repair, Gazetteer, NormalizationTable, RepairContext,
};
use geoframe_core::schema::{SchemaRegistry, ValueKind};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const REGISTRY_TOML: &str = include_str!("../../../../data/registry.toml");

pub fn registry() -> &'static SchemaRegistry {
    static R: OnceLock<SchemaRegistry> = OnceLock::new();
    R.get_or_init(|| {
        toml::from_str::<SchemaRegistry>(REGISTRY_TOML)
            .expect("registry parses")
            .checked()
            .expect("registry is consistent")
    })
}

/// Seed 1, at most 1,500 records per entity.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| generate_fixture(1, FixtureSpec::small(), registry()).expect("fixture builds"))
}

pub fn gazetteer() -> &'static Gazetteer {
    static G: OnceLock<Gazetteer> = OnceLock::new();
    G.get_or_init(|| {
        let f = fixture();
        Gazetteer::from_dataset(registry(), &f.dataset).with_entries(f.places.clone())
    })
}

/// Repairs a raw frame against the fixture, taking the first candidate of
/// any ambiguous reference. None when repair rejects the frame.
pub fn validated(raw: &SemanticFrame) -> Option<SemanticFrame> {
    let table = NormalizationTable::new([]).expect("empty table");
    let cx = RepairContext {
        registry: registry(),
        table: &table,
        gazetteer: gazetteer(),
    };
    let (mut f, _) = repair(cx, raw).ok()?;
    while let Some(&i) = ambiguous_references(&f).first() {
        f = pick_candidate(&f, i, 1).ok()?;
    }
    Some(f)
}

const ENTITIES: [&str; 6] = ["Crash", "Road", "School", "BusStop", "Crosswalk", "Town"];
const TOWNS: [&str; 4] = ["Quincy", "Amherst", "Boston", "Brockton"];
const DISTANCES: [f64; 5] = [50.0, 100.0, 250.0, 500.0, 1000.0];

fn geometry(entity: &str) -> &'static str {
    match entity {
        "Road" => "polyline",
        "Crosswalk" | "Town" => "polygon",
        _ => "point",
    }
}

fn attribute(rng: &mut ChaCha8Rng, entity: &str, role: &str) -> Option<Value> {
    let spec = registry().entity(entity)?;
    let fields: Vec<_> = spec.fields.iter().filter(|f| f.kind != ValueKind::Text).collect();
    let f = fields.choose(rng)?;
    let (op, value): (&str, Option<Value>) = match f.kind {
        ValueKind::Categorical => {
            let vals = f.values.as_deref().unwrap_or_default();
            match rng.random_range(0..4) {
                0 | 1 => ("eq", Some(json!(vals.choose(rng)?))),
                2 => {
                    let a = vals.choose(rng)?;
                    let b = vals.choose(rng)?;
                    ("in", Some(json!([a, b])))
                }
                _ => (["is_null", "not_null"][rng.random_range(0..2)], None),
            }
        }
        ValueKind::Numeric => {
            let v = [25.0, 30.0, 35.0, 40.0][rng.random_range(0..4)];
            match rng.random_range(0..4) {
                0 => ("gt", Some(json!(v))),
                1 => ("lte", Some(json!(v))),
                2 => ("eq", Some(json!(v))),
                _ => ("between", Some(json!([v, v + 10.0]))),
            }
        }
        ValueKind::Date => {
            let y = rng.random_range(2020..2025);
            match rng.random_range(0..3) {
                0 => ("gte", Some(json!(format!("{y}-01-01")))),
                1 => ("lt", Some(json!(format!("{y}-07-01")))),
                _ => ("between", Some(json!([format!("{y}-01-01"), format!("{y}-12-31")]))),
            }
        }
        ValueKind::TimeOfDay => {
            let lo = rng.random_range(0..1440) as f64;
            let hi = rng.random_range(0..1440) as f64;
            match rng.random_range(0..3) {
                0 => ("between", Some(json!([lo, hi]))),
                1 => ("gte", Some(json!(lo))),
                _ => ("lt", Some(json!(hi))),
            }
        }
        ValueKind::Text => return None,
    };
    let mut c = json!({"target_role": role, "field": f.name, "operator": op});
    if let Some(v) = value {
        c["value"] = v;
    }
    Some(c)
}

fn label_of(entity: &str, rng: &mut ChaCha8Rng) -> Option<String> {
    let label = registry().entity(entity)?.label_field.clone()?;
    let recs = fixture().dataset.records(entity);
    recs.choose(rng)?.text(&label).map(String::from)
}

/// A raw frame drawn from `seed`. Most draws survive repair; callers
/// filter the rest through [`validated`].
pub fn random_frame(seed: u64) -> SemanticFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let primary = *ENTITIES.choose(&mut rng).unwrap();
    let mut targets = vec![json!({"entity": primary, "role": "primary"})];
    let mut references = Vec::new();
    let mut spatial = Vec::new();
    let mut attrs = Vec::new();
    let mut ranking = Value::Null;

    if primary != "Town" && rng.random_bool(0.5) {
        let town = *TOWNS.choose(&mut rng).unwrap();
        targets.push(json!({"entity": "Town", "role": "scope"}));
        references.push(json!({"entity": "Town", "role": "scope", "name": town}));
    }

    let mut second_role = None;
    match rng.random_range(0..4) {
        0 => {
            // anchor by name
            let (entity, name) = match rng.random_range(0..3) {
                0 => ("School", label_of("School", &mut rng)),
                1 => ("BusStop", label_of("BusStop", &mut rng)),
                _ => ("Town", Some("Amherst Center".to_string())),
            };
            if let (Some(name), true) = (name, entity != primary) {
                targets.push(json!({"entity": entity, "role": "anchor"}));
                references.push(json!({"entity": entity, "role": "anchor", "name": name}));
                let d = *DISTANCES.choose(&mut rng).unwrap();
                spatial.push(json!({"relation": "within_distance", "target_role": "primary",
                                    "reference_role": "anchor", "distance_m": d}));
                second_role = Some("anchor");
            }
        }
        1 | 2 => {
            let others: Vec<&str> = ENTITIES.iter().copied().filter(|e| *e != primary).collect();
            let entity = *others.choose(&mut rng).unwrap();
            let role = if rng.random_bool(0.5) { "support" } else { "filter" };
            if !(role == "support" && entity == "Town" && targets.len() > 1) {
                targets.push(json!({"entity": entity, "role": role}));
                let (pg, sg) = (geometry(primary), geometry(entity));
                let relation = match rng.random_range(0..4) {
                    0 | 1 => "within_distance",
                    2 => "intersects",
                    _ if pg == "polygon" || sg == "polygon" => "contains",
                    _ => "nearest_to",
                };
                let mut c = json!({"relation": relation, "target_role": "primary", "reference_role": role});
                if relation == "within_distance" {
                    c["distance_m"] = json!(*DISTANCES.choose(&mut rng).unwrap());
                }
                spatial.push(c);
                second_role = Some(role);
            }
        }
        _ => {}
    }

    // ranking: crashes counted per primary
    if primary != "Crash" && second_role.is_none() && rng.random_bool(0.5) {
        targets.push(json!({"entity": "Crash", "role": "support"}));
        match primary {
            "Town" | "Road" => {}
            _ => spatial.push(json!({"relation": "within_distance", "target_role": "support",
                                     "reference_role": "primary",
                                     "distance_m": *DISTANCES.choose(&mut rng).unwrap()})),
        }
        ranking = json!({"metric": "crash_count", "target_role": "primary",
                         "order": if rng.random_bool(0.7) { "highest" } else { "lowest" },
                         "top_n": rng.random_range(1..=10)});
        if rng.random_bool(0.5) {
            attrs.extend(attribute(&mut rng, "Crash", "support"));
        }
    }

    for _ in 0..rng.random_range(0..3) {
        attrs.extend(attribute(&mut rng, primary, "primary"));
    }

    let mut frame = json!({
        "supported": true,
        "targets": targets,
        "references": references,
        "spatial_constraints": spatial,
        "attribute_constraints": attrs,
        "relations": [],
    });
    if !ranking.is_null() {
        frame["ranking"] = ranking;
    }
    parse_frame(&frame.to_string()).expect("generated frame parses")
}
