//! Random raw frames drawn over the registry and the small fixture. Most
//! draws survive repair; callers filter the rest through `validated`.

use geoframe_core::frame::{parse_frame, SemanticFrame};
use geoframe_core::schema::{EntitySpec, GeometryKind, ValueKind};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{registry, small_fixture};

const DISTANCES: [f64; 6] = [20.0, 50.0, 100.0, 250.0, 500.0, 1000.0];

fn entities() -> Vec<&'static EntitySpec> {
    registry().entities_sorted()
}

/// Attribute value taken from a random record, so equality filters hit.
fn sample_value(rng: &mut ChaCha8Rng, entity: &str, field: &str) -> Option<Value> {
    let recs = small_fixture().dataset.records(entity);
    for _ in 0..8 {
        if let Some(v) = recs.choose(rng)?.attr(field) {
            return serde_json::to_value(v).ok();
        }
    }
    None
}

fn attribute(rng: &mut ChaCha8Rng, spec: &EntitySpec, role: &str) -> Option<Value> {
    let fields: Vec<_> = spec.fields.iter().filter(|f| f.kind != ValueKind::Text).collect();
    let f = *fields.choose(rng)?;
    let (op, value): (&str, Option<Value>) = match f.kind {
        ValueKind::Categorical => {
            let vals = f.values.as_deref().unwrap_or_default();
            match rng.random_range(0..5) {
                0 | 1 => ("eq", Some(json!(vals.choose(rng)?))),
                2 => ("eq", sample_value(rng, &spec.name, &f.name)),
                3 => {
                    let picks: Vec<&String> = vals.choose_multiple(rng, 2).collect();
                    ("in", Some(json!(picks)))
                }
                _ => (["is_null", "not_null"][rng.random_range(0..2)], None),
            }
        }
        ValueKind::Numeric => {
            let v = sample_value(rng, &spec.name, &f.name)?.as_f64()?;
            match rng.random_range(0..6) {
                0 => ("gt", Some(json!(v))),
                1 => ("lte", Some(json!(v))),
                2 => ("eq", Some(json!(v))),
                3 => ("gte", Some(json!(v))),
                4 => ("between", Some(json!([v, v + 10.0]))),
                _ => ("not_null", None),
            }
        }
        ValueKind::Date => {
            let v = sample_value(rng, &spec.name, &f.name)?;
            let d = v.as_str()?.to_string();
            match rng.random_range(0..3) {
                0 => ("gte", Some(json!(d))),
                1 => ("lt", Some(json!(d))),
                _ => ("between", Some(json!([format!("{}-01-01", &d[..4]), d]))),
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

fn label_of(rng: &mut ChaCha8Rng, spec: &EntitySpec) -> Option<String> {
    let label = spec.label_field.as_deref()?;
    let recs = small_fixture().dataset.records(&spec.name);
    recs.choose(rng)?.text(label).map(String::from)
}

fn relation(rng: &mut ChaCha8Rng, a: GeometryKind, b: GeometryKind) -> Value {
    let polygon = a == GeometryKind::Polygon || b == GeometryKind::Polygon;
    match rng.random_range(0..5) {
        0 | 1 => json!({"relation": "within_distance", "distance_m": *DISTANCES.choose(rng).unwrap()}),
        2 => json!({"relation": "intersects"}),
        3 if polygon => json!({"relation": "contains"}),
        _ => json!({"relation": "nearest_to"}),
    }
}

fn constraint(rng: &mut ChaCha8Rng, target: (&str, GeometryKind), reference: (&str, GeometryKind)) -> Value {
    let mut c = relation(rng, target.1, reference.1);
    c["target_role"] = json!(target.0);
    c["reference_role"] = json!(reference.0);
    c
}

/// A raw frame drawn from `seed`.
pub fn random_frame(seed: u64) -> SemanticFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = entities();
    let primary = *all.choose(&mut rng).unwrap();
    let pg = primary.geometry;
    let mut targets = vec![json!({"entity": primary.name, "role": "primary"})];
    let mut references = Vec::new();
    let mut spatial = Vec::new();
    let mut attrs = Vec::new();
    let mut ranking = Value::Null;
    let mut used = vec![primary.name.as_str()];

    let scopes: Vec<&EntitySpec> = all.iter().copied().filter(|e| e.scope_capable).collect();
    if !primary.scope_capable && rng.random_bool(0.5) {
        if let Some(s) = scopes.choose(&mut rng) {
            if let Some(name) = label_of(&mut rng, s) {
                targets.push(json!({"entity": s.name, "role": "scope"}));
                references.push(json!({"entity": s.name, "role": "scope", "name": name}));
                used.push(s.name.as_str());
            }
        }
    }

    let mut linked = false;
    match rng.random_range(0..5) {
        0 => {
            // anchor by name: a record label or a gazetteer place
            let anchors: Vec<&EntitySpec> =
                all.iter().copied().filter(|e| e.anchor_capable && e.name != primary.name).collect();
            if let Some(a) = anchors.choose(&mut rng) {
                let name = if rng.random_bool(0.3) {
                    let places: Vec<_> =
                        small_fixture().places.iter().filter(|p| p.entity == a.name).collect();
                    places.choose(&mut rng).map(|p| p.name.clone())
                } else {
                    label_of(&mut rng, a)
                };
                if let Some(name) = name {
                    targets.push(json!({"entity": a.name, "role": "anchor"}));
                    references.push(json!({"entity": a.name, "role": "anchor", "name": name}));
                    spatial.push(json!({"relation": "within_distance", "target_role": "primary",
                                        "reference_role": "anchor",
                                        "distance_m": *DISTANCES.choose(&mut rng).unwrap()}));
                    if rng.random_bool(0.3) {
                        attrs.extend(attribute(&mut rng, a, "anchor"));
                    }
                    linked = true;
                }
            }
        }
        1..=3 => {
            let others: Vec<&EntitySpec> =
                all.iter().copied().filter(|e| !used.contains(&e.name.as_str())).collect();
            if let Some(o) = others.choose(&mut rng) {
                let role = if rng.random_bool(0.5) { "support" } else { "filter" };
                targets.push(json!({"entity": o.name, "role": role}));
                used.push(o.name.as_str());
                let c = if rng.random_bool(0.75) {
                    constraint(&mut rng, ("primary", pg), (role, o.geometry))
                } else {
                    constraint(&mut rng, (role, o.geometry), ("primary", pg))
                };
                let second_reads_primary = c["reference_role"] == "primary";
                spatial.push(c);
                if rng.random_bool(0.3) {
                    attrs.extend(attribute(&mut rng, o, role));
                }
                // a chain through a third role
                let rest: Vec<&EntitySpec> =
                    all.iter().copied().filter(|e| !used.contains(&e.name.as_str())).collect();
                if !second_reads_primary && rng.random_bool(0.3) {
                    if let Some(t) = rest.choose(&mut rng) {
                        let third = if role == "support" { "filter" } else { "support" };
                        targets.push(json!({"entity": t.name, "role": third}));
                        spatial.push(constraint(&mut rng, (role, o.geometry), (third, t.geometry)));
                    }
                }
                linked = true;
            }
        }
        _ => {}
    }

    // ranking: crashes counted per primary
    let crash = registry().entity("Crash");
    if let (Some(crash), false) = (crash, linked || primary.name == "Crash") {
        if rng.random_bool(0.6) && !used.contains(&"Crash") {
            targets.push(json!({"entity": crash.name, "role": "support"}));
            let explicit = pg == GeometryKind::Point || rng.random_bool(0.3);
            if explicit {
                spatial.push(if rng.random_bool(0.7) {
                    json!({"relation": "within_distance", "target_role": "support",
                           "reference_role": "primary",
                           "distance_m": *DISTANCES.choose(&mut rng).unwrap()})
                } else if rng.random_bool(0.5) {
                    constraint(&mut rng, ("support", crash.geometry), ("primary", pg))
                } else {
                    constraint(&mut rng, ("primary", pg), ("support", crash.geometry))
                });
            }
            ranking = json!({"metric": "crash_count", "target_role": "primary",
                             "order": if rng.random_bool(0.7) { "highest" } else { "lowest" },
                             "top_n": rng.random_range(1..=10)});
            if rng.random_bool(0.5) {
                attrs.extend(attribute(&mut rng, crash, "support"));
            }
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
