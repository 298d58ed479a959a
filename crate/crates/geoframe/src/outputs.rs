//! Renderers for query results: a GeoJSON map document, ranking or record
//! tables as CSV or JSON, a standalone HTML viewer, and the template
//! summary of a frame.

use std::fmt::Write as _;

use geoframe_core::exec::ResultSet;
use geoframe_core::frame::{fmt_number, AttrValue, AttributeConstraint, SemanticFrame, SpatialConstraint};
use geoframe_core::geo::{BBox, Geometry};
use geoframe_core::repair::{ActionKind, RepairAction, RepairReport};
use geoframe_core::schema::{Operator, Order, Relation, Role, Scalar, SchemaRegistry};
use geoframe_core::store::EntityRecord;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::ingest::record_feature;

/// Columns of a ranking table, in order.
pub const RANKING_COLUMNS: [&str; 4] = ["rank", "id", "name", "value"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

fn role_color(role: Role) -> &'static str {
    match role {
        Role::Primary => "#d62728",
        Role::Support => "#1f77b4",
        Role::Filter => "#9467bd",
        Role::Anchor => "#ff7f0e",
        Role::Scope => "#7f7f7f",
    }
}

fn style_for(role: Role, g: &Geometry) -> Value {
    let color = role_color(role);
    match g {
        Geometry::Polygon(_) => {
            json!({"stroke": color, "fill": color, "fill_opacity": 0.08, "stroke_width": 2})
        }
        Geometry::Polyline(_) => json!({"stroke": color, "stroke_width": 3}),
        Geometry::Point(_) => json!({"fill": color, "radius": if role == Role::Anchor { 7 } else { 4 }}),
    }
}

fn result_bbox<'a>(records: impl Iterator<Item = &'a EntityRecord>) -> Option<BBox> {
    records.map(|r| r.geometry.bbox()).reduce(|a, b| a.union(&b))
}

/// GeoJSON feature collection holding exactly the records of every role.
/// Map metadata rides along as foreign members.
pub fn render_map_value(result: &ResultSet) -> Value {
    let ranked = result.ranking.as_ref();
    let mut features = Vec::new();
    for (role, records) in &result.role_records {
        for r in records {
            let mut extra = Map::new();
            extra.insert("role".into(), json!(role.as_str()));
            extra.insert("entity".into(), json!(r.entity));
            extra.insert("style".into(), style_for(*role, &r.geometry));
            if let Some(rk) = ranked.filter(|rk| rk.role == *role) {
                if let Some(row) = rk.rows.iter().find(|row| row.id == r.id) {
                    extra.insert("rank".into(), json!(row.rank));
                    extra.insert("metric".into(), json!(rk.metric.as_str()));
                    extra.insert("value".into(), json!(row.value));
                }
            }
            features.push(record_feature(r, extra));
        }
    }
    let counts: Map<String, Value> = result
        .role_records
        .iter()
        .map(|(role, rs)| (role.as_str().to_string(), json!(rs.len())))
        .collect();
    let mut doc = json!({
        "type": "FeatureCollection",
        "features": features,
        "metadata": {
            "dataset_version": result.dataset_version,
            "frame": result.frame_echo,
            "counts": counts,
            "ranking": ranked.map(|rk| json!({"metric": rk.metric.as_str(), "role": rk.role.as_str(), "top_n": rk.top_n})),
        },
    });
    if let Some(b) = result_bbox(result.role_records.values().flatten()) {
        doc["bbox"] = json!([b.min.lon, b.min.lat, b.max.lon, b.max.lat]);
    }
    doc
}

pub fn render_map(result: &ResultSet) -> String {
    serde_json::to_string_pretty(&render_map_value(result)).expect("serializes") + "\n"
}

/// Ranking rows when the result is ranked, else every primary record with
/// all registry fields.
pub fn render_table(result: &ResultSet, reg: &SchemaRegistry, format: TableFormat) -> String {
    match &result.ranking {
        Some(_) => render_ranking(result, format),
        None => render_records(result.records(Role::Primary), reg, format),
    }
}

pub fn render_ranking(result: &ResultSet, format: TableFormat) -> String {
    let rows = result.ranking_rows().unwrap_or(&[]);
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(RANKING_COLUMNS).expect("in-memory write");
            for r in rows {
                w.write_record([r.rank.to_string(), r.id.clone(), r.name.clone(), r.value.to_string()])
                    .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
        TableFormat::Json => serde_json::to_string_pretty(&ranking_value(result)).expect("serializes") + "\n",
    }
}

/// The ranking table as a JSON value: metric, role, columns and rows.
pub fn ranking_value(result: &ResultSet) -> Value {
    let rk = result.ranking.as_ref();
    json!({
        "metric": rk.map(|r| r.metric.as_str()),
        "role": rk.map(|r| r.role.as_str()),
        "columns": RANKING_COLUMNS,
        "rows": result.ranking_rows().unwrap_or(&[]),
    })
}

fn cell(v: Option<&Scalar>) -> String {
    v.map(Scalar::to_string).unwrap_or_default()
}

/// Record export: `id, entity, lon, lat` then the entity's registry fields
/// in registry order. Geometry is reduced to its anchor point.
pub fn render_records(records: &[EntityRecord], reg: &SchemaRegistry, format: TableFormat) -> String {
    let entity = records.first().map(|r| r.entity.as_str());
    let fields: Vec<&str> = entity
        .and_then(|e| reg.entity(e))
        .map(|e| e.fields.iter().map(|f| f.name.as_str()).collect())
        .unwrap_or_default();
    let mut columns = vec!["id", "entity", "lon", "lat"];
    columns.extend(&fields);
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&columns).expect("in-memory write");
            for r in records {
                let p = r.geometry.anchor_point();
                let mut row = vec![r.id.clone(), r.entity.clone(), p.lon.to_string(), p.lat.to_string()];
                row.extend(fields.iter().map(|f| cell(r.attr(f))));
                w.write_record(&row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
        TableFormat::Json => {
            let rows: Vec<Value> = records
                .iter()
                .map(|r| {
                    let p = r.geometry.anchor_point();
                    let mut o = Map::new();
                    o.insert("id".into(), json!(r.id));
                    o.insert("entity".into(), json!(r.entity));
                    o.insert("lon".into(), json!(p.lon));
                    o.insert("lat".into(), json!(p.lat));
                    for f in &fields {
                        o.insert((*f).into(), json!(r.attr(f)));
                    }
                    Value::Object(o)
                })
                .collect();
            let doc = json!({"entity": entity, "columns": columns, "rows": rows});
            serde_json::to_string_pretty(&doc).expect("serializes") + "\n"
        }
    }
}

const VIEWER_TEMPLATE: &str = r#"<!doctype html>
<html><head><meta charset="utf-8"><title>geoframe result</title>
<style>body{font-family:sans-serif;margin:1em}svg{border:1px solid #ccc;background:#fafafa}
#tip{font-size:13px;min-height:1.5em}</style></head>
<body><p id="summary"></p><svg id="map" width="900" height="600"></svg><div id="tip"></div>
<script>
const doc = __DATA__;
const summary = __SUMMARY__;
document.getElementById('summary').textContent = summary;
const svg = document.getElementById('map'), W = 900, H = 600, NS = 'http://www.w3.org/2000/svg';
const b = doc.bbox || [0, 0, 1, 1];
const k = Math.cos((b[1] + b[3]) / 2 * Math.PI / 180);
const sx = (b[2] - b[0]) * k || 1e-6, sy = (b[3] - b[1]) || 1e-6;
const s = Math.min((W - 40) / sx, (H - 40) / sy);
const xy = c => [20 + (c[0] - b[0]) * k * s, H - 20 - (c[1] - b[1]) * s];
const path = rings => rings.map(r => 'M' + r.map(c => xy(c).join(',')).join('L')).join(' ');
const order = {scope: 0, filter: 1, support: 2, primary: 3, anchor: 4};
const feats = doc.features.slice().sort((a, c) => order[a.properties.role] - order[c.properties.role]);
for (const f of feats) {
  const g = f.geometry, st = f.properties.style || {};
  let el;
  if (g.type === 'Point') {
    el = document.createElementNS(NS, 'circle');
    const [x, y] = xy(g.coordinates);
    el.setAttribute('cx', x); el.setAttribute('cy', y); el.setAttribute('r', st.radius || 4);
    el.setAttribute('fill', st.fill);
  } else {
    el = document.createElementNS(NS, 'path');
    const rings = g.type === 'LineString' ? [g.coordinates]
      : g.coordinates;
    el.setAttribute('d', path(rings));
    el.setAttribute('stroke', st.stroke); el.setAttribute('stroke-width', st.stroke_width || 1);
    el.setAttribute('fill', g.type === 'LineString' ? 'none' : st.fill);
    el.setAttribute('fill-opacity', st.fill_opacity || 0);
  }
  el.addEventListener('mouseover', () => {
    document.getElementById('tip').textContent = JSON.stringify(Object.assign({id: f.id}, f.properties, {style: undefined}));
  });
  svg.appendChild(el);
}
</script></body></html>
"#;

/// JSON made safe to embed inside a script element.
fn script_json(v: &Value) -> String {
    serde_json::to_string(v).expect("serializes").replace("</", "<\\/")
}

/// Self-contained HTML page drawing the map document; no network access.
pub fn render_html(result: &ResultSet, summary: &str) -> String {
    VIEWER_TEMPLATE
        .replace("__SUMMARY__", &script_json(&json!(summary)))
        .replace("__DATA__", &script_json(&render_map_value(result)))
}

fn op_phrase(op: Operator, v: Option<&AttrValue>) -> String {
    let one = |v: Option<&AttrValue>| match v {
        Some(AttrValue::One(s)) => s.to_string(),
        Some(AttrValue::Many(xs)) => xs.iter().map(Scalar::to_string).collect::<Vec<_>>().join(", "),
        None => String::new(),
    };
    match op {
        Operator::Eq => format!("= {}", one(v)),
        Operator::Gt => format!("> {}", one(v)),
        Operator::Gte => format!(">= {}", one(v)),
        Operator::Lt => format!("< {}", one(v)),
        Operator::Lte => format!("<= {}", one(v)),
        Operator::In => format!("in [{}]", one(v)),
        Operator::Between => match v {
            Some(AttrValue::Many(xs)) if xs.len() == 2 => format!("between {} and {}", xs[0], xs[1]),
            _ => format!("between {}", one(v)),
        },
        Operator::IsNull => "is empty".into(),
        Operator::NotNull => "is present".into(),
    }
}

fn constraint_phrase(c: &AttributeConstraint) -> String {
    match c.operator.known() {
        Some(op) => format!("{} {}", c.field, op_phrase(op, c.value.as_ref())),
        None => format!("{} {}", c.field, c.operator.as_str()),
    }
}

/// `Entity` or `Entity where a and b` for the constraints on `role`.
fn role_phrase(frame: &SemanticFrame, role: Role) -> String {
    let entity = frame.entity_for(role).unwrap_or("?").to_string();
    let conds: Vec<String> = frame
        .attribute_constraints
        .iter()
        .filter(|c| c.target_role.is(role))
        .map(constraint_phrase)
        .collect();
    if conds.is_empty() {
        entity
    } else {
        format!("{entity} where {}", conds.join(" and "))
    }
}

/// How a reference role is named: the place name for a named reference,
/// else the role's entity with its constraints.
fn reference_label(frame: &SemanticFrame, role: Role, subject: Role) -> String {
    if let Some(r) = frame.references.iter().find(|r| r.role.is(role)) {
        return r.name.clone();
    }
    if role == subject {
        return frame.entity_for(role).unwrap_or("?").to_string();
    }
    role_phrase(frame, role)
}

fn spatial_phrase(frame: &SemanticFrame, c: &SpatialConstraint, ranked: Option<(Role, Role)>) -> String {
    let (Some(t), Some(r)) = (c.target_role.known(), c.reference_role.known()) else {
        return format!("{} {} {}", c.target_role.as_str(), c.relation.as_str(), c.reference_role.as_str());
    };
    let dist = c.distance_m.as_ref().map(|d| format!("{} m", d)).unwrap_or_default();
    // the ranked pair reads as a bare radius
    if let (Some((p, s)), Some(Relation::WithinDistance)) = (ranked, c.relation.known()) {
        if (t, r) == (s, p) || (t, r) == (p, s) {
            return format!("within {dist}");
        }
    }
    let subject = ranked.map_or(Role::Primary, |(p, _)| p);
    let target = if t == subject {
        String::new()
    } else {
        format!("{} ", frame.entity_for(t).unwrap_or("?"))
    };
    let reference = reference_label(frame, r, subject);
    let verb = match c.relation.known() {
        Some(Relation::WithinDistance) => format!("within {dist} of"),
        Some(Relation::Intersects) => "intersecting".into(),
        Some(Relation::Contains) => "containing".into(),
        Some(Relation::NearestTo) => "nearest to".into(),
        None => c.relation.as_str().to_string(),
    };
    format!("{target}{verb} {reference}")
}

fn scope_names(frame: &SemanticFrame) -> Vec<String> {
    let named: Vec<String> = frame
        .references
        .iter()
        .filter(|r| r.role.is(Role::Scope))
        .map(|r| r.name.clone())
        .collect();
    if named.is_empty() && frame.has_role(Role::Scope) {
        return vec![role_phrase(frame, Role::Scope)];
    }
    named
}

fn quote_after(after: &str) -> String {
    match after.chars().next() {
        Some(c) if c.is_ascii_digit() || c == '[' || c == '-' => after.to_string(),
        _ => format!("'{after}'"),
    }
}

/// One sentence per repair action; `before` and `after` appear verbatim.
pub fn repair_sentence(a: &RepairAction) -> String {
    match a.kind {
        ActionKind::ValueNormalization => format!("Repair: interpreted '{}' as {}.", a.before, quote_after(&a.after)),
        ActionKind::AnchorResolution => format!("Repair: resolved place '{}' to '{}'.", a.before, a.after),
        ActionKind::Structural => format!("Repair: changed {} from '{}' to '{}'.", a.path, a.before, a.after),
    }
}

/// Template summary of what the frame asks for, followed by the repairs
/// that produced it.
pub fn summarize_frame(frame: &SemanticFrame, report: &RepairReport) -> String {
    let mut out = String::new();
    if !frame.supported {
        out.push_str("The question is outside the supported domain.");
    } else {
        let ranking = frame.ranking.as_ref();
        let ranked = ranking.and_then(|r| r.target_role.known()).map(|p| (p, Role::Support));
        let subject = ranked.map_or(Role::Primary, |(p, _)| p);
        match ranking {
            Some(r) => {
                let dir = match r.order.known() {
                    Some(Order::Lowest) => "bottom",
                    _ => "top",
                };
                let _ = write!(
                    out,
                    "Ranking the {dir} {} {} by {} of {}",
                    r.top_n,
                    role_phrase(frame, subject),
                    r.metric.as_str(),
                    role_phrase(frame, Role::Support)
                );
            }
            None => {
                let _ = write!(out, "Showing {}", role_phrase(frame, subject));
            }
        }
        for c in &frame.spatial_constraints {
            let _ = write!(out, ", {}", spatial_phrase(frame, c, ranked));
        }
        for l in &frame.relations {
            let _ = write!(
                out,
                ", {} {} {} within {} m",
                frame.entity_for(l.from_role.known().unwrap_or(Role::Support)).unwrap_or("?"),
                l.kind.as_str(),
                frame.entity_for(l.to_role.known().unwrap_or(Role::Primary)).unwrap_or("?"),
                fmt_number(l.tolerance_m)
            );
        }
        let scopes = scope_names(frame);
        if !scopes.is_empty() {
            let _ = write!(out, ", scoped to {}", scopes.join(" and "));
        }
        out.push('.');
    }
    for a in &report.actions {
        out.push(' ');
        out.push_str(&repair_sentence(a));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpret::EXAMPLE_FRAME;
    use geoframe_core::frame::parse_frame;

    fn action(kind: ActionKind, before: &str, after: &str) -> RepairAction {
        RepairAction {
            kind,
            path: "attribute_constraints[0].value".into(),
            before: before.into(),
            after: after.into(),
            rule_id: "r".into(),
        }
    }

    fn canonical_example() -> SemanticFrame {
        let mut f = parse_frame(EXAMPLE_FRAME).unwrap();
        f.attribute_constraints[0].value = Some(AttrValue::One("Collision with pedestrian".into()));
        f.spatial_constraints[0].distance_m = Some(Scalar::Number(500.0));
        f.ranking.as_mut().unwrap().order = Order::Highest.into();
        f
    }

    #[test]
    fn example_summary_snapshot() {
        let s = summarize_frame(&canonical_example(), &RepairReport::default());
        assert_eq!(
            s,
            "Ranking the top 5 School by crash_count of Crash where first_hrmf = Collision with pedestrian, within 500 m, scoped to Boston."
        );
    }

    #[test]
    fn repair_sentences_quote_before_and_after() {
        let report = RepairReport {
            actions: vec![
                action(ActionKind::ValueNormalization, "half a mile", "804 m"),
                action(ActionKind::ValueNormalization, "pedestrian", "Collision with pedestrian"),
            ],
            repaired: true,
            ..Default::default()
        };
        let s = summarize_frame(&canonical_example(), &report);
        assert!(s.contains("interpreted 'half a mile' as 804 m"), "{s}");
        assert!(s.contains("interpreted 'pedestrian' as 'Collision with pedestrian'"), "{s}");
        assert!(!summarize_frame(&canonical_example(), &RepairReport::default()).contains("Repair"));
    }

    #[test]
    fn unsupported_summary() {
        let s = summarize_frame(&SemanticFrame::unsupported(), &RepairReport::default());
        assert_eq!(s, "The question is outside the supported domain.");
    }

    #[test]
    fn script_json_escapes_closing_tags() {
        assert_eq!(script_json(&json!("</script>")), r#""<\/script>""#);
    }
}
