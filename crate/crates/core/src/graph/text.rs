//! Audit listing and JSON adjacency export.
//!
//! Listing format: a header line `exec_graph: <n> nodes; outputs <ids>`
//! followed by one line per node,
//! `<id> <op> <parameters> [<- <input ids>]`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde_json::{json, Value};

use super::{Attribution, ExecGraph, Node, NodeId, NodeKind, Selection};
use crate::frame::fmt_number;
use crate::repair::display_value;

fn ids(v: &[NodeId]) -> String {
    let parts: Vec<String> = v.iter().map(|i| format!("{i}")).collect();
    parts.join(", ")
}

fn meters(d: Option<f64>) -> String {
    d.map(|d| format!(" {}m", fmt_number(d))).unwrap_or_default()
}

fn params(kind: &NodeKind) -> String {
    match kind {
        NodeKind::EntityLoad {
            entity,
            role,
            selection,
        } => {
            let sel = match selection {
                Selection::All => String::from("all"),
                Selection::Named { ids, points } => {
                    let mut names: Vec<String> = ids.clone();
                    names.extend(points.iter().map(|p| p.id.clone()));
                    format!("[{}]", names.join(", "))
                }
            };
            format!("{entity} role={role} select={sel}")
        }
        NodeKind::AttributeFilter {
            role,
            field,
            operator,
            value,
            ..
        } => {
            let v = value
                .as_ref()
                .map(|v| format!(" {:?}", display_value(v)))
                .unwrap_or_default();
            format!("role={role} {field} {operator}{v}")
        }
        NodeKind::ScopeConstraint { role, scope_role } => format!("role={role} scope={scope_role}"),
        NodeKind::SpatialMatch {
            relation,
            target_role,
            reference_role,
            distance_m,
            ..
        } => format!(
            "{relation}{} target={target_role} reference={reference_role}",
            meters(*distance_m)
        ),
        NodeKind::RelationSnap {
            from_role,
            to_role,
            tolerance_m,
            implicit,
        } => format!(
            "snap_to_road from={from_role} to={to_role} tolerance={}m{}",
            fmt_number(*tolerance_m),
            if *implicit { " implicit" } else { "" }
        ),
        NodeKind::Aggregate {
            metric,
            primary_role,
            support_role,
            attribution,
        } => {
            let by = match attribution {
                Attribution::Spatial {
                    relation,
                    distance_m,
                    ..
                } => format!("{relation}{}", meters(*distance_m)),
                Attribution::Snap => "snap".into(),
                Attribution::Containment => "containment".into(),
            };
            format!("{metric} primary={primary_role} support={support_role} by={by}")
        }
        NodeKind::Rank {
            metric,
            order,
            top_n,
            ..
        } => format!("{metric} {order} top_n={top_n}"),
        NodeKind::RoleMaterialize
        | NodeKind::OutputMap
        | NodeKind::OutputTable
        | NodeKind::OutputSummary => String::new(),
    }
}

fn line(n: &Node) -> String {
    let mut s = format!("{} {}", n.id, n.kind.name());
    let p = params(&n.kind);
    if !p.is_empty() {
        s.push(' ');
        s.push_str(&p);
    }
    if !n.inputs.is_empty() {
        s.push_str(" <- ");
        s.push_str(&ids(&n.inputs));
    }
    s
}

/// Deterministic listing; the empty graph lists as the empty string.
pub fn graph_to_text(g: &ExecGraph) -> String {
    if g.nodes.is_empty() {
        return String::new();
    }
    let mut out = format!(
        "exec_graph: {} nodes; outputs {}\n",
        g.nodes.len(),
        ids(&g.outputs)
    );
    for n in &g.nodes {
        out.push_str(&line(n));
        out.push('\n');
    }
    out
}

/// Adjacency form for DAG viewers: `nodes` (with parameters), `edges` as
/// `[from, to]` pairs, and `outputs`.
pub fn graph_to_json(g: &ExecGraph) -> Value {
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .map(|n| {
            let mut v = serde_json::to_value(n).expect("node serializes");
            v["label"] = Value::String(line(n));
            v
        })
        .collect();
    let edges: Vec<Value> = g
        .nodes
        .iter()
        .flat_map(|n| n.inputs.iter().map(move |i| json!([i.0, n.id.0])))
        .collect();
    json!({
        "nodes": nodes,
        "edges": edges,
        "outputs": g.outputs.iter().map(|o| o.0).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::compile;
    use crate::repair::{resolve_anchors, Gazetteer};
    use crate::testkit;

    fn compiled(f: &crate::frame::SemanticFrame) -> ExecGraph {
        let (reg, ds) = testkit::small_dataset();
        let f = resolve_anchors(&Gazetteer::from_dataset(&reg, &ds), f).unwrap().0;
        compile(&f, &reg).unwrap()
    }

    #[test]
    fn proximity_listing() {
        let text = graph_to_text(&compiled(&testkit::proximity_frame()));
        assert_eq!(text.lines().count(), 10);
        assert!(text.contains("spatial_match within_distance 500m"));
        assert!(text.contains("select=[town-quincy]"));
    }

    #[test]
    fn ranking_listing() {
        let text = graph_to_text(&compiled(&testkit::ranking_frame()));
        assert!(text.contains("rank crash_count highest top_n=5"));
        assert!(text.contains("first_hrmf eq \"Collision with pedestrian\""));
    }

    #[test]
    fn empty_graph_lists_nothing() {
        assert_eq!(graph_to_text(&ExecGraph::default()), "");
    }

    #[test]
    fn json_export_round_trips_edges() {
        let g = compiled(&testkit::ranking_frame());
        let v = graph_to_json(&g);
        let edges = v["edges"].as_array().unwrap();
        let total: usize = g.nodes.iter().map(|n| n.inputs.len()).sum();
        assert_eq!(edges.len(), total);
        assert_eq!(v["nodes"].as_array().unwrap().len(), g.nodes.len());
        assert_eq!(v["nodes"][0]["op"], "entity_load");
        let back: ExecGraph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
