//! Evaluation of a checked graph over a dataset.
//!
//! Nodes run in [`topo_order`]; each keeps its output until the run ends.
//! Record streams stay sorted by id so every result is reproducible.

mod ops;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::frame::SemanticFrame;
use crate::geo::Geometry;
use crate::graph::{check_graph, topo_order, Attribution, ExecGraph, GraphFault, NodeId, NodeKind, Selection};
use crate::schema::{Metric, Role};
use crate::store::{Dataset, EntityRecord};

pub use ops::{
    attribute_matches, eval_attribute_filter, eval_rank, eval_relation_snap, eval_scope,
    eval_spatial_match, relation_pairs, RankingRow,
};

/// Source of wall-clock readings for per-node timings.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Reports zero for every reading, keeping results byte-identical.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("graph failed its checks: {}", .0.iter().map(|f| format!("{f}")).collect::<Vec<_>>().join("; "))]
    InvalidGraph(Vec<GraphFault>),
    #[error("entity `{entity}` is not loaded")]
    MissingEntity { entity: String },
    #[error("record `{id}` of `{entity}` is not loaded")]
    MissingRecord { entity: String, id: String },
    #[error("{node}: {message}")]
    Type { node: NodeId, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeTrace {
    pub node: NodeId,
    pub op: &'static str,
    pub input_sizes: Vec<usize>,
    pub output_size: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingResult {
    pub metric: Metric,
    pub role: Role,
    pub top_n: u32,
    pub rows: Vec<RankingRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSet {
    /// Final records of each role, sorted by id. A ranked role holds only
    /// the records that made the ranking.
    pub role_records: BTreeMap<Role, Vec<EntityRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<RankingResult>,
    /// Primary id to the ids of the support records counted for it.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub attribution: BTreeMap<String, Vec<String>>,
    /// Snapped point id to line id.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub snap: BTreeMap<String, String>,
    pub provenance: Vec<NodeTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_echo: Option<SemanticFrame>,
    pub dataset_version: String,
    /// Output operations present in the graph, in graph order.
    pub outputs: Vec<&'static str>,
}

impl ResultSet {
    pub fn records(&self, role: Role) -> &[EntityRecord] {
        self.role_records.get(&role).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn ranking_rows(&self) -> Option<&[RankingRow]> {
        self.ranking.as_ref().map(|r| r.rows.as_slice())
    }

    pub fn total_records(&self) -> usize {
        self.role_records.values().map(Vec::len).sum()
    }

    /// Copy with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> ResultSet {
        let mut r = self.clone();
        for t in &mut r.provenance {
            t.elapsed_ms = 0.0;
        }
        r
    }
}

#[derive(Default)]
struct Stream<'a> {
    records: Vec<&'a EntityRecord>,
    snap: BTreeMap<String, String>,
}

enum Value<'a> {
    Records(Stream<'a>),
    Counts(BTreeMap<String, Vec<String>>),
    Ranking(Vec<RankingRow>),
    Done,
}

impl Value<'_> {
    fn size(&self) -> usize {
        match self {
            Value::Records(s) => s.records.len(),
            Value::Counts(c) => c.len(),
            Value::Ranking(r) => r.len(),
            Value::Done => 0,
        }
    }
}

pub fn execute(graph: &ExecGraph, data: &Dataset) -> Result<ResultSet, ExecError> {
    execute_with(graph, data, &NoClock)
}

pub fn execute_with(
    graph: &ExecGraph,
    data: &Dataset,
    clock: &dyn Clock,
) -> Result<ResultSet, ExecError> {
    let faults = check_graph(graph);
    if !faults.is_empty() {
        return Err(ExecError::InvalidGraph(faults));
    }
    let order = topo_order(graph).map_err(|_| ExecError::InvalidGraph(Vec::new()))?;

    // resolved places that are not dataset records
    let mut pseudo: BTreeMap<NodeId, Vec<EntityRecord>> = BTreeMap::new();
    for n in &graph.nodes {
        if let NodeKind::EntityLoad {
            entity,
            selection: Selection::Named { points, .. },
            ..
        } = &n.kind
        {
            let recs = points
                .iter()
                .map(|p| {
                    EntityRecord::new(&p.id, entity, Geometry::Point(p.location))
                        .with("name", p.name.as_str())
                })
                .collect();
            pseudo.insert(n.id, recs);
        }
    }

    let mut values: BTreeMap<NodeId, Value<'_>> = BTreeMap::new();
    let mut result = ResultSet {
        role_records: BTreeMap::new(),
        ranking: None,
        attribution: BTreeMap::new(),
        snap: BTreeMap::new(),
        provenance: Vec::new(),
        frame_echo: graph.frame.clone(),
        dataset_version: data.version().into(),
        outputs: Vec::new(),
    };

    for id in order {
        let node = graph.node(id).expect("ordered ids exist");
        let started = clock.now_ms();
        let input_sizes: Vec<usize> = node.inputs.iter().map(|i| values[i].size()).collect();
        let stream = |k: usize| match &values[&node.inputs[k]] {
            Value::Records(s) => s,
            _ => unreachable!("checked graph feeds records here"),
        };
        let type_err = |message: String| ExecError::Type { node: id, message };

        let out = match &node.kind {
            NodeKind::EntityLoad {
                entity, selection, ..
            } => {
                let coll = data.collection(entity).ok_or_else(|| ExecError::MissingEntity {
                    entity: entity.clone(),
                })?;
                let mut records: Vec<&EntityRecord> = match selection {
                    Selection::All => coll.records().iter().collect(),
                    Selection::Named { ids, .. } => {
                        let mut v = Vec::with_capacity(ids.len());
                        for rid in ids {
                            v.push(coll.get(rid).ok_or_else(|| ExecError::MissingRecord {
                                entity: entity.clone(),
                                id: rid.clone(),
                            })?);
                        }
                        v
                    }
                };
                records.extend(pseudo.get(&id).into_iter().flatten());
                records.sort_by(|a, b| a.id.cmp(&b.id));
                records.dedup_by(|a, b| a.id == b.id);
                Value::Records(Stream {
                    records,
                    snap: BTreeMap::new(),
                })
            }
            NodeKind::AttributeFilter {
                field,
                kind,
                operator,
                value,
                ..
            } => {
                let s = stream(0);
                let records =
                    eval_attribute_filter(field, *kind, *operator, value.as_ref(), &s.records)
                        .map_err(type_err)?;
                Value::Records(Stream {
                    records,
                    snap: s.snap.clone(),
                })
            }
            NodeKind::ScopeConstraint { .. } => {
                let s = stream(0);
                Value::Records(Stream {
                    records: eval_scope(&s.records, &stream(1).records),
                    snap: s.snap.clone(),
                })
            }
            NodeKind::SpatialMatch {
                relation,
                distance_m,
                target_geometry,
                reference_geometry,
                ..
            } => {
                let s = stream(0);
                let records = eval_spatial_match(
                    *relation,
                    *distance_m,
                    &s.records,
                    &stream(1).records,
                    *target_geometry,
                    *reference_geometry,
                )
                .map_err(type_err)?;
                Value::Records(Stream {
                    records,
                    snap: s.snap.clone(),
                })
            }
            NodeKind::RelationSnap { tolerance_m, .. } => {
                let points = &stream(0).records;
                let snap = eval_relation_snap(points, &stream(1).records, *tolerance_m);
                let records = points
                    .iter()
                    .copied()
                    .filter(|r| snap.contains_key(&r.id))
                    .collect();
                result.snap.extend(snap.iter().map(|(k, v)| (k.clone(), v.clone())));
                Value::Records(Stream { records, snap })
            }
            NodeKind::Aggregate { attribution, .. } => {
                let (primary, support) = (stream(0), stream(1));
                let mut credit: BTreeMap<String, Vec<String>> = primary
                    .records
                    .iter()
                    .map(|r| (r.id.clone(), Vec::new()))
                    .collect();
                let mut give = |p: &str, s: &str| {
                    if let Some(v) = credit.get_mut(p) {
                        v.push(s.into());
                    }
                };
                match attribution {
                    Attribution::Snap => {
                        for s in &support.records {
                            if let Some(line) = support.snap.get(&s.id) {
                                give(line, &s.id);
                            }
                        }
                    }
                    Attribution::Containment => {
                        let pairs = relation_pairs(
                            crate::schema::Relation::Contains,
                            None,
                            &primary.records,
                            &support.records,
                            crate::schema::GeometryKind::Polygon,
                            crate::schema::GeometryKind::Point,
                        )
                        .map_err(type_err)?;
                        for (p, s) in pairs {
                            give(&primary.records[p].id, &support.records[s].id);
                        }
                    }
                    Attribution::Spatial {
                        relation,
                        distance_m,
                        support_is_target,
                        primary_geometry,
                        support_geometry,
                    } => {
                        if *support_is_target {
                            let pairs = relation_pairs(
                                *relation,
                                *distance_m,
                                &support.records,
                                &primary.records,
                                *support_geometry,
                                *primary_geometry,
                            )
                            .map_err(type_err)?;
                            for (s, p) in pairs {
                                give(&primary.records[p].id, &support.records[s].id);
                            }
                        } else {
                            let pairs = relation_pairs(
                                *relation,
                                *distance_m,
                                &primary.records,
                                &support.records,
                                *primary_geometry,
                                *support_geometry,
                            )
                            .map_err(type_err)?;
                            for (p, s) in pairs {
                                give(&primary.records[p].id, &support.records[s].id);
                            }
                        }
                    }
                }
                for v in credit.values_mut() {
                    v.sort_unstable();
                    v.dedup();
                }
                Value::Counts(credit)
            }
            NodeKind::Rank {
                metric,
                role,
                order,
                top_n,
                label_field,
            } => {
                let agg_id = node.inputs[0];
                let Value::Counts(credit) = &values[&agg_id] else {
                    unreachable!("checked graph feeds counts to rank")
                };
                let primary_input = graph.node(agg_id).expect("exists").inputs[0];
                let Value::Records(primary) = &values[&primary_input] else {
                    unreachable!("checked graph feeds records to aggregate")
                };
                let counts: BTreeMap<String, u64> = credit
                    .iter()
                    .map(|(k, v)| (k.clone(), v.len() as u64))
                    .collect();
                let rows = eval_rank(*order, *top_n, &primary.records, &counts, label_field.as_deref());
                result.attribution = credit.clone();
                result.ranking = Some(RankingResult {
                    metric: *metric,
                    role: *role,
                    top_n: *top_n,
                    rows: rows.clone(),
                });
                Value::Ranking(rows)
            }
            NodeKind::RoleMaterialize => {
                // a ranked role keeps only its ranked rows
                let ranked: Option<(Role, Vec<&str>)> = result.ranking.as_ref().map(|r| {
                    (r.role, r.rows.iter().map(|row| row.id.as_str()).collect())
                });
                for input in &node.inputs {
                    if let Value::Records(s) = &values[input] {
                        let role = stream_role(graph, *input);
                        let keep = |r: &&&EntityRecord| match &ranked {
                            Some((rr, ids)) if *rr == role => ids.contains(&r.id.as_str()),
                            _ => true,
                        };
                        result
                            .role_records
                            .insert(role, s.records.iter().filter(keep).map(|r| (*r).clone()).collect());
                    }
                }
                Value::Done
            }
            k @ (NodeKind::OutputMap | NodeKind::OutputTable | NodeKind::OutputSummary) => {
                result.outputs.push(k.name());
                Value::Done
            }
        };
        result.provenance.push(NodeTrace {
            node: id,
            op: node.kind.name(),
            input_sizes,
            output_size: out.size(),
            elapsed_ms: (clock.now_ms() - started).max(0.0),
        });
        values.insert(id, out);
    }
    Ok(result)
}

/// Role carried by a record-producing node.
fn stream_role(graph: &ExecGraph, id: NodeId) -> Role {
    match &graph.node(id).expect("exists").kind {
        NodeKind::EntityLoad { role, .. }
        | NodeKind::AttributeFilter { role, .. }
        | NodeKind::ScopeConstraint { role, .. } => *role,
        NodeKind::SpatialMatch { target_role, .. } => *target_role,
        NodeKind::RelationSnap { from_role, .. } => *from_role,
        other => unreachable!("{} does not produce records", other.name()),
    }
}
