use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use serde::Serialize;

use super::{Attribution, ExecGraph, NodeId, NodeKind};
use crate::schema::Role;

/// Type of the value flowing along an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamType {
    Records { role: Role, snapped: bool },
    Counts { role: Role },
    Ranking { role: Role },
    Materialized { ranked: bool },
    Artifact,
}

impl fmt::Display for StreamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamType::Records { role, snapped: false } => write!(f, "records<{role}>"),
            StreamType::Records { role, snapped: true } => write!(f, "snapped<{role}>"),
            StreamType::Counts { role } => write!(f, "counts<{role}>"),
            StreamType::Ranking { role } => write!(f, "ranking<{role}>"),
            StreamType::Materialized { ranked: false } => f.write_str("materialized"),
            StreamType::Materialized { ranked: true } => f.write_str("materialized+ranking"),
            StreamType::Artifact => f.write_str("artifact"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "fault", rename_all = "snake_case")]
pub enum GraphFault {
    DuplicateId { node: NodeId },
    DanglingInput { node: NodeId, input: NodeId },
    Cycle { nodes: Vec<NodeId> },
    InvalidTerminal { node: NodeId, op: &'static str },
    UnknownOutput { node: NodeId },
    UnlistedOutput { node: NodeId },
    NoOutputs,
    Arity { node: NodeId, expected: String, found: usize },
    TypeMismatch { node: NodeId, input: usize, expected: String, found: String },
}

impl fmt::Display for GraphFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphFault::DuplicateId { node } => write!(f, "{node}: id used twice"),
            GraphFault::DanglingInput { node, input } => {
                write!(f, "{node}: input {input} does not exist")
            }
            GraphFault::Cycle { nodes } => {
                let ids: Vec<String> = nodes.iter().map(|n| format!("{n}")).collect();
                write!(f, "cycle through {}", ids.join(", "))
            }
            GraphFault::InvalidTerminal { node, op } => {
                write!(f, "{node}: {op} cannot be a terminal node")
            }
            GraphFault::UnknownOutput { node } => write!(f, "{node}: listed output does not exist"),
            GraphFault::UnlistedOutput { node } => {
                write!(f, "{node}: terminal node missing from the output list")
            }
            GraphFault::NoOutputs => f.write_str("graph has no outputs"),
            GraphFault::Arity {
                node,
                expected,
                found,
            } => write!(f, "{node}: expected {expected} input(s), found {found}"),
            GraphFault::TypeMismatch {
                node,
                input,
                expected,
                found,
            } => write!(f, "{node}: input {input} should be {expected}, found {found}"),
        }
    }
}

/// Why a node's inputs do not fit its kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignatureError {
    Arity { expected: String, found: usize },
    Type { input: usize, expected: String, found: String },
}

fn records(role: Role) -> String {
    format!("records<{role}>")
}

fn expect_records(
    inputs: &[StreamType],
    i: usize,
    role: Role,
    snapped: Option<bool>,
) -> Result<bool, SignatureError> {
    match inputs[i] {
        StreamType::Records { role: r, snapped: s } if r == role && snapped.is_none_or(|x| x == s) => {
            Ok(s)
        }
        other => Err(SignatureError::Type {
            input: i,
            expected: match snapped {
                Some(true) => format!("snapped<{role}>"),
                _ => records(role),
            },
            found: format!("{other}"),
        }),
    }
}

fn arity(inputs: &[StreamType], n: usize) -> Result<(), SignatureError> {
    if inputs.len() == n {
        Ok(())
    } else {
        Err(SignatureError::Arity {
            expected: format!("{n}"),
            found: inputs.len(),
        })
    }
}

/// Output type of a node given its input types, or why they do not fit.
pub fn output_type(kind: &NodeKind, inputs: &[StreamType]) -> Result<StreamType, SignatureError> {
    use StreamType as T;
    match kind {
        NodeKind::EntityLoad { role, .. } => {
            arity(inputs, 0)?;
            Ok(T::Records {
                role: *role,
                snapped: false,
            })
        }
        NodeKind::AttributeFilter { role, .. } => {
            arity(inputs, 1)?;
            let snapped = expect_records(inputs, 0, *role, None)?;
            Ok(T::Records { role: *role, snapped })
        }
        NodeKind::ScopeConstraint { role, scope_role } => {
            arity(inputs, 2)?;
            let snapped = expect_records(inputs, 0, *role, None)?;
            expect_records(inputs, 1, *scope_role, None)?;
            Ok(T::Records { role: *role, snapped })
        }
        NodeKind::SpatialMatch {
            target_role,
            reference_role,
            ..
        } => {
            arity(inputs, 2)?;
            let snapped = expect_records(inputs, 0, *target_role, None)?;
            expect_records(inputs, 1, *reference_role, None)?;
            Ok(T::Records {
                role: *target_role,
                snapped,
            })
        }
        NodeKind::RelationSnap {
            from_role, to_role, ..
        } => {
            arity(inputs, 2)?;
            expect_records(inputs, 0, *from_role, None)?;
            expect_records(inputs, 1, *to_role, None)?;
            Ok(T::Records {
                role: *from_role,
                snapped: true,
            })
        }
        NodeKind::Aggregate {
            primary_role,
            support_role,
            attribution,
            ..
        } => {
            arity(inputs, 2)?;
            expect_records(inputs, 0, *primary_role, None)?;
            let need_snap = matches!(attribution, Attribution::Snap);
            expect_records(inputs, 1, *support_role, need_snap.then_some(true))?;
            Ok(T::Counts {
                role: *primary_role,
            })
        }
        NodeKind::Rank { role, .. } => {
            arity(inputs, 1)?;
            match inputs[0] {
                T::Counts { role: r } if r == *role => Ok(T::Ranking { role: *role }),
                other => Err(SignatureError::Type {
                    input: 0,
                    expected: format!("counts<{role}>"),
                    found: format!("{other}"),
                }),
            }
        }
        NodeKind::RoleMaterialize => {
            if inputs.is_empty() {
                return Err(SignatureError::Arity {
                    expected: "1 or more".into(),
                    found: 0,
                });
            }
            let mut roles = BTreeSet::new();
            let mut ranked = false;
            for (i, t) in inputs.iter().enumerate() {
                let ok = match t {
                    T::Records { role, .. } => roles.insert(*role),
                    T::Ranking { .. } if !ranked => {
                        ranked = true;
                        true
                    }
                    _ => false,
                };
                if !ok {
                    return Err(SignatureError::Type {
                        input: i,
                        expected: "one record stream per role, at most one ranking".into(),
                        found: format!("{t}"),
                    });
                }
            }
            Ok(T::Materialized { ranked })
        }
        NodeKind::OutputMap | NodeKind::OutputSummary | NodeKind::OutputTable => {
            arity(inputs, 1)?;
            let need_rank = matches!(kind, NodeKind::OutputTable);
            match inputs[0] {
                T::Materialized { ranked } if ranked || !need_rank => Ok(T::Artifact),
                other => Err(SignatureError::Type {
                    input: 0,
                    expected: if need_rank {
                        "materialized+ranking".into()
                    } else {
                        "materialized".into()
                    },
                    found: format!("{other}"),
                }),
            }
        }
    }
}

/// Every structural fault in `g`; empty iff the graph is executable.
pub fn check_graph(g: &ExecGraph) -> Vec<GraphFault> {
    let mut faults = Vec::new();
    let mut index: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (i, n) in g.nodes.iter().enumerate() {
        if index.insert(n.id, i).is_some() {
            faults.push(GraphFault::DuplicateId { node: n.id });
        }
    }
    for n in &g.nodes {
        for &input in &n.inputs {
            if !index.contains_key(&input) {
                faults.push(GraphFault::DanglingInput { node: n.id, input });
            }
        }
    }

    // Kahn over the edges that exist.
    let mut indegree: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut consumers: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for n in &g.nodes {
        let valid: Vec<NodeId> = n.inputs.iter().copied().filter(|i| index.contains_key(i)).collect();
        *indegree.entry(n.id).or_default() += valid.len();
        for i in valid {
            consumers.entry(i).or_default().push(n.id);
        }
    }
    let order = kahn(&indegree, &consumers);
    let done: BTreeSet<NodeId> = order.iter().copied().collect();
    let mut stuck: BTreeSet<NodeId> = indegree.keys().copied().filter(|id| !done.contains(id)).collect();
    if !stuck.is_empty() {
        // peel off nodes that merely sit downstream of a cycle
        loop {
            let tail: Vec<NodeId> = stuck
                .iter()
                .copied()
                .filter(|id| {
                    !consumers
                        .get(id)
                        .is_some_and(|cs| cs.iter().any(|c| stuck.contains(c)))
                })
                .collect();
            if tail.is_empty() {
                break;
            }
            for id in tail {
                stuck.remove(&id);
            }
        }
        faults.push(GraphFault::Cycle {
            nodes: stuck.into_iter().collect(),
        });
    }

    // terminals
    if !g.nodes.is_empty() && g.outputs.is_empty() {
        faults.push(GraphFault::NoOutputs);
    }
    let listed: BTreeSet<NodeId> = g.outputs.iter().copied().collect();
    let mut flagged = BTreeSet::new();
    for &o in &g.outputs {
        match index.get(&o) {
            None => faults.push(GraphFault::UnknownOutput { node: o }),
            Some(&i) if !g.nodes[i].kind.is_output() => {
                if flagged.insert(o) {
                    faults.push(GraphFault::InvalidTerminal {
                        node: o,
                        op: g.nodes[i].kind.name(),
                    });
                }
            }
            Some(_) => {}
        }
    }
    for n in &g.nodes {
        let consumed = consumers.get(&n.id).is_some_and(|c| !c.is_empty());
        let bad = if n.kind.is_output() {
            consumed
        } else {
            !consumed
        };
        if bad && flagged.insert(n.id) {
            faults.push(GraphFault::InvalidTerminal {
                node: n.id,
                op: n.kind.name(),
            });
        } else if n.kind.is_output() && !consumed && !listed.contains(&n.id) {
            faults.push(GraphFault::UnlistedOutput { node: n.id });
        }
    }

    // edge types, in dependency order, skipping anything downstream of a
    // fault already reported
    let mut types: BTreeMap<NodeId, StreamType> = BTreeMap::new();
    for id in order {
        let n = &g.nodes[index[&id]];
        let ins: Option<Vec<StreamType>> = n.inputs.iter().map(|i| types.get(i).copied()).collect();
        let Some(ins) = ins else { continue };
        match output_type(&n.kind, &ins) {
            Ok(t) => {
                types.insert(id, t);
            }
            Err(SignatureError::Arity { expected, found }) => faults.push(GraphFault::Arity {
                node: id,
                expected,
                found,
            }),
            Err(SignatureError::Type {
                input,
                expected,
                found,
            }) => faults.push(GraphFault::TypeMismatch {
                node: id,
                input,
                expected,
                found,
            }),
        }
    }
    faults
}

fn kahn(
    indegree: &BTreeMap<NodeId, usize>,
    consumers: &BTreeMap<NodeId, Vec<NodeId>>,
) -> Vec<NodeId> {
    let mut deg = indegree.clone();
    let mut ready: BinaryHeap<Reverse<NodeId>> = deg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| Reverse(*id))
        .collect();
    let mut out = Vec::with_capacity(deg.len());
    while let Some(Reverse(id)) = ready.pop() {
        out.push(id);
        for c in consumers.get(&id).into_iter().flatten() {
            let d = deg.get_mut(c).expect("consumer is a node");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(*c));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopoError {
    #[error("graph has a cycle")]
    Cycle,
    #[error("{node} references missing input {input}")]
    Dangling { node: NodeId, input: NodeId },
}

/// Dependency order with ties broken by smallest node id.
pub fn topo_order(g: &ExecGraph) -> Result<Vec<NodeId>, TopoError> {
    let ids: BTreeSet<NodeId> = g.nodes.iter().map(|n| n.id).collect();
    let mut indegree: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut consumers: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for n in &g.nodes {
        indegree.entry(n.id).or_default();
        for &i in &n.inputs {
            if !ids.contains(&i) {
                return Err(TopoError::Dangling { node: n.id, input: i });
            }
            *indegree.entry(n.id).or_default() += 1;
            consumers.entry(i).or_default().push(n.id);
        }
    }
    let order = kahn(&indegree, &consumers);
    if order.len() == indegree.len() {
        Ok(order)
    } else {
        Err(TopoError::Cycle)
    }
}
