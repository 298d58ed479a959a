use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{Attribution, ExecGraph, Node, NodeId, NodeKind, PseudoPoint, Selection};
use crate::frame::{canonicalize, SemanticFrame, SpatialConstraint};
use crate::schema::{EntitySpec, GeometryKind, Role, SchemaRegistry};

/// Tolerance of the snap inserted when a point support is ranked onto a
/// polyline primary without an explicit link.
pub const DEFAULT_SNAP_TOLERANCE_M: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions {
    pub snap_tolerance_m: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            snap_tolerance_m: DEFAULT_SNAP_TOLERANCE_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("frame is marked unsupported")]
    Unsupported,
    #[error("frame has not been validated: {0}")]
    NotValidated(String),
    #[error("reference {name:?} is not resolved")]
    UnresolvedReference { name: String },
    #[error("reference {name:?} is ambiguous; pick a candidate first")]
    AmbiguousReference { name: String },
    #[error("ranking needs a support role")]
    NoSupportRole,
    #[error("no spatial relation, snap or containment links {primary} to {support}")]
    NoSupportMeasure { primary: String, support: String },
}

struct Builder {
    nodes: Vec<Node>,
}

impl Builder {
    fn add(&mut self, kind: NodeKind, inputs: Vec<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32 + 1);
        self.nodes.push(Node { id, kind, inputs });
        id
    }
}

fn unvalidated(what: impl Into<String>) -> CompileError {
    CompileError::NotValidated(what.into())
}

fn selection(frame: &SemanticFrame, role: Role) -> Result<Selection, CompileError> {
    let refs: Vec<_> = frame
        .references
        .iter()
        .filter(|r| r.role.is(role))
        .collect();
    if refs.is_empty() {
        return Ok(Selection::All);
    }
    let mut ids = Vec::new();
    let mut points = Vec::new();
    for r in refs {
        if r.is_ambiguous() {
            return Err(CompileError::AmbiguousReference {
                name: r.name.clone(),
            });
        }
        match (&r.resolved_id, r.resolved_location) {
            (Some(id), _) => ids.push(id.clone()),
            (None, Some(location)) if role != Role::Scope => points.push(PseudoPoint {
                id: format!("anchor:{}", r.name),
                name: r.name.clone(),
                location,
            }),
            _ => {
                return Err(CompileError::UnresolvedReference {
                    name: r.name.clone(),
                })
            }
        }
    }
    Ok(Selection::Named { ids, points })
}

/// Order in which spatial constraints run: one that narrows role `r` goes
/// before any that reads `r`; otherwise canonical order.
fn schedule(cs: &[SpatialConstraint]) -> Vec<usize> {
    let mut pending: Vec<usize> = (0..cs.len()).collect();
    let mut out = Vec::with_capacity(cs.len());
    while !pending.is_empty() {
        let pick = pending
            .iter()
            .position(|&i| {
                let r = &cs[i].reference_role;
                !pending
                    .iter()
                    .any(|&j| j != i && cs[j].target_role == *r)
            })
            .unwrap_or(0);
        out.push(pending.remove(pick));
    }
    out
}

pub fn compile(frame: &SemanticFrame, reg: &SchemaRegistry) -> Result<ExecGraph, CompileError> {
    compile_with(frame, reg, CompileOptions::default())
}

pub fn compile_with(
    frame: &SemanticFrame,
    reg: &SchemaRegistry,
    opts: CompileOptions,
) -> Result<ExecGraph, CompileError> {
    if !frame.supported {
        return Err(CompileError::Unsupported);
    }
    let f = canonicalize(frame);
    let mut b = Builder { nodes: Vec::new() };
    let mut latest: BTreeMap<Role, NodeId> = BTreeMap::new();
    let mut specs: BTreeMap<Role, &EntitySpec> = BTreeMap::new();
    let mut order: Vec<Role> = Vec::new();

    for t in &f.targets {
        let role = t
            .role
            .known()
            .ok_or_else(|| unvalidated(format!("unknown role {:?}", t.role.as_str())))?;
        let spec = reg
            .entity(&t.entity)
            .ok_or_else(|| unvalidated(format!("unknown entity {:?}", t.entity)))?;
        if specs.insert(role, spec).is_some() {
            return Err(unvalidated(format!("role {role} bound twice")));
        }
        let mut id = b.add(
            NodeKind::EntityLoad {
                entity: spec.name.clone(),
                role,
                selection: selection(&f, role)?,
            },
            vec![],
        );
        for c in f.attribute_constraints.iter().filter(|c| c.target_role.is(role)) {
            let field = spec
                .field(&c.field)
                .ok_or_else(|| unvalidated(format!("unknown field {:?}", c.field)))?;
            let operator = c
                .operator
                .known()
                .ok_or_else(|| unvalidated(format!("unknown operator {:?}", c.operator.as_str())))?;
            id = b.add(
                NodeKind::AttributeFilter {
                    role,
                    field: field.name.clone(),
                    kind: field.kind,
                    operator,
                    value: c.value.clone(),
                },
                vec![id],
            );
        }
        latest.insert(role, id);
        order.push(role);
    }
    let role_of = |t: &crate::vocab::Token<Role>| -> Result<Role, CompileError> {
        let r = t
            .known()
            .ok_or_else(|| unvalidated(format!("unknown role {:?}", t.as_str())))?;
        if specs.contains_key(&r) {
            Ok(r)
        } else {
            Err(unvalidated(format!("role {r} has no target")))
        }
    };

    if let Some(&scope) = latest.get(&Role::Scope) {
        for &role in order.iter().filter(|r| **r != Role::Scope) {
            let id = b.add(
                NodeKind::ScopeConstraint {
                    role,
                    scope_role: Role::Scope,
                },
                vec![latest[&role], scope],
            );
            latest.insert(role, id);
        }
    }

    for i in schedule(&f.spatial_constraints) {
        let c = &f.spatial_constraints[i];
        let relation = c
            .relation
            .known()
            .ok_or_else(|| unvalidated(format!("unknown relation {:?}", c.relation.as_str())))?;
        let (t, r) = (role_of(&c.target_role)?, role_of(&c.reference_role)?);
        let id = b.add(
            NodeKind::SpatialMatch {
                relation,
                target_role: t,
                reference_role: r,
                distance_m: c.distance(),
                target_geometry: specs[&t].geometry,
                reference_geometry: specs[&r].geometry,
            },
            vec![latest[&t], latest[&r]],
        );
        latest.insert(t, id);
    }

    let mut snapped: Vec<(Role, Role)> = Vec::new();
    for l in &f.relations {
        let (from, to) = (role_of(&l.from_role)?, role_of(&l.to_role)?);
        let id = b.add(
            NodeKind::RelationSnap {
                from_role: from,
                to_role: to,
                tolerance_m: l.tolerance_m,
                implicit: false,
            },
            vec![latest[&from], latest[&to]],
        );
        latest.insert(from, id);
        snapped.push((from, to));
    }

    let mut rank = None;
    if let Some(spec) = &f.ranking {
        let primary = role_of(&spec.target_role)?;
        let metric = spec
            .metric
            .known()
            .ok_or_else(|| unvalidated(format!("unknown metric {:?}", spec.metric.as_str())))?;
        let order_by = spec
            .order
            .known()
            .ok_or_else(|| unvalidated(format!("unknown order {:?}", spec.order.as_str())))?;
        let support = Role::Support;
        if !specs.contains_key(&support) || primary == support {
            return Err(CompileError::NoSupportRole);
        }
        let (pg, sg) = (specs[&primary].geometry, specs[&support].geometry);
        let linking = f.spatial_constraints.iter().find(|c| {
            (c.target_role.is(primary) && c.reference_role.is(support))
                || (c.target_role.is(support) && c.reference_role.is(primary))
        });
        if pg == GeometryKind::Polyline
            && sg == GeometryKind::Point
            && linking.is_none()
            && !snapped.iter().any(|&(a, b)| (a, b) == (support, primary) || (a, b) == (primary, support))
        {
            let id = b.add(
                NodeKind::RelationSnap {
                    from_role: support,
                    to_role: primary,
                    tolerance_m: opts.snap_tolerance_m,
                    implicit: true,
                },
                vec![latest[&support], latest[&primary]],
            );
            latest.insert(support, id);
            snapped.push((support, primary));
        }
        let attribution = if snapped.contains(&(support, primary)) {
            Attribution::Snap
        } else if let Some(c) = linking {
            Attribution::Spatial {
                relation: c.relation.known().expect("checked above"),
                distance_m: c.distance(),
                support_is_target: c.target_role.is(support),
                primary_geometry: pg,
                support_geometry: sg,
            }
        } else if pg == GeometryKind::Polygon {
            Attribution::Containment
        } else {
            return Err(CompileError::NoSupportMeasure {
                primary: specs[&primary].name.clone(),
                support: specs[&support].name.clone(),
            });
        };
        let agg = b.add(
            NodeKind::Aggregate {
                metric,
                primary_role: primary,
                support_role: support,
                attribution,
            },
            vec![latest[&primary], latest[&support]],
        );
        rank = Some(b.add(
            NodeKind::Rank {
                metric,
                role: primary,
                order: order_by,
                top_n: spec.top_n,
                label_field: specs[&primary].label_field.clone(),
            },
            vec![agg],
        ));
    }

    let mut inputs: Vec<NodeId> = order.iter().map(|r| latest[r]).collect();
    inputs.extend(rank);
    let mat = b.add(NodeKind::RoleMaterialize, inputs);
    let mut outputs = vec![b.add(NodeKind::OutputMap, vec![mat])];
    if rank.is_some() {
        outputs.push(b.add(NodeKind::OutputTable, vec![mat]));
    }
    outputs.push(b.add(NodeKind::OutputSummary, vec![mat]));

    Ok(ExecGraph {
        nodes: b.nodes,
        outputs,
        frame: Some(f),
    })
}
