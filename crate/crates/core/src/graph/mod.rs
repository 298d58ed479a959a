//! Typed DAG of analytical operations compiled from a validated frame.
//!
//! Every node consumes role-tagged record streams and produces one output;
//! [`check_graph`] verifies references, acyclicity, terminals and edge types
//! before anything touches data.

mod check;
mod compile;
mod text;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::frame::{AttrValue, SemanticFrame};
use crate::geo::Point;
use crate::schema::{GeometryKind, Metric, Operator, Order, Relation, Role, ValueKind};

pub use check::{check_graph, output_type, topo_order, GraphFault, StreamType, TopoError};
pub use compile::{compile, compile_with, CompileError, CompileOptions, DEFAULT_SNAP_TOLERANCE_M};
pub use text::{graph_to_json, graph_to_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// A resolved place that is not a dataset record, loaded as a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoPoint {
    pub id: String,
    pub name: String,
    pub location: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "snake_case")]
pub enum Selection {
    All,
    Named {
        ids: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        points: Vec<PseudoPoint>,
    },
}

/// How support records are credited to primary records when counting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "snake_case")]
pub enum Attribution {
    Spatial {
        relation: Relation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distance_m: Option<f64>,
        /// Whether the support role is the constraint's target side.
        support_is_target: bool,
        primary_geometry: GeometryKind,
        support_geometry: GeometryKind,
    },
    Snap,
    Containment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum NodeKind {
    EntityLoad {
        entity: String,
        role: Role,
        selection: Selection,
    },
    AttributeFilter {
        role: Role,
        field: String,
        kind: ValueKind,
        operator: Operator,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<AttrValue>,
    },
    ScopeConstraint {
        role: Role,
        scope_role: Role,
    },
    SpatialMatch {
        relation: Relation,
        target_role: Role,
        reference_role: Role,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distance_m: Option<f64>,
        target_geometry: GeometryKind,
        reference_geometry: GeometryKind,
    },
    RelationSnap {
        from_role: Role,
        to_role: Role,
        tolerance_m: f64,
        implicit: bool,
    },
    Aggregate {
        metric: Metric,
        primary_role: Role,
        support_role: Role,
        attribution: Attribution,
    },
    Rank {
        metric: Metric,
        role: Role,
        order: Order,
        top_n: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label_field: Option<String>,
    },
    RoleMaterialize,
    OutputMap,
    OutputTable,
    OutputSummary,
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::EntityLoad { .. } => "entity_load",
            NodeKind::AttributeFilter { .. } => "attribute_filter",
            NodeKind::ScopeConstraint { .. } => "scope_constraint",
            NodeKind::SpatialMatch { .. } => "spatial_match",
            NodeKind::RelationSnap { .. } => "relation_snap",
            NodeKind::Aggregate { .. } => "aggregate",
            NodeKind::Rank { .. } => "rank",
            NodeKind::RoleMaterialize => "role_materialize",
            NodeKind::OutputMap => "output_map",
            NodeKind::OutputTable => "output_table",
            NodeKind::OutputSummary => "output_summary",
        }
    }

    pub fn is_output(&self) -> bool {
        matches!(
            self,
            NodeKind::OutputMap | NodeKind::OutputTable | NodeKind::OutputSummary
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    #[serde(flatten)]
    pub kind: NodeKind,
    pub inputs: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecGraph {
    pub nodes: Vec<Node>,
    pub outputs: Vec<NodeId>,
    /// The validated frame the graph was compiled from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<SemanticFrame>,
}

impl ExecGraph {
    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn count(&self, op: &str) -> usize {
        self.nodes.iter().filter(|n| n.kind.name() == op).count()
    }

    pub fn has_rank(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n.kind, NodeKind::Rank { .. }))
    }
}
