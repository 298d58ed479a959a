//! System prompt rendered from the registry.

use std::fmt::Write;

use geoframe_core::schema::{Order, RelationKind, SchemaRegistry};
use geoframe_core::{Operator, Relation, Role};

/// Question and validated frame used as the few-shot example.
pub const EXAMPLE_QUERY: &str = "top 5 schools by pedestrian crashes within 500m in Boston";
pub const EXAMPLE_FRAME: &str = r#"{
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

const SHAPE: &str = r#"{
  "supported": true | false,
  "targets": [{"entity": ENTITY, "role": ROLE}],
  "references": [{"entity": ENTITY, "role": "anchor" | "scope", "name": TEXT}],
  "spatial_constraints": [{"relation": RELATION, "target_role": ROLE,
                           "reference_role": ROLE, "distance_m": NUMBER}],
  "attribute_constraints": [{"target_role": ROLE, "field": FIELD,
                             "operator": OPERATOR, "value": VALUE}],
  "relations": [{"kind": "snap_to_road", "from_role": ROLE, "to_role": ROLE,
                 "tolerance_m": NUMBER}],
  "ranking": {"metric": METRIC, "target_role": "primary",
              "order": "highest" | "lowest", "top_n": INTEGER} | null
}"#;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemPrompt {
    pub text: String,
}

impl SystemPrompt {
    /// Hex SHA-256 of the text, for the audit log.
    pub fn hash(&self) -> String {
        crate::sha256_hex(self.text.as_bytes())
    }
}

fn join<T: Copy>(items: &[T], f: impl Fn(T) -> &'static str) -> String {
    items.iter().map(|&i| f(i)).collect::<Vec<_>>().join(", ")
}

pub fn build_system_prompt(reg: &SchemaRegistry) -> SystemPrompt {
    let mut t = String::new();
    t.push_str(
        "You translate questions about transportation safety data into a semantic frame.\n\
         Reply with exactly one JSON object and no other text.\n\n",
    );

    let _ = writeln!(t, "## Entities (registry {})", reg.version);
    let entities = reg.entities_sorted();
    if entities.is_empty() {
        t.push_str("(none)\n");
    }
    for e in &entities {
        let mut caps = Vec::new();
        if e.scope_capable {
            caps.push("scope");
        }
        if e.anchor_capable {
            caps.push("anchor");
        }
        let caps = if caps.is_empty() {
            String::new()
        } else {
            format!("; can be {}", caps.join(" or "))
        };
        let _ = writeln!(t, "- {} ({} geometry{caps})", e.name, e.geometry);
        let mut fields: Vec<_> = e.fields.iter().collect();
        fields.sort_by(|a, b| a.name.cmp(&b.name));
        for f in fields {
            let unit = f.unit.as_deref().map(|u| format!(", {u}")).unwrap_or_default();
            let _ = write!(t, "  - {} ({}{unit})", f.name, f.kind);
            if let Some(values) = &f.values {
                let quoted: Vec<String> = values.iter().map(|v| format!("\"{v}\"")).collect();
                let _ = write!(t, ": {}", quoted.join(", "));
            }
            t.push('\n');
        }
    }

    t.push_str("\n## Vocabulary\n");
    let _ = writeln!(t, "- roles: {}", join(Role::ALL, Role::as_str));
    let _ = writeln!(t, "- relations: {}", join(Relation::ALL, Relation::as_str));
    let _ = writeln!(t, "- operators: {}", join(Operator::ALL, Operator::as_str));
    let metrics: Vec<&str> = reg.ranking_metrics.iter().map(|m| m.as_str()).collect();
    let _ = writeln!(t, "- ranking metrics: {}", metrics.join(", "));
    let _ = writeln!(t, "- ranking orders: {}", join(Order::ALL, Order::as_str));
    let _ = writeln!(t, "- relation kinds: {}", join(RelationKind::ALL, RelationKind::as_str));

    t.push_str("\n## Frame shape\n");
    t.push_str(SHAPE);
    t.push_str(
        "\n\n## Conventions\n\
         - Exactly one target has role primary: the entity shown or ranked.\n\
         - support is the counted entity in a ranking, or the second entity of a proximity question.\n\
         - scope is a town boundary named in a reference; anchor is a named place.\n\
         - filter narrows the support of a ranking through a spatial constraint.\n\
         - Distances are meters; times of day are minutes since midnight; dates are YYYY-MM-DD.\n\
         - Categorical values must be copied exactly from the lists above.\n\
         - A question outside this domain is {\"supported\": false}.\n",
    );

    t.push_str("\n## Example\n");
    let _ = writeln!(t, "Question: {EXAMPLE_QUERY}");
    t.push_str("Frame:\n");
    t.push_str(EXAMPLE_FRAME);
    t.push('\n');
    SystemPrompt { text: t }
}
