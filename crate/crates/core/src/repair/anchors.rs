//! Named-place resolution against the loaded data and a gazetteer.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{rules, ActionKind, RepairAction, Rejection};
use crate::frame::{AnchorCandidate, SemanticFrame};
use crate::geo::Point;
use crate::schema::{GeometryKind, Role, SchemaRegistry};
use crate::store::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazetteerSource {
    DatasetLookup,
    ExternalGeocoder,
    FixtureFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub name: String,
    /// Entity whose references this entry can satisfy.
    pub entity: String,
    pub location: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    pub source: GazetteerSource,
}

/// A named polygon record (e.g. a town) usable as a scope or anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub name: String,
    pub entity: String,
    pub record_id: String,
    pub location: Point,
}

/// Name lookup for anchors and scopes. Point entries come from the named
/// point records of the dataset plus any extra place lists; boundaries are
/// the named polygon records.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    boundaries: Vec<Boundary>,
}

/// Case- and whitespace-insensitive comparison key for names.
pub fn name_key(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl Gazetteer {
    pub fn from_dataset(reg: &SchemaRegistry, ds: &Dataset) -> Self {
        let mut g = Gazetteer::default();
        for spec in reg.entities_sorted() {
            let Some(label) = &spec.label_field else { continue };
            for r in ds.records(&spec.name) {
                let Some(name) = r.text(label) else { continue };
                match spec.geometry {
                    GeometryKind::Point if spec.anchor_capable => g.entries.push(GazetteerEntry {
                        name: name.into(),
                        entity: spec.name.clone(),
                        location: r.geometry.anchor_point(),
                        record_id: Some(r.id.clone()),
                        source: GazetteerSource::DatasetLookup,
                    }),
                    GeometryKind::Polygon if spec.anchor_capable || spec.scope_capable => {
                        g.boundaries.push(Boundary {
                            name: name.into(),
                            entity: spec.name.clone(),
                            record_id: r.id.clone(),
                            location: r.geometry.anchor_point(),
                        })
                    }
                    _ => {}
                }
            }
        }
        g
    }

    pub fn with_entries(mut self, entries: impl IntoIterator<Item = GazetteerEntry>) -> Self {
        self.entries.extend(entries);
        self
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn boundaries(&self) -> &[Boundary] {
        &self.boundaries
    }

    fn matches(&self, entity: &str, name: &str, role: Role) -> Vec<AnchorCandidate> {
        let k = name_key(name);
        let bounds: Vec<AnchorCandidate> = self
            .boundaries
            .iter()
            .filter(|b| b.entity == entity && name_key(&b.name) == k)
            .map(|b| AnchorCandidate {
                name: b.name.clone(),
                location: b.location,
                record_id: Some(b.record_id.clone()),
            })
            .collect();
        // a scope needs the polygon itself
        if !bounds.is_empty() || role == Role::Scope {
            return bounds;
        }
        self.entries
            .iter()
            .filter(|e| e.entity == entity && name_key(&e.name) == k)
            .map(|e| AnchorCandidate {
                name: e.name.clone(),
                location: e.location,
                record_id: e.record_id.clone(),
            })
            .collect()
    }
}

/// Attaches a location to every unresolved reference, or the list of
/// candidates when the name is ambiguous. Only a change of spelling to the
/// gazetteer's canonical name is recorded as an action.
pub fn resolve_anchors(
    gaz: &Gazetteer,
    frame: &SemanticFrame,
) -> Result<(SemanticFrame, Vec<RepairAction>), Rejection> {
    let mut f = frame.clone();
    let mut actions = Vec::new();
    for (i, r) in f.references.iter_mut().enumerate() {
        if r.is_resolved() {
            continue;
        }
        let role = r.role.known().unwrap_or(Role::Anchor);
        let found = gaz.matches(&r.entity, &r.name, role);
        if found.is_empty() {
            return Err(Rejection::UnresolvableAnchor {
                path: format!("references[{i}]"),
                entity: r.entity.clone(),
                name: r.name.clone(),
            });
        }
        let spelling = &found[0].name;
        if found.iter().all(|c| &c.name == spelling) && *spelling != r.name {
            actions.push(RepairAction {
                kind: ActionKind::AnchorResolution,
                path: format!("references[{i}].name"),
                before: r.name.clone(),
                after: spelling.clone(),
                rule_id: rules::ANCHOR_NAME.into(),
            });
            r.name = spelling.clone();
        }
        if let [only] = found.as_slice() {
            r.resolved_location = Some(only.location);
            r.resolved_id = only.record_id.clone();
            r.candidates.clear();
        } else {
            r.candidates = found;
        }
    }
    Ok((f, actions))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PickError {
    #[error("reference {0} does not exist")]
    NoSuchReference(usize),
    #[error("reference {0} is not awaiting a choice")]
    NotAmbiguous(usize),
    #[error("pick {pick} out of range 1..={count}")]
    OutOfRange { pick: usize, count: usize },
}

/// Applies a user's choice (1-based) among the candidates of an ambiguous
/// reference.
pub fn pick_candidate(
    frame: &SemanticFrame,
    reference: usize,
    pick: usize,
) -> Result<SemanticFrame, PickError> {
    let mut f = frame.clone();
    let r = f
        .references
        .get_mut(reference)
        .ok_or(PickError::NoSuchReference(reference))?;
    if r.candidates.is_empty() {
        return Err(PickError::NotAmbiguous(reference));
    }
    let count = r.candidates.len();
    if pick == 0 || pick > count {
        return Err(PickError::OutOfRange { pick, count });
    }
    let c = r.candidates.remove(pick - 1);
    r.name = c.name;
    r.resolved_location = Some(c.location);
    r.resolved_id = c.record_id;
    r.candidates.clear();
    Ok(f)
}

/// Indices of references still waiting for a user choice.
pub fn ambiguous_references(frame: &SemanticFrame) -> Vec<usize> {
    frame
        .references
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_ambiguous())
        .map(|(i, _)| i)
        .collect()
}
