//! Embedded geospatial store: typed entity records with a static spatial
//! index per entity and a content-hash version tag.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geo::{Geometry, SpatialIndex};
use crate::schema::{check_kind, SchemaRegistry, Scalar, ValueIssue};

/// One feature of an entity dataset. `None` attribute values are nulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    pub entity: String,
    pub geometry: Geometry,
    #[serde(default)]
    pub attributes: BTreeMap<String, Option<Scalar>>,
}

impl EntityRecord {
    pub fn new(id: &str, entity: &str, geometry: Geometry) -> Self {
        EntityRecord {
            id: id.into(),
            entity: entity.into(),
            geometry,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with(mut self, field: &str, value: impl Into<Scalar>) -> Self {
        self.attributes.insert(field.into(), Some(value.into()));
        self
    }

    pub fn attr(&self, field: &str) -> Option<&Scalar> {
        self.attributes.get(field).and_then(Option::as_ref)
    }

    pub fn text(&self, field: &str) -> Option<&str> {
        self.attr(field).and_then(Scalar::as_text)
    }
}

/// Per-feature problem found while ingesting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureDiagnostic {
    pub feature: String,
    pub problem: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("entity `{0}` is not in the registry")]
    UnknownEntity(String),
    #[error("entity `{0}` was already ingested")]
    AlreadyLoaded(String),
    #[error("{} feature(s) of `{entity}` rejected; first: {}: {}", diagnostics.len(), diagnostics[0].feature, diagnostics[0].problem)]
    Rejected {
        entity: String,
        diagnostics: Vec<FeatureDiagnostic>,
    },
}

#[derive(Debug, Clone)]
pub struct Collection {
    records: Vec<EntityRecord>,
    index: SpatialIndex,
}

impl Collection {
    pub fn records(&self) -> &[EntityRecord] {
        &self.records
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn get(&self, id: &str) -> Option<&EntityRecord> {
        self.records
            .binary_search_by(|r| r.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.records[i])
    }

    /// Records whose geometry may lie within `radius_m` of `query`.
    pub fn candidates_within(&self, query: &Geometry, radius_m: f64) -> Vec<&EntityRecord> {
        self.index
            .candidates_within(query, radius_m)
            .into_iter()
            .map(|i| &self.records[i])
            .collect()
    }
}

/// Immutable set of entity collections.
#[derive(Debug, Clone)]
pub struct Dataset {
    collections: BTreeMap<String, Collection>,
    version: String,
}

impl Dataset {
    pub fn builder(registry: &SchemaRegistry) -> DatasetBuilder<'_> {
        DatasetBuilder {
            registry,
            pending: BTreeMap::new(),
        }
    }

    pub fn collection(&self, entity: &str) -> Option<&Collection> {
        self.collections.get(entity)
    }

    pub fn records(&self, entity: &str) -> &[EntityRecord] {
        self.collections
            .get(entity)
            .map(|c| c.records())
            .unwrap_or_default()
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.collections.keys().map(String::as_str)
    }

    /// `sha256:<hex>` over the canonical JSON of every record.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.collections.values().map(|c| c.records.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Collects validated collections; each `add` is all-or-nothing.
pub struct DatasetBuilder<'r> {
    registry: &'r SchemaRegistry,
    pending: BTreeMap<String, Vec<EntityRecord>>,
}

impl DatasetBuilder<'_> {
    /// Validates and stages one entity's records. Returns the record count.
    pub fn add(&mut self, entity: &str, records: Vec<EntityRecord>) -> Result<usize, IngestError> {
        let spec = self
            .registry
            .entity(entity)
            .ok_or_else(|| IngestError::UnknownEntity(entity.into()))?;
        if self.pending.contains_key(entity) {
            return Err(IngestError::AlreadyLoaded(entity.into()));
        }
        let mut diagnostics = Vec::new();
        let mut ids = BTreeSet::new();
        for r in &records {
            let mut problem = |p: String| {
                diagnostics.push(FeatureDiagnostic {
                    feature: r.id.clone(),
                    problem: p,
                })
            };
            if r.entity != spec.name {
                problem(format!("record tagged `{}`, expected `{}`", r.entity, spec.name));
            }
            if !ids.insert(r.id.as_str()) {
                problem("duplicate id".into());
            }
            if let Err(e) = r.geometry.validate() {
                problem(e.to_string());
            } else if r.geometry.kind() != spec.geometry {
                problem(format!(
                    "geometry kind {} does not match {} for {}",
                    r.geometry.kind(),
                    spec.geometry,
                    spec.name
                ));
            }
            for (name, value) in &r.attributes {
                let Some(field) = spec.field(name) else {
                    problem(format!("{name}: {}", ValueIssue::UnknownField));
                    continue;
                };
                let res = match value {
                    None if field.nullable => Ok(()),
                    None => Err(ValueIssue::NullNotAllowed),
                    Some(v) => check_kind(field, v),
                };
                if let Err(e) = res {
                    let shown = value.as_ref().map_or("null".to_string(), |v| v.to_string());
                    problem(format!("{name} = {shown:?}: {e}"));
                }
            }
            for field in spec.fields.iter().filter(|f| !f.nullable) {
                if !r.attributes.contains_key(&field.name) {
                    problem(format!("{}: missing non-nullable field", field.name));
                }
            }
        }
        if !diagnostics.is_empty() {
            return Err(IngestError::Rejected {
                entity: entity.into(),
                diagnostics,
            });
        }
        let n = records.len();
        self.pending.insert(entity.into(), records);
        Ok(n)
    }

    pub fn build(self) -> Dataset {
        let mut hasher = Sha256::new();
        let mut collections = BTreeMap::new();
        for (entity, mut records) in self.pending {
            records.sort_by(|a, b| a.id.cmp(&b.id));
            hasher.update(entity.as_bytes());
            hasher.update([0u8]);
            for r in &records {
                let json = serde_json::to_vec(r).expect("records serialize");
                hasher.update(&json);
                hasher.update(b"\n");
            }
            let index = SpatialIndex::build(records.iter().map(|r| &r.geometry));
            collections.insert(entity, Collection { records, index });
        }
        let mut version = String::from("sha256:");
        for byte in hasher.finalize() {
            let _ = write!(version, "{byte:02x}");
        }
        Dataset {
            collections,
            version,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Point;
    use crate::testkit;
    use alloc::vec;

    fn school(id: &str, lon: f64, name: &str) -> EntityRecord {
        EntityRecord::new(id, "School", Geometry::Point(Point::new(lon, 42.0))).with("name", name)
    }

    #[test]
    fn ingest_and_lookup() {
        let reg = testkit::registry();
        let mut b = Dataset::builder(&reg);
        let n = b
            .add("School", vec![school("s2", -71.0, "B"), school("s1", -71.1, "A")])
            .unwrap();
        assert_eq!(n, 2);
        let ds = b.build();
        assert_eq!(ds.records("School")[0].id, "s1");
        assert_eq!(ds.collection("School").unwrap().get("s2").unwrap().text("name"), Some("B"));
        assert!(ds.version().starts_with("sha256:"));
    }

    #[test]
    fn empty_collection_is_fine() {
        let reg = testkit::registry();
        let mut b = Dataset::builder(&reg);
        assert_eq!(b.add("Crash", vec![]).unwrap(), 0);
        assert!(b.build().is_empty());
    }

    #[test]
    fn non_canonical_value_rejected_with_feature_name() {
        let reg = testkit::registry();
        let mut b = Dataset::builder(&reg);
        let bad = EntityRecord::new("c-7", "Crash", Geometry::Point(Point::new(-71.0, 42.0)))
            .with("severity", "fatal");
        let err = b.add("Crash", vec![bad]).unwrap_err();
        match err {
            IngestError::Rejected { diagnostics, .. } => {
                assert_eq!(diagnostics[0].feature, "c-7");
                assert!(diagnostics[0].problem.contains("not a canonical value"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn geometry_kind_and_duplicates_rejected() {
        let reg = testkit::registry();
        let mut b = Dataset::builder(&reg);
        let line = EntityRecord::new(
            "s1",
            "School",
            Geometry::Polyline(vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0)]),
        );
        assert!(b.add("School", vec![line]).is_err());
        let err = b
            .add("School", vec![school("s1", 0.0, "A"), school("s1", 0.1, "B")])
            .unwrap_err();
        assert!(err.to_string().contains("duplicate id"));
        // all-or-nothing: nothing staged after a rejection
        assert!(b.build().records("School").is_empty());
    }

    #[test]
    fn version_tracks_content() {
        let reg = testkit::registry();
        let v = |name: &str| {
            let mut b = Dataset::builder(&reg);
            b.add("School", vec![school("s1", -71.0, name)]).unwrap();
            b.build().version().to_string()
        };
        assert_eq!(v("A"), v("A"));
        assert_ne!(v("A"), v("B"));
    }

    #[test]
    fn index_completeness() {
        let reg = testkit::registry();
        let mut b = Dataset::builder(&reg);
        let recs: Vec<_> = (0..50)
            .map(|i| school(&format!("s{i:02}"), -71.0 + i as f64 * 0.001, "x"))
            .collect();
        b.add("School", recs).unwrap();
        let ds = b.build();
        let col = ds.collection("School").unwrap();
        for r in col.records() {
            for d in [0.0, 10.0, 500.0] {
                assert!(col
                    .candidates_within(&r.geometry, d)
                    .iter()
                    .any(|c| c.id == r.id));
            }
        }
    }
}
