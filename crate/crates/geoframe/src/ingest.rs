//! Dataset files.
//!
//! A data directory holds one file per entity, named after the entity:
//! `Crash.geojson`, `School.csv`, ... GeoJSON files are feature
//! collections whose feature `id` (or `properties.id`) is the record id and
//! whose other properties are registry fields. CSV files are for point
//! entities and have the columns `id,lon,lat` followed by registry fields;
//! an empty cell is a null. An optional `places.json` lists extra gazetteer
//! entries. Ingestion is all-or-nothing per file.

use std::collections::BTreeMap;
use std::path::Path;

use geoframe_core::fixture::Fixture;
use geoframe_core::geo::{Geometry, Point};
use geoframe_core::repair::{Gazetteer, GazetteerEntry};
use geoframe_core::schema::{GeometryKind, Scalar, SchemaRegistry, ValueKind};
use geoframe_core::store::{Dataset, DatasetBuilder, EntityRecord, FeatureDiagnostic, IngestError};
use serde_json::{json, Map, Value};

pub const PLACES_FILE: &str = "places.json";

#[derive(Debug, thiserror::Error)]
pub enum IngestFileError {
    #[error("{file}: JSON error at line {line}, column {column}: {message}")]
    Json {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{file}: CSV error at line {line}: {message}")]
    Csv {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: {source}")]
    Rejected { file: String, source: IngestError },
    #[error("{file}: {message}")]
    Layout { file: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl IngestFileError {
    /// Per-feature diagnostics, when the file was rejected feature by
    /// feature.
    pub fn diagnostics(&self) -> &[FeatureDiagnostic] {
        match self {
            IngestFileError::Rejected {
                source: IngestError::Rejected { diagnostics, .. },
                ..
            } => diagnostics,
            _ => &[],
        }
    }
}

fn rejected(file: &str, entity: &str, diagnostics: Vec<FeatureDiagnostic>) -> IngestFileError {
    IngestFileError::Rejected {
        file: file.into(),
        source: IngestError::Rejected {
            entity: entity.into(),
            diagnostics,
        },
    }
}

fn json_scalar(v: &Value) -> Result<Option<Scalar>, String> {
    match v {
        Value::Null => Ok(None),
        Value::Bool(b) => Ok(Some(Scalar::Bool(*b))),
        Value::Number(n) => n.as_f64().map(|n| Some(Scalar::Number(n))).ok_or_else(|| "number out of range".into()),
        Value::String(s) => Ok(Some(Scalar::Text(s.clone()))),
        _ => Err("nested values are not supported".into()),
    }
}

/// Parses a feature collection into records of `entity`. Diagnostics cover
/// structural problems; registry conformance is checked by the builder.
pub fn parse_geojson(entity: &str, document: &str, file: &str) -> Result<Vec<EntityRecord>, IngestFileError> {
    let doc: Value = serde_json::from_str(document).map_err(|e| IngestFileError::Json {
        file: file.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let layout = |message: &str| IngestFileError::Layout {
        file: file.into(),
        message: message.into(),
    };
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(layout("expected a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| layout("missing `features` array"))?;

    let mut records = Vec::with_capacity(features.len());
    let mut diagnostics = Vec::new();
    for (i, feat) in features.iter().enumerate() {
        let mut props = feat.get("properties").and_then(Value::as_object).cloned().unwrap_or_default();
        let id = match feat.get("id").or_else(|| props.get("id")) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => {
                diagnostics.push(FeatureDiagnostic {
                    feature: format!("#{i}"),
                    problem: "feature has no id".into(),
                });
                continue;
            }
        };
        props.remove("id");
        let mut problem = |p: String| diagnostics.push(FeatureDiagnostic { feature: id.clone(), problem: p });
        let geometry = match feat.get("geometry").map(|g| serde_json::from_value::<Geometry>(g.clone())) {
            Some(Ok(g)) => g,
            Some(Err(e)) => {
                problem(format!("unsupported geometry: {e}"));
                continue;
            }
            None => {
                problem("feature has no geometry".into());
                continue;
            }
        };
        let mut rec = EntityRecord::new(&id, entity, geometry);
        for (k, v) in props {
            match json_scalar(&v) {
                Ok(s) => {
                    rec.attributes.insert(k, s);
                }
                Err(e) => problem(format!("{k}: {e}")),
            }
        }
        records.push(rec);
    }
    if !diagnostics.is_empty() {
        return Err(rejected(file, entity, diagnostics));
    }
    Ok(records)
}

/// Validates and stages one GeoJSON file. Returns the record count.
pub fn ingest_geojson(
    builder: &mut DatasetBuilder<'_>,
    entity: &str,
    document: &str,
) -> Result<usize, IngestFileError> {
    let file = format!("{entity}.geojson");
    let records = parse_geojson(entity, document, &file)?;
    builder
        .add(entity, records)
        .map_err(|source| IngestFileError::Rejected { file, source })
}

/// Parses a point CSV into records of `entity`.
pub fn parse_csv(
    reg: &SchemaRegistry,
    entity: &str,
    document: &str,
    file: &str,
) -> Result<Vec<EntityRecord>, IngestFileError> {
    let spec = reg.entity(entity).ok_or_else(|| IngestFileError::Rejected {
        file: file.into(),
        source: IngestError::UnknownEntity(entity.into()),
    })?;
    if spec.geometry != GeometryKind::Point {
        return Err(IngestFileError::Layout {
            file: file.into(),
            message: format!("CSV ingestion needs a point entity; {entity} is a {}", spec.geometry),
        });
    }
    let csv_err = |e: csv::Error| IngestFileError::Csv {
        file: file.into(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(document.as_bytes());
    let headers: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ic), Some(xc), Some(yc)) = (col("id"), col("lon"), col("lat")) else {
        return Err(IngestFileError::Layout {
            file: file.into(),
            message: "CSV needs `id`, `lon` and `lat` columns".into(),
        });
    };

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let id = row.get(ic).unwrap_or_default().to_string();
        let label = if id.is_empty() { format!("line {line}") } else { id.clone() };
        let coord = |c: usize| row.get(c).and_then(|s| s.parse::<f64>().ok());
        let (Some(lon), Some(lat)) = (coord(xc), coord(yc)) else {
            diagnostics.push(FeatureDiagnostic {
                feature: label,
                problem: "lon/lat must be numbers".into(),
            });
            continue;
        };
        if id.is_empty() {
            diagnostics.push(FeatureDiagnostic {
                feature: label,
                problem: "empty id".into(),
            });
            continue;
        }
        let mut rec = EntityRecord::new(&id, entity, Geometry::Point(Point::new(lon, lat)));
        for (i, name) in headers.iter().enumerate() {
            if i == ic || i == xc || i == yc {
                continue;
            }
            let cell = row.get(i).unwrap_or_default();
            let value = if cell.is_empty() {
                None
            } else {
                match spec.field(name).map(|f| f.kind) {
                    Some(ValueKind::Numeric | ValueKind::TimeOfDay) => match cell.parse::<f64>() {
                        Ok(n) => Some(Scalar::Number(n)),
                        Err(_) => {
                            diagnostics.push(FeatureDiagnostic {
                                feature: id.clone(),
                                problem: format!("{name} = {cell:?}: expected a number"),
                            });
                            continue;
                        }
                    },
                    _ => Some(Scalar::Text(cell.into())),
                }
            };
            rec.attributes.insert(name.clone(), value);
        }
        records.push(rec);
    }
    if !diagnostics.is_empty() {
        return Err(rejected(file, entity, diagnostics));
    }
    Ok(records)
}

pub fn ingest_csv(
    builder: &mut DatasetBuilder<'_>,
    reg: &SchemaRegistry,
    entity: &str,
    document: &str,
) -> Result<usize, IngestFileError> {
    let file = format!("{entity}.csv");
    let records = parse_csv(reg, entity, document, &file)?;
    builder
        .add(entity, records)
        .map_err(|source| IngestFileError::Rejected { file, source })
}

fn read(path: &Path) -> Result<String, IngestFileError> {
    std::fs::read_to_string(path).map_err(|source| IngestFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// A loaded data directory.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub places: Vec<GazetteerEntry>,
    /// Records per entity file that was found.
    pub counts: BTreeMap<String, usize>,
}

impl LoadedData {
    pub fn gazetteer(&self, reg: &SchemaRegistry) -> Gazetteer {
        Gazetteer::from_dataset(reg, &self.dataset).with_entries(self.places.clone())
    }
}

impl From<Fixture> for LoadedData {
    fn from(f: Fixture) -> Self {
        let counts = f
            .dataset
            .entities()
            .map(|e| (e.to_string(), f.dataset.records(e).len()))
            .collect();
        LoadedData {
            dataset: f.dataset,
            places: f.places,
            counts,
        }
    }
}

pub fn load_data_dir(dir: &Path, reg: &SchemaRegistry) -> Result<LoadedData, IngestFileError> {
    if !dir.is_dir() {
        return Err(IngestFileError::Io {
            path: dir.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let mut builder = Dataset::builder(reg);
    let mut counts = BTreeMap::new();
    for spec in reg.entities_sorted() {
        let gj = dir.join(format!("{}.geojson", spec.name));
        let cv = dir.join(format!("{}.csv", spec.name));
        let n = match (gj.is_file(), cv.is_file()) {
            (true, true) => {
                return Err(IngestFileError::Layout {
                    file: spec.name.clone(),
                    message: "both a .geojson and a .csv file exist".into(),
                })
            }
            (true, false) => ingest_geojson(&mut builder, &spec.name, &read(&gj)?)?,
            (false, true) => ingest_csv(&mut builder, reg, &spec.name, &read(&cv)?)?,
            (false, false) => continue,
        };
        counts.insert(spec.name.clone(), n);
    }
    let places_path = dir.join(PLACES_FILE);
    let places = if places_path.is_file() {
        let text = read(&places_path)?;
        serde_json::from_str(&text).map_err(|e| IngestFileError::Json {
            file: PLACES_FILE.into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?
    } else {
        Vec::new()
    };
    Ok(LoadedData {
        dataset: builder.build(),
        places,
        counts,
    })
}

/// One feature per record, properties in field order of the map.
pub fn record_feature(r: &EntityRecord, extra: Map<String, Value>) -> Value {
    let mut props: Map<String, Value> = r
        .attributes
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::to_value(v).expect("scalar serializes")))
        .collect();
    props.extend(extra);
    json!({
        "type": "Feature",
        "id": r.id,
        "geometry": r.geometry,
        "properties": props,
    })
}

pub fn records_to_geojson(records: &[EntityRecord]) -> String {
    let features: Vec<Value> = records.iter().map(|r| record_feature(r, Map::new())).collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    serde_json::to_string_pretty(&doc).expect("serializes") + "\n"
}

/// Writes every loaded entity as `<Entity>.geojson` plus `places.json`.
pub fn write_data_dir(dir: &Path, dataset: &Dataset, places: &[GazetteerEntry]) -> Result<(), IngestFileError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| IngestFileError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for entity in dataset.entities() {
        let path = dir.join(format!("{entity}.geojson"));
        std::fs::write(&path, records_to_geojson(dataset.records(entity))).map_err(io(&path))?;
    }
    let path = dir.join(PLACES_FILE);
    let text = serde_json::to_string_pretty(places).expect("serializes") + "\n";
    std::fs::write(&path, text).map_err(io(&path))?;
    Ok(())
}
