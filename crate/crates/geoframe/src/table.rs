//! Normalization table files: CSV with the columns
//! `rule_id,context,raw,canonical`. See `data/normalization.csv`.

use std::path::Path;

use geoframe_core::repair::{NormalizationRule, NormalizationTable, TableError};
use geoframe_core::schema::{Metric, Operator, Order, Relation, Role, SchemaRegistry};

pub const DEFAULT_TABLE: &str = include_str!("../../../data/normalization.csv");

const HEADER: [&str; 4] = ["rule_id", "context", "raw", "canonical"];

#[derive(Debug, thiserror::Error)]
pub enum TableFileError {
    #[error("normalization table line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("normalization table: {0}")]
    Conflict(#[from] TableError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub fn parse_rules(text: &str) -> Result<Vec<NormalizationRule>, TableFileError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| TableFileError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(TableFileError::Parse {
            line: 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }
    rdr.deserialize()
        .map(|row| {
            row.map_err(|e: csv::Error| TableFileError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_table(text: &str) -> Result<NormalizationTable, TableFileError> {
    Ok(NormalizationTable::new(parse_rules(text)?)?)
}

pub fn load_table_file(path: &Path) -> Result<NormalizationTable, TableFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| TableFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_table(&text)
}

pub fn default_table() -> NormalizationTable {
    load_table(DEFAULT_TABLE).expect("shipped table is valid")
}

pub fn save_table(table: &NormalizationTable) -> String {
    // the header comes from the rule's field names
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in table.rules() {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Rules whose canonical value the registry would not accept, as
/// `rule_id: reason` lines.
pub fn check_against(table: &NormalizationTable, reg: &SchemaRegistry) -> Vec<String> {
    let mut out = Vec::new();
    for r in table.rules() {
        let c = r.canonical.as_str();
        let ok = match r.context.as_str() {
            "distance" | "time" => true,
            "order" => Order::parse(c).is_some(),
            "relation" => Relation::parse(c).is_some(),
            "operator" => Operator::parse(c).is_some(),
            "role" => Role::parse(c).is_some(),
            "metric" => Metric::parse(c).is_some(),
            "entity" => reg.entity(c).is_some(),
            field => {
                let specs: Vec<_> = reg.entities.iter().filter_map(|e| e.field(field)).collect();
                !specs.is_empty()
                    && specs.iter().all(|f| match &f.values {
                        Some(vals) => vals.iter().any(|v| v == c),
                        None => true,
                    })
            }
        };
        if !ok {
            out.push(format!("{}: `{c}` is not valid for context `{}`", r.rule_id, r.context));
        }
    }
    out
}
