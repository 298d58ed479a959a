//! Registry files: TOML with one `[[entity]]` block per entity and
//! `[[entity.field]]` blocks for its fields. See `data/registry.toml`.

use std::path::Path;

use geoframe_core::schema::{SchemaError, SchemaRegistry};

/// The shipped registry document.
pub const DEFAULT_REGISTRY: &str = include_str!("../../../data/registry.toml");

#[derive(Debug, thiserror::Error)]
pub enum RegistryFileError {
    #[error("registry parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("registry schema conflict: {0}")]
    Conflict(#[from] SchemaError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// 1-based line and column of a byte offset.
pub(crate) fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn load_registry(document: &str) -> Result<SchemaRegistry, RegistryFileError> {
    let reg: SchemaRegistry = toml::from_str(document).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(document, s.start));
        RegistryFileError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    Ok(reg.checked()?)
}

pub fn load_registry_file(path: &Path) -> Result<SchemaRegistry, RegistryFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| RegistryFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_registry(&text)
}

pub fn default_registry() -> SchemaRegistry {
    load_registry(DEFAULT_REGISTRY).expect("shipped registry is valid")
}

pub fn save_registry(reg: &SchemaRegistry) -> String {
    toml::to_string(reg).expect("registry serializes")
}
