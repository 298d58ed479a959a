//! File formats, interpreters, renderers, the evaluation harness, the HTTP
//! service and the CLI around `geoframe-core`.

// Pipeline errors carry candidates and violations for the caller; they are
// returned once per request, not in hot loops.
#![allow(clippy::result_large_err)]

pub mod audit;
pub mod ingest;
pub mod harness;
pub mod interpret;
pub mod outputs;
pub mod pipeline;
pub mod registry;
pub mod service;
pub mod table;

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
