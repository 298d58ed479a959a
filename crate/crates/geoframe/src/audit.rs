//! Structured audit trail: one JSON line per query or staged request.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use geoframe_core::exec::NodeTrace;
use geoframe_core::frame::SemanticFrame;
use geoframe_core::repair::RepairAction;
use serde::Serialize;

use crate::interpret::BackendKind;
use crate::pipeline::{ErrorCode, QueryResponse, Stage};
use crate::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    /// Request kind: `query`, `interpret`, `repair` or `execute`.
    pub endpoint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendKind>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub raw_output_sha256: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_frame_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repaired_frame_sha256: Option<String>,
    pub repair_actions: Vec<RepairAction>,
    pub executed: bool,
    /// Node traces; present only when the executor ran.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<NodeTrace>,
    pub dataset_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_stage: Option<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_code: Option<ErrorCode>,
}

pub fn frame_hash(f: &SemanticFrame) -> String {
    sha256_hex(f.to_json().as_bytes())
}

impl AuditRecord {
    pub fn new(endpoint: &str, dataset_version: &str) -> Self {
        AuditRecord {
            endpoint: endpoint.into(),
            query_sha256: None,
            backend: None,
            raw_output_sha256: Vec::new(),
            raw_frame_sha256: None,
            repaired_frame_sha256: None,
            repair_actions: Vec::new(),
            executed: false,
            provenance: Vec::new(),
            dataset_version: dataset_version.into(),
            error_stage: None,
            error_code: None,
        }
    }

    pub fn from_response(endpoint: &str, r: &QueryResponse) -> Self {
        let mut a = AuditRecord::new(endpoint, &r.dataset_version);
        a.query_sha256 = r.query.as_deref().map(|q| sha256_hex(q.as_bytes()));
        a.backend = r.backend;
        a.raw_output_sha256 = r.raw_outputs.iter().map(|t| sha256_hex(t.as_bytes())).collect();
        a.raw_frame_sha256 = r.raw_frame.as_ref().map(frame_hash);
        a.repaired_frame_sha256 = r.repaired_frame.as_ref().map(frame_hash);
        a.repair_actions = r.repair_report.actions.clone();
        a.executed = r.result.is_some();
        a.provenance = r.provenance.clone();
        a.error_stage = r.error.as_ref().map(|e| e.stage);
        a.error_code = r.error.as_ref().map(|e| e.code);
        a
    }
}

#[derive(Debug, Default)]
pub enum AuditLog {
    #[default]
    Off,
    File(Mutex<File>),
    Memory(Mutex<Vec<String>>),
}

impl AuditLog {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuditLog::File(Mutex::new(f)))
    }

    pub fn memory() -> Self {
        AuditLog::Memory(Mutex::new(Vec::new()))
    }

    /// Appends one line. Write errors are reported on stderr and otherwise
    /// ignored so a full disk does not fail queries.
    pub fn record(&self, rec: &AuditRecord) {
        let line = serde_json::to_string(rec).expect("serializes");
        match self {
            AuditLog::Off => {}
            AuditLog::File(f) => {
                let mut f = f.lock().expect("audit lock");
                if let Err(e) = writeln!(f, "{line}") {
                    eprintln!("audit log write failed: {e}");
                }
            }
            AuditLog::Memory(v) => v.lock().expect("audit lock").push(line),
        }
    }

    /// Lines held by a memory log.
    pub fn lines(&self) -> Vec<String> {
        match self {
            AuditLog::Memory(v) => v.lock().expect("audit lock").clone(),
            _ => Vec::new(),
        }
    }
}
