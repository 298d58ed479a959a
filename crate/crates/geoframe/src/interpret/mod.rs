//! Question to raw frame.

mod prompt;
mod remote;
mod rules;

use std::time::Instant;

use geoframe_core::frame::SemanticFrame;
use serde::{Deserialize, Serialize};

pub use prompt::{build_system_prompt, SystemPrompt, EXAMPLE_FRAME, EXAMPLE_QUERY};
pub use remote::{extract_json, json_path, RemoteBackend, RemoteConfig};
pub use rules::rule_based_interpret;

pub mod env {
    pub use super::remote::{
        ENV_ENDPOINT, ENV_KEY_VAR, ENV_MAX_CONCURRENT, ENV_MODEL, ENV_RESPONSE_PATH, ENV_TEMPERATURE,
        ENV_TIMEOUT,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    RuleBased,
    RemoteLlm,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::RuleBased => "rule_based",
            BackendKind::RemoteLlm => "remote_llm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterpretError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("interpreter unavailable: {0}")]
    Unavailable(String),
    #[error("interpretation failed: {message}")]
    Failed { message: String, raw_text: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    pub frame: SemanticFrame,
    pub backend: BackendKind,
    /// Backend output verbatim: the frame JSON for the rule-based backend,
    /// every reply text for a remote one.
    pub raw_outputs: Vec<String>,
    pub latency_ms: f64,
}

#[derive(Debug)]
pub enum Interpreter {
    Rules,
    Remote(RemoteBackend),
}

impl Interpreter {
    pub fn kind(&self) -> BackendKind {
        match self {
            Interpreter::Rules => BackendKind::RuleBased,
            Interpreter::Remote(_) => BackendKind::RemoteLlm,
        }
    }

    pub fn interpret(&self, prompt: &SystemPrompt, query: &str) -> Result<Interpretation, InterpretError> {
        if query.trim().is_empty() {
            return Err(InterpretError::EmptyQuery);
        }
        let start = Instant::now();
        let (frame, raw_outputs) = match self {
            Interpreter::Rules => {
                let f = rule_based_interpret(query);
                let text = f.to_json();
                (f, vec![text])
            }
            Interpreter::Remote(b) => {
                let r = b.interpret(&prompt.text, query)?;
                (r.frame, r.texts)
            }
        };
        Ok(Interpretation {
            frame,
            backend: self.kind(),
            raw_outputs,
            latency_ms: start.elapsed().as_secs_f64() * 1000.0,
        })
    }
}
