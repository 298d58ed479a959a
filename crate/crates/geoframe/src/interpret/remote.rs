//! Chat-completion style HTTP backend.
//!
//! One POST per interpretation carrying the system prompt and the question;
//! the reply text is found in the response JSON by a dotted path such as
//! `choices.0.message.content`. If the text is not a frame, the backend
//! asks once more with the parse error attached and then gives up.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use geoframe_core::frame::{parse_frame, SemanticFrame};
use serde_json::{json, Value};

use super::InterpretError;

pub const ENV_ENDPOINT: &str = "GEOFRAME_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "GEOFRAME_LLM_MODEL";
pub const ENV_KEY_VAR: &str = "GEOFRAME_LLM_KEY_VAR";
pub const ENV_TIMEOUT: &str = "GEOFRAME_LLM_TIMEOUT_S";
pub const ENV_TEMPERATURE: &str = "GEOFRAME_LLM_TEMPERATURE";
pub const ENV_RESPONSE_PATH: &str = "GEOFRAME_LLM_RESPONSE_PATH";
pub const ENV_MAX_CONCURRENT: &str = "GEOFRAME_LLM_MAX_CONCURRENT";

pub const DEFAULT_RESPONSE_PATH: &str = "choices.0.message.content";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_var: Option<String>,
    pub timeout: Duration,
    pub temperature: f64,
    pub response_path: String,
    pub max_concurrent: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: &str, model: &str) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_var: None,
            timeout: Duration::from_secs(60),
            temperature: 0.0,
            response_path: DEFAULT_RESPONSE_PATH.into(),
            max_concurrent: 4,
        }
    }

    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let endpoint = get(ENV_ENDPOINT).ok_or_else(|| format!("{ENV_ENDPOINT} is not set"))?;
        let model = get(ENV_MODEL).ok_or_else(|| format!("{ENV_MODEL} is not set"))?;
        let mut c = RemoteConfig::new(&endpoint, &model);
        c.api_key_var = get(ENV_KEY_VAR);
        fn num<T: std::str::FromStr>(name: &str, v: Option<String>) -> Result<Option<T>, String> {
            v.map(|s| s.trim().parse::<T>().map_err(|_| format!("{name}: cannot parse {s:?}")))
                .transpose()
        }
        if let Some(t) = num::<f64>(ENV_TIMEOUT, get(ENV_TIMEOUT))? {
            if !(t.is_finite() && t > 0.0) {
                return Err(format!("{ENV_TIMEOUT} must be positive"));
            }
            c.timeout = Duration::from_secs_f64(t);
        }
        if let Some(t) = num(ENV_TEMPERATURE, get(ENV_TEMPERATURE))? {
            c.temperature = t;
        }
        if let Some(p) = get(ENV_RESPONSE_PATH) {
            c.response_path = p;
        }
        if let Some(n) = num::<usize>(ENV_MAX_CONCURRENT, get(ENV_MAX_CONCURRENT))? {
            c.max_concurrent = n.max(1);
        }
        Ok(c)
    }
}

/// Counting semaphore bounding outstanding requests.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("limiter lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("limiter lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("limiter lock") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug)]
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    limiter: Limiter,
}

/// Outcome of a remote interpretation: the frame plus every reply text
/// received, in order.
pub(crate) struct RemoteReply {
    pub frame: SemanticFrame,
    pub texts: Vec<String>,
}

/// Value at a dotted path; numeric segments index arrays.
pub fn json_path<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(v, |cur, seg| match cur {
        Value::Array(items) => items.get(seg.parse::<usize>().ok()?),
        Value::Object(map) => map.get(seg),
        _ => None,
    })
}

/// The JSON object inside a reply, tolerating code fences and prose around
/// it.
pub fn extract_json(text: &str) -> &str {
    match (text.find('{'), text.rfind('}')) {
        (Some(a), Some(b)) if a < b => &text[a..=b],
        _ => text.trim(),
    }
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = Limiter::new(config.max_concurrent);
        RemoteBackend {
            config,
            agent,
            limiter,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn complete(&self, messages: &[Value]) -> Result<String, InterpretError> {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": messages,
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(var) = &self.config.api_key_var {
            let key = std::env::var(var)
                .map_err(|_| InterpretError::Unavailable(format!("API key variable {var} is not set")))?;
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let _permit = self.limiter.acquire();
        let mut resp = req
            .send_json(&body)
            .map_err(|e| InterpretError::Unavailable(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| InterpretError::Unavailable(e.to_string()))?;
        if !status.is_success() {
            return Err(InterpretError::Unavailable(format!("endpoint returned HTTP {status}")));
        }
        let doc: Value = serde_json::from_str(&text).map_err(|e| InterpretError::Failed {
            message: format!("response is not JSON: {e}"),
            raw_text: text.clone(),
        })?;
        match json_path(&doc, &self.config.response_path) {
            Some(Value::String(s)) => Ok(s.clone()),
            _ => Err(InterpretError::Failed {
                message: format!("no text at response path {}", self.config.response_path),
                raw_text: text,
            }),
        }
    }

    pub(crate) fn interpret(&self, prompt: &str, query: &str) -> Result<RemoteReply, InterpretError> {
        let mut messages = vec![
            json!({"role": "system", "content": prompt}),
            json!({"role": "user", "content": query}),
        ];
        let first = self.complete(&messages)?;
        let err = match parse_frame(extract_json(&first)) {
            Ok(frame) => {
                return Ok(RemoteReply {
                    frame,
                    texts: vec![first],
                })
            }
            Err(e) => e,
        };
        messages.push(json!({"role": "assistant", "content": first}));
        messages.push(json!({
            "role": "user",
            "content": format!("That reply is not a valid frame ({err}). Reply with the JSON frame only."),
        }));
        let second = self.complete(&messages)?;
        match parse_frame(extract_json(&second)) {
            Ok(frame) => Ok(RemoteReply {
                frame,
                texts: vec![first, second],
            }),
            Err(e) => Err(InterpretError::Failed {
                message: format!("reply is not a frame after one re-ask: {e}"),
                raw_text: second,
            }),
        }
    }
}
