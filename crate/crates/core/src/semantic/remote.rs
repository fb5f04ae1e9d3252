//! Client for the fill-mask service.
//!
//! `POST {endpoint}/v1/fill` with a [`FillRequest`] body returns a
//! [`FillResponse`]: a ranked list of single-word candidates with unnormalized
//! log-probabilities. Requested candidates that the service did not return
//! are scored at `min(returned) - 10` (or `-10` when nothing came back) so
//! that strong physical evidence can still select them.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ContextToken, ScoreMap, SemanticError, SemanticModel};

/// Literal placed at masked positions in requests.
pub const MASK_TOKEN: &str = "<mask>";
/// Gap below the lowest returned score assigned to missing candidates.
pub const MISSING_FLOOR: f64 = 10.0;
/// Overrides the configured endpoint when set.
pub const ENDPOINT_ENV: &str = "CLSEC_LM_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRequest {
    pub tokens: Vec<String>,
    pub mask_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub byte_length: Option<usize>,
    pub top_k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillCandidate {
    pub word: String,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillResponse {
    pub candidates: Vec<FillCandidate>,
    #[serde(default)]
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8000`.
    pub endpoint: String,
    pub timeout: Duration,
    pub top_k: usize,
    /// Send the full candidate list for forced scoring instead of relying on
    /// the service's own top-k.
    pub forced: bool,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(10),
            top_k: 32,
            forced: false,
            max_in_flight: 4,
        }
    }

    /// Applies the [`ENDPOINT_ENV`] override, if set.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            if !endpoint.is_empty() {
                self.endpoint = endpoint;
            }
        }
        self
    }
}

/// Counting semaphore bounding concurrent requests.
struct Permits {
    free: Mutex<usize>,
    cond: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cond.wait(free).unwrap();
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cond.notify_one();
    }
}

pub struct RemoteModel {
    config: RemoteConfig,
    agent: ureq::Agent,
    permits: Permits,
}

impl RemoteModel {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        let permits = Permits {
            free: Mutex::new(config.max_in_flight.max(1)),
            cond: Condvar::new(),
        };
        Self {
            config,
            agent,
            permits,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn fill_url(&self) -> String {
        format!("{}/v1/fill", self.config.endpoint.trim_end_matches('/'))
    }

    /// One request, retried once on transport failure or a 5xx status.
    fn fill(&self, request: &FillRequest) -> Result<FillResponse, SemanticError> {
        let _permit = self.permits.acquire();
        let url = self.fill_url();
        let mut last_failure = String::new();
        for _attempt in 0..2 {
            match self.agent.post(&url).send_json(request) {
                Ok(resp) => {
                    return resp
                        .into_json::<FillResponse>()
                        .map_err(|e| SemanticError::Protocol(format!("bad response body: {e}")));
                }
                // No candidate satisfies the constraints: same as an empty list.
                Err(ureq::Error::Status(422, _)) => {
                    return Ok(FillResponse {
                        candidates: Vec::new(),
                        model_id: String::new(),
                    })
                }
                Err(ureq::Error::Status(code, resp)) if code >= 500 => {
                    last_failure = format!("{url} returned {code} {}", resp.status_text());
                }
                Err(ureq::Error::Status(code, resp)) => {
                    let body = resp.into_string().unwrap_or_default();
                    return Err(SemanticError::Protocol(format!(
                        "{url} rejected request with {code}: {body}"
                    )));
                }
                Err(ureq::Error::Transport(t)) => {
                    last_failure = format!("{url}: {t}");
                }
            }
        }
        Err(SemanticError::RemoteUnavailable(last_failure))
    }

    pub fn health(&self) -> Result<String, SemanticError> {
        let url = format!("{}/health", self.config.endpoint.trim_end_matches('/'));
        let resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| SemanticError::RemoteUnavailable(e.to_string()))?;
        resp.into_string()
            .map_err(|e| SemanticError::Protocol(e.to_string()))
    }
}

/// Merges a service response into scores for exactly `candidates`.
pub fn merge_response(
    response: &FillResponse,
    candidates: &[Vec<u8>],
) -> Result<ScoreMap, SemanticError> {
    if let Some(bad) = response.candidates.iter().find(|c| !c.log_prob.is_finite()) {
        return Err(SemanticError::Protocol(format!(
            "non-finite log_prob {} for {:?}",
            bad.log_prob, bad.word
        )));
    }
    let floor = response
        .candidates
        .iter()
        .map(|c| c.log_prob)
        .reduce(f64::min)
        .unwrap_or(0.0)
        - MISSING_FLOOR;
    let mut returned: HashMap<&[u8], f64> = HashMap::new();
    for c in &response.candidates {
        // Duplicate entries keep the best score.
        returned
            .entry(c.word.as_bytes())
            .and_modify(|s| *s = s.max(c.log_prob))
            .or_insert(c.log_prob);
    }
    Ok(candidates
        .iter()
        .map(|w| (w.clone(), returned.get(w.as_slice()).copied().unwrap_or(floor)))
        .collect())
}

pub fn build_request(
    context: &[ContextToken<'_>],
    mask_index: usize,
    candidates: &[Vec<u8>],
    byte_length: usize,
    config: &RemoteConfig,
) -> FillRequest {
    FillRequest {
        tokens: context
            .iter()
            .map(|t| match t {
                ContextToken::Mask => MASK_TOKEN.to_string(),
                ContextToken::Word(w) => String::from_utf8_lossy(w).into_owned(),
            })
            .collect(),
        mask_index,
        byte_length: Some(byte_length),
        top_k: if config.forced {
            candidates.len().max(1)
        } else {
            config.top_k
        },
        candidates: config.forced.then(|| {
            candidates
                .iter()
                .map(|w| String::from_utf8_lossy(w).into_owned())
                .collect()
        }),
    }
}

/// Scores `candidates` for one mask with a single fill request.
pub fn score_remote(
    model: &RemoteModel,
    context: &[ContextToken<'_>],
    mask_index: usize,
    candidates: &[Vec<u8>],
    byte_length: usize,
) -> Result<ScoreMap, SemanticError> {
    let request = build_request(context, mask_index, candidates, byte_length, &model.config);
    let response = model.fill(&request)?;
    merge_response(&response, candidates)
}

impl SemanticModel for RemoteModel {
    fn score(
        &self,
        context: &[ContextToken<'_>],
        mask_index: usize,
        candidates: &[Vec<u8>],
    ) -> Result<ScoreMap, SemanticError> {
        let byte_length = candidates.first().map_or(0, Vec::len);
        score_remote(self, context, mask_index, candidates, byte_length)
    }

    fn name(&self) -> String {
        "remote".into()
    }
}
