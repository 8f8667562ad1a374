//! HTTP client for an external generator service.
//!
//! ```text
//! POST /generate  {"input": str, "beam_size": int, "num_candidates": int}
//!              -> {"candidates": [{"text": str, "score": number}, ...]}
//! GET  /health -> {"status": "ok", "model": str}
//! ```

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Candidate, GenerationError, GenerationRequest, Generator};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateRequestBody {
    pub input: String,
    pub beam_size: usize,
    pub num_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireCandidate {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponseBody {
    pub candidates: Vec<WireCandidate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
}

pub struct RemoteGenerator {
    base_url: String,
    agent: ureq::Agent,
}

impl RemoteGenerator {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { base_url: base_url.trim_end_matches('/').to_owned(), agent }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url)
    }

    /// Sends the request and returns the status and raw body.
    fn exchange(
        &self,
        result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<(u16, String), GenerationError> {
        let mut response = result.map_err(transport_error)?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(transport_error)?;
        if status == 429 || status >= 500 {
            return Err(GenerationError::Retryable(format!("HTTP {status}: {}", excerpt(&body))));
        }
        if !(200..300).contains(&status) {
            return Err(GenerationError::protocol(format!("HTTP {status}"), &body));
        }
        Ok((status, body))
    }
}

fn excerpt(s: &str) -> String {
    s.chars().take(200).collect()
}

fn transport_error(e: ureq::Error) -> GenerationError {
    match e {
        ureq::Error::Timeout(_)
        | ureq::Error::Io(_)
        | ureq::Error::HostNotFound
        | ureq::Error::ConnectionFailed => GenerationError::Retryable(e.to_string()),
        other => GenerationError::protocol(other.to_string(), ""),
    }
}

impl Generator for RemoteGenerator {
    fn name(&self) -> String {
        format!("remote:{}", self.base_url)
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Vec<Candidate>, GenerationError> {
        let body = GenerateRequestBody {
            input: request.prompt.text.clone(),
            beam_size: request.beam_size,
            num_candidates: request.num_candidates,
        };
        let (_, text) = self.exchange(self.agent.post(&self.url("/generate")).send_json(&body))?;
        let parsed: GenerateResponseBody = serde_json::from_str(&text)
            .map_err(|e| GenerationError::protocol(format!("malformed /generate response: {e}"), &text))?;
        Ok(parsed.candidates.into_iter().map(|c| Candidate::new(c.text, c.score)).collect())
    }

    fn health(&self) -> Result<String, GenerationError> {
        let (_, text) = self.exchange(self.agent.get(&self.url("/health")).call())?;
        let parsed: HealthResponse = serde_json::from_str(&text)
            .map_err(|e| GenerationError::protocol(format!("malformed /health response: {e}"), &text))?;
        if parsed.status != "ok" {
            return Err(GenerationError::Retryable(format!("backend status {:?}", parsed.status)));
        }
        Ok(parsed.model)
    }
}
