//! Generator contract and backends.
//!
//! A backend implements [`Generator`]; [`generate`] wraps it and repairs or
//! rejects contract violations so downstream scoring can assume a sorted,
//! deduplicated candidate list. Backends are selected by name through
//! [`generator_registry`]: `oracle:context_extraction`, `oracle:answer_table`
//! and `remote:<base url>`.

mod oracle;
mod remote;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{nfc, MultilingualLexicon};
use crate::reformulation::PromptSequence;
use crate::registry::Registry;

pub use oracle::{OracleGenerator, OracleMode, NO_ANSWER};
pub use remote::{GenerateRequestBody, GenerateResponseBody, HealthResponse, RemoteGenerator, WireCandidate};

pub const DEFAULT_BEAM_SIZE: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    /// Timeouts, refused connections, 5xx: worth retrying.
    #[error("backend unavailable: {0}")]
    Retryable(String),
    #[error("protocol error: {reason} (payload: {excerpt:?})")]
    Protocol { reason: String, excerpt: String },
}

impl GenerationError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Retryable(_))
    }

    pub(crate) fn protocol(reason: impl Into<String>, payload: &str) -> Self {
        Self::Protocol { reason: reason.into(), excerpt: payload.chars().take(200).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: PromptSequence,
    pub beam_size: usize,
    pub num_candidates: usize,
    /// Identifies the dataset item for in-process oracles; never sent over
    /// the wire.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_key: Option<String>,
}

impl GenerationRequest {
    pub fn new(prompt: PromptSequence, beam_size: usize, num_candidates: usize) -> Result<Self, GenerationError> {
        if beam_size == 0 || num_candidates == 0 {
            return Err(GenerationError::InvalidRequest("beam size and candidate count must be positive".into()));
        }
        if num_candidates > beam_size {
            return Err(GenerationError::InvalidRequest(format!(
                "{num_candidates} candidates requested from a beam of {beam_size}"
            )));
        }
        Ok(Self { prompt, beam_size, num_candidates, item_key: None })
    }

    pub fn with_key(mut self, key: impl Into<String>) -> Self {
        self.item_key = Some(key.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub score: f64,
}

impl Candidate {
    pub fn new(text: impl Into<String>, score: f64) -> Self {
        Self { text: text.into(), score }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub candidates: Vec<Candidate>,
    pub beam_size: usize,
    pub num_candidates: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl CandidateList {
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.text.as_str())
    }
}

pub trait Generator: Send + Sync {
    fn name(&self) -> String;
    /// Raw ranked candidates; may violate ordering or uniqueness.
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<Candidate>, GenerationError>;
    /// Model identifier reported by the backend.
    fn health(&self) -> Result<String, GenerationError> {
        Ok(self.name())
    }
}

/// Drops later duplicates (NFC equality) and keeps the first `n`.
pub fn dedup_topn(candidates: &[Candidate], n: usize) -> Vec<Candidate> {
    let mut seen = HashSet::new();
    candidates
        .iter()
        .filter(|c| seen.insert(nfc(&c.text)))
        .take(n)
        .cloned()
        .collect()
}

/// Calls the backend and enforces the candidate-list contract: nonempty,
/// finite scores, descending order (repaired by a stable sort), no
/// duplicates, at most `num_candidates` entries.
pub fn generate(backend: &dyn Generator, request: &GenerationRequest) -> Result<CandidateList, GenerationError> {
    let raw = backend.generate(request)?;
    if raw.is_empty() {
        return Err(GenerationError::protocol("backend returned no candidates", "[]"));
    }
    if let Some(bad) = raw.iter().find(|c| !c.score.is_finite()) {
        return Err(GenerationError::protocol("non-finite candidate score", &bad.text));
    }
    let mut warnings = Vec::new();
    let mut sorted = raw;
    if sorted.windows(2).any(|w| w[0].score < w[1].score) {
        sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
        let msg = format!("{}: candidates were not sorted by score; re-sorted", backend.name());
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(CandidateList {
        candidates: dedup_topn(&sorted, request.num_candidates),
        beam_size: request.beam_size,
        num_candidates: request.num_candidates,
        warnings,
    })
}

/// [`generate`] with up to `max_retries` further attempts on retryable errors.
pub fn generate_with_retries(
    backend: &dyn Generator,
    request: &GenerationRequest,
    max_retries: usize,
    backoff: Duration,
) -> Result<CandidateList, GenerationError> {
    let mut attempt = 0;
    loop {
        match generate(backend, request) {
            Err(e) if e.is_retryable() && attempt < max_retries => {
                attempt += 1;
                log::debug!("retrying after {e} (attempt {attempt})");
                std::thread::sleep(backoff * attempt as u32);
            }
            other => return other,
        }
    }
}

/// Inputs shared by generator factories.
#[derive(Clone, Default)]
pub struct GeneratorResources {
    pub lexicon: Arc<MultilingualLexicon>,
    /// item key → gold answer, for the answer-table oracle.
    pub answers: Arc<HashMap<String, String>>,
    pub timeout: Option<Duration>,
}

pub fn generator_registry() -> Registry<GeneratorResources, dyn Generator> {
    let mut reg: Registry<GeneratorResources, dyn Generator> = Registry::new("generator");
    reg.register("oracle", |res, arg| {
        let mode: OracleMode = arg.parse()?;
        Ok(Box::new(match mode {
            OracleMode::ContextExtraction => OracleGenerator::context_extraction(&res.lexicon),
            OracleMode::AnswerTable => OracleGenerator::answer_table(Arc::clone(&res.answers)),
        }))
    })
    .expect("unique");
    reg.register("remote", |res, arg| {
        if arg.is_empty() {
            return Err("remote generator needs a base url, e.g. remote:http://127.0.0.1:8080".into());
        }
        Ok(Box::new(RemoteGenerator::new(arg, res.timeout.unwrap_or(Duration::from_secs(60)))))
    })
    .expect("unique");
    reg
}
