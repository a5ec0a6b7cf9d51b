//! Prompt templates, generation backends and response parsing.

mod http;
mod mock;
mod parse;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpBackendConfig, WireFlavor};
pub use mock::MockBackend;
pub use parse::{normalize_question, parse_questions, ParseError, ParsedQuestions};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptId {
    A,
    B,
    C,
    D,
}

impl PromptId {
    pub const ALL: [PromptId; 4] = [PromptId::A, PromptId::B, PromptId::C, PromptId::D];

    pub fn as_str(&self) -> &'static str {
        match self {
            PromptId::A => "A",
            PromptId::B => "B",
            PromptId::C => "C",
            PromptId::D => "D",
        }
    }

    pub fn template(&self) -> PromptTemplate {
        PromptTemplate::new(self.clone())
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(PromptId::A),
            "B" | "b" => Ok(PromptId::B),
            "C" | "c" => Ok(PromptId::C),
            "D" | "d" => Ok(PromptId::D),
            other => Err(format!(
                "unknown prompt id {other:?} (expected A, B, C or D)"
            )),
        }
    }
}

/// The four question-generation instructions, verbatim.
pub const INSTRUCTION_A: &str = "Generate 5 questions from the text;";
pub const INSTRUCTION_B: &str = "Generate 5 complex questions from the text.";
pub const INSTRUCTION_C: &str =
    "Generate 5 questions from the text; make sure the questions can be answered.";
pub const INSTRUCTION_D: &str = "Generate 5 questions from the text; answer the question in the text; if the question is answered in the context, output 5 questions.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: PromptId,
    pub instruction: String,
}

impl PromptTemplate {
    pub fn new(id: PromptId) -> Self {
        let instruction = match id {
            PromptId::A => INSTRUCTION_A,
            PromptId::B => INSTRUCTION_B,
            PromptId::C => INSTRUCTION_C,
            PromptId::D => INSTRUCTION_D,
        };
        Self {
            id,
            instruction: instruction.to_string(),
        }
    }
}

/// Marker lines framing the context inside a rendered prompt.
pub const TEXT_PREFIX: &str = "Text: ";
pub const QUESTIONS_SUFFIX: &str = "Questions:";

/// `instruction \n Text: context \n Questions:`
pub fn render_prompt(template: &PromptTemplate, context: &str) -> String {
    let mut out = String::with_capacity(
        template.instruction.len() + context.len() + TEXT_PREFIX.len() + QUESTIONS_SUFFIX.len() + 2,
    );
    out.push_str(&template.instruction);
    out.push('\n');
    out.push_str(TEXT_PREFIX);
    out.push_str(context);
    out.push('\n');
    out.push_str(QUESTIONS_SUFFIX);
    out
}

/// Recover the context from a prompt produced by [`render_prompt`].
pub fn extract_context(prompt: &str) -> Option<&str> {
    let start = prompt.find(&format!("\n{TEXT_PREFIX}"))? + 1 + TEXT_PREFIX.len();
    let end = prompt.rfind(&format!("\n{QUESTIONS_SUFFIX}"))?;
    (end >= start).then(|| &prompt[start..end])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub questions_per_prompt: usize,
    pub max_output_tokens: u32,
    /// Only consulted by the mock backend.
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            temperature: 0.5,
            questions_per_prompt: 5,
            max_output_tokens: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedQuestion {
    pub context_id: usize,
    pub prompt_id: PromptId,
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend rejected the request with HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("backend timed out: {0}")]
    Timeout(String),
}

impl BackendError {
    /// Transport failures and 5xx responses are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        !matches!(self, BackendError::Rejected { .. })
    }
}

/// A text-generation service. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    /// Stable description recorded in run artifacts.
    fn identity(&self) -> String;

    /// One attempt, no retries.
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub response: BackendResponse,
    pub latency: Duration,
    /// Attempts beyond the first.
    pub retries: u32,
}

/// Send `prompt` with exponential backoff between retryable failures.
pub fn generate(
    backend: &dyn Backend,
    prompt: &str,
    cfg: &GenerationConfig,
    policy: &RetryPolicy,
) -> Result<Generation, BackendError> {
    let request = BackendRequest {
        prompt: prompt.to_string(),
        temperature: cfg.temperature,
        max_tokens: cfg.max_output_tokens,
    };
    let started = Instant::now();
    let mut backoff = policy.initial_backoff;
    let attempts = policy.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match backend.complete(&request) {
            Ok(response) => {
                return Ok(Generation {
                    response,
                    latency: started.elapsed(),
                    retries: attempt - 1,
                })
            }
            Err(err) if err.is_retryable() && attempt < attempts => {
                log::warn!("attempt {attempt}/{attempts} failed: {err}; retrying in {backoff:?}");
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            Err(err) => return Err(err),
        }
    }
}
