//! End-to-end runs: configuration, orchestration and the run manifest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{parse_squad_bytes, sample_contexts, ContextRecord};
use crate::eval::{
    build_max_series, summarize_prompts, BaselineVectors, DatasetFigures, EvalRun, MatchRule,
    PromptContextResult, RunSnapshot, ScoreRecord, DEFAULT_MATCH_THRESHOLD,
};
use crate::promptgen::{
    generate, parse_questions, render_prompt, Backend, GeneratedQuestion, GenerationConfig,
    HttpBackend, HttpBackendConfig, MockBackend, PromptId, RetryPolicy,
};
use crate::report;
use crate::rng::RNG_ALGORITHM;
use crate::similarity::{load_vectors, EmbeddingTable};
use crate::textstats::{
    bundled_stopwords, frequent_words, parse_stopwords, question_length_histogram,
};

pub const ENV_BACKEND_URL: &str = "QGEN_BACKEND_URL";
pub const ENV_BACKEND_TOKEN: &str = "QGEN_BACKEND_TOKEN";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error during {stage}: {message}")]
    Data {
        stage: &'static str,
        message: String,
    },
    #[error("backend error for context {context_id}, prompt {prompt_id}: {message}")]
    Backend {
        context_id: usize,
        prompt_id: PromptId,
        message: String,
    },
    #[error("run aborted after {completed} of {total} cells: {cause}")]
    Partial {
        completed: usize,
        total: usize,
        cause: Box<PipelineError>,
    },
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl PipelineError {
    /// 0 success, 1 config, 2 data, 3 backend, 4 partial completion.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Data { .. } | PipelineError::Io { .. } => 2,
            PipelineError::Backend { .. } => 3,
            PipelineError::Partial { .. } => 4,
        }
    }

    fn stage(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Data { stage, .. } => stage,
            PipelineError::Backend { .. } => "generate",
            PipelineError::Partial { .. } => "generate",
            PipelineError::Io { .. } => "persist",
        }
    }

    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Mock,
    Http(HttpBackendConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryConfig {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff_ms: 1000,
        }
    }
}

impl RetryConfig {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts,
            initial_backoff: Duration::from_millis(self.initial_backoff_ms),
        }
    }
}

fn default_sample_size() -> usize {
    50
}
fn default_temperature() -> f64 {
    0.5
}
fn default_questions() -> usize {
    5
}
fn default_max_tokens() -> u32 {
    256
}
fn default_threshold() -> f64 {
    DEFAULT_MATCH_THRESHOLD
}
fn default_prompts() -> Vec<PromptId> {
    PromptId::ALL.to_vec()
}
fn default_in_flight() -> usize {
    4
}
fn default_top_k() -> usize {
    20
}
fn default_bin_width() -> u32 {
    1
}
fn default_backend() -> BackendConfig {
    BackendConfig::Mock
}

/// A run configuration document. Relative paths resolve against the
/// directory of the file they were loaded from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub vectors: PathBuf,
    #[serde(default = "default_backend")]
    pub backend: BackendConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_questions")]
    pub questions_per_prompt: usize,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub match_rule: MatchRule,
    #[serde(default = "default_prompts")]
    pub prompts: Vec<PromptId>,
    /// Not recorded in manifests: the manifest lives inside it.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryConfig,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default = "default_top_k")]
    pub keyword_top_k: usize,
    #[serde(default = "default_bin_width")]
    pub length_bin_width: u32,
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>, vectors: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            vectors: vectors.into(),
            backend: BackendConfig::Mock,
            seed: 0,
            sample_size: default_sample_size(),
            temperature: default_temperature(),
            questions_per_prompt: default_questions(),
            max_output_tokens: default_max_tokens(),
            threshold: default_threshold(),
            match_rule: MatchRule::Strict,
            prompts: default_prompts(),
            out: None,
            max_in_flight: default_in_flight(),
            retry: RetryConfig::default(),
            stopwords: None,
            keyword_top_k: default_top_k(),
            length_bin_width: default_bin_width(),
        }
    }

    /// Load a config file, or the config recorded in a run manifest.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let raw = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut value: serde_json::Value = serde_json::from_str(&raw)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        if value.get("manifest_version").is_some() {
            value = value
                .get_mut("config")
                .map(serde_json::Value::take)
                .ok_or_else(|| PipelineError::Config("manifest has no config".into()))?;
        }
        let mut cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.dataset);
        resolve(&mut self.vectors);
        if let Some(p) = self.out.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.stopwords.as_mut() {
            resolve(p);
        }
    }

    /// Endpoint and token from the environment replace file values.
    pub fn apply_env_overrides(&mut self) {
        self.apply_overrides_from(|key| std::env::var(key).ok());
    }

    pub fn apply_overrides_from(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let BackendConfig::Http(http) = &mut self.backend {
            if let Some(url) = lookup(ENV_BACKEND_URL) {
                http.url = url;
            }
            if let Some(token) = lookup(ENV_BACKEND_TOKEN) {
                http.token = Some(token);
            }
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |msg: String| Err(PipelineError::Config(msg));
        for (name, path) in [("dataset", &self.dataset), ("vectors", &self.vectors)] {
            if !path.is_file() {
                return fail(format!("{name} file {} does not exist", path.display()));
            }
        }
        if let Some(p) = &self.stopwords {
            if !p.is_file() {
                return fail(format!("stopword file {} does not exist", p.display()));
            }
        }
        if self.sample_size == 0 {
            return fail("sample_size must be at least 1".into());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return fail("temperature must be non-negative".into());
        }
        if self.questions_per_prompt == 0 {
            return fail("questions_per_prompt must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return fail("threshold must lie in [0, 1]".into());
        }
        if self.prompts.is_empty() {
            return fail("at least one prompt is required".into());
        }
        let mut seen = self.prompts.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.prompts.len() {
            return fail("prompts must not repeat".into());
        }
        if self.max_in_flight == 0 {
            return fail("max_in_flight must be at least 1".into());
        }
        if self.keyword_top_k == 0 || self.length_bin_width == 0 {
            return fail("keyword_top_k and length_bin_width must be at least 1".into());
        }
        if let BackendConfig::Http(http) = &self.backend {
            if http.url.trim().is_empty() {
                return fail(format!(
                    "http backend needs a URL (config backend.url or {ENV_BACKEND_URL})"
                ));
            }
        }
        Ok(())
    }

    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig {
            temperature: self.temperature,
            questions_per_prompt: self.questions_per_prompt,
            max_output_tokens: self.max_output_tokens,
            seed: self.seed,
        }
    }

    pub fn build_backend(&self) -> Box<dyn Backend> {
        match &self.backend {
            BackendConfig::Mock => Box::new(MockBackend::new(self.seed, self.questions_per_prompt)),
            BackendConfig::Http(http) => Box::new(HttpBackend::new(http.clone())),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("qgen-out"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    pub contexts: usize,
    pub cells_total: usize,
    pub cells_completed: usize,
    pub score_records: usize,
    pub zero_vector_records: usize,
    pub shortfall: usize,
    pub total_retries: u64,
}

/// Wall-clock data; the only part of a run directory that varies between
/// otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub started_at: String,
    pub finished_at: String,
    pub generation_latency_ms_total: u64,
    pub generation_latency_ms_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub status: String,
    pub error: Option<ManifestError>,
    pub config: RunConfig,
    pub snapshot: Option<RunSnapshot>,
    pub counts: RunCounts,
    pub files: Vec<String>,
    pub timing: RunTiming,
}

struct CellOutput {
    questions: Vec<String>,
    shortfall: usize,
    latency: Duration,
    retries: u32,
}

struct Inputs {
    table: EmbeddingTable,
    contexts: Vec<ContextRecord>,
    figures: DatasetFigures,
    dataset_sha256: String,
    vectors_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn data_err<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Data {
        stage,
        message: e.to_string(),
    }
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs, PipelineError> {
    let raw = fs::read(&cfg.dataset).map_err(data_err("parse"))?;
    let dataset_sha256 = sha256_hex(&raw);
    let dataset = parse_squad_bytes(&raw).map_err(data_err("parse"))?;
    drop(raw);

    let raw = fs::read(&cfg.vectors).map_err(data_err("vectors"))?;
    let vectors_sha256 = sha256_hex(&raw);
    let table = load_vectors(raw.as_slice()).map_err(data_err("vectors"))?;
    drop(raw);

    let stopwords = match &cfg.stopwords {
        Some(path) => {
            let file = fs::File::open(path).map_err(data_err("stopwords"))?;
            parse_stopwords(std::io::BufReader::new(file)).map_err(data_err("stopwords"))?
        }
        None => bundled_stopwords(),
    };
    let questions: Vec<&str> = dataset.questions().map(|q| q.question.as_str()).collect();
    let figures = DatasetFigures {
        question_lengths: question_length_histogram(&questions, cfg.length_bin_width)
            .map_err(data_err("stats"))?,
        keywords: frequent_words(&questions, &stopwords, cfg.keyword_top_k)
            .map_err(data_err("stats"))?,
    };

    let contexts =
        sample_contexts(&dataset, cfg.sample_size, cfg.seed).map_err(data_err("sample"))?;
    Ok(Inputs {
        table,
        contexts,
        figures,
        dataset_sha256,
        vectors_sha256,
    })
}

/// Run with the backend described by the configuration.
pub fn run_pipeline(cfg: &RunConfig) -> Result<EvalRun, PipelineError> {
    cfg.validate()?;
    let backend = cfg.build_backend();
    run_pipeline_with_backend(cfg, backend.as_ref())
}

/// Parse, sample, generate, score, aggregate and persist into `cfg.out`.
pub fn run_pipeline_with_backend(
    cfg: &RunConfig,
    backend: &dyn Backend,
) -> Result<EvalRun, PipelineError> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| PipelineError::io(&out, e))?;

    let inputs = match load_inputs(cfg) {
        Ok(inputs) => inputs,
        Err(err) => {
            write_failure_manifest(cfg, &out, &err, None, &[], 0, &started_at, &[])?;
            return Err(err);
        }
    };
    let snapshot = RunSnapshot {
        seed: cfg.seed,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        threshold: cfg.threshold,
        match_rule: cfg.match_rule,
        sample_size: cfg.sample_size,
        temperature: cfg.temperature,
        questions_per_prompt: cfg.questions_per_prompt,
        max_output_tokens: cfg.max_output_tokens,
        prompts: cfg.prompts.clone(),
        backend_identity: backend.identity(),
        dataset_sha256: inputs.dataset_sha256.clone(),
        vectors_sha256: inputs.vectors_sha256.clone(),
        vector_dim: inputs.table.dim(),
    };

    log::info!(
        "generating {} contexts x {} prompts with {}",
        inputs.contexts.len(),
        cfg.prompts.len(),
        snapshot.backend_identity
    );
    let cells: Vec<(usize, PromptId)> = (0..inputs.contexts.len())
        .flat_map(|ci| cfg.prompts.iter().map(move |p| (ci, p.clone())))
        .collect();
    let outputs = generate_grid(cfg, backend, &inputs.contexts, &cells);
    let first_error = outputs.iter().find_map(|o| o.as_ref().err().cloned());
    let latencies: Vec<Duration> = outputs
        .iter()
        .filter_map(|o| o.as_ref().ok().map(|c| c.latency))
        .collect();
    let total_retries: u64 = outputs
        .iter()
        .filter_map(|o| o.as_ref().ok().map(|c| u64::from(c.retries)))
        .sum();

    let baselines: Vec<BaselineVectors> = inputs
        .contexts
        .par_iter()
        .map(|c| BaselineVectors::new(&c.baselines, &inputs.table))
        .collect();
    let results: Vec<PromptContextResult> = cells
        .par_iter()
        .zip(outputs.par_iter())
        .filter_map(|((ci, prompt), output)| {
            let output = output.as_ref().ok()?;
            let context = &inputs.contexts[*ci];
            let records: Vec<ScoreRecord> = output
                .questions
                .iter()
                .enumerate()
                .map(|(index, text)| {
                    let generated = GeneratedQuestion {
                        context_id: context.context_id,
                        prompt_id: prompt.clone(),
                        index,
                        text: text.clone(),
                    };
                    baselines[*ci].score(&generated, &inputs.table)
                })
                .collect();
            Some(
                PromptContextResult::new(
                    context.context_id,
                    prompt.clone(),
                    records,
                    output.shortfall,
                )
                .expect("parsed responses hold at least one question"),
            )
        })
        .collect();

    if let Some(err) = first_error {
        let err = if results.is_empty() {
            err
        } else {
            PipelineError::Partial {
                completed: results.len(),
                total: cells.len(),
                cause: Box::new(err),
            }
        };
        let files = report::write_scores_only(&results, &out)?;
        write_failure_manifest(
            cfg,
            &out,
            &err,
            Some(&snapshot),
            &results,
            cells.len(),
            &started_at,
            &files,
        )?;
        return Err(err);
    }

    let context_ids: Vec<usize> = inputs.contexts.iter().map(|c| c.context_id).collect();
    let aggregate_err = |e: crate::eval::EvalError| PipelineError::Data {
        stage: "aggregate",
        message: e.to_string(),
    };
    let summaries = summarize_prompts(&results, &cfg.prompts, cfg.threshold, cfg.match_rule)
        .map_err(aggregate_err)?;
    let max_series =
        build_max_series(&results, &context_ids, &cfg.prompts).map_err(aggregate_err)?;
    let zero_vector_records = results
        .iter()
        .flat_map(|r| &r.records)
        .filter(|r| r.zero_vector_flag)
        .count();
    let total_shortfall = results.iter().map(|r| r.shortfall).sum();
    if total_shortfall > 0 {
        log::warn!("{total_shortfall} requested questions were not recovered from responses");
    }

    let run = EvalRun {
        config: snapshot.clone(),
        context_ids,
        results,
        summaries,
        max_series,
        zero_vector_records,
        total_shortfall,
        dataset_figures: inputs.figures,
    };
    let files = report::write_run(&run, &out)?;
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        status: "completed".into(),
        error: None,
        config: cfg.clone(),
        snapshot: Some(snapshot),
        counts: RunCounts {
            contexts: run.context_ids.len(),
            cells_total: cells.len(),
            cells_completed: run.results.len(),
            score_records: run.records().count(),
            zero_vector_records,
            shortfall: total_shortfall,
            total_retries,
        },
        files,
        timing: timing(&started_at, &latencies),
    };
    write_manifest(&manifest, &out)?;
    Ok(run)
}

/// Generate every cell with at most `cfg.max_in_flight` requests in flight.
/// Results come back in cell order. After the first failure no new cells start.
fn generate_grid(
    cfg: &RunConfig,
    backend: &dyn Backend,
    contexts: &[ContextRecord],
    cells: &[(usize, PromptId)],
) -> Vec<Result<CellOutput, PipelineError>> {
    let gen_cfg = cfg.generation();
    let policy = cfg.retry.policy();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Mutex<HashMap<usize, Result<CellOutput, PipelineError>>> =
        Mutex::new(HashMap::new());
    let workers = cfg.max_in_flight.min(cells.len()).max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((ci, prompt)) = cells.get(i) else {
                    break;
                };
                let context = &contexts[*ci];
                let outcome = run_cell(backend, context, prompt, &gen_cfg, &policy);
                if outcome.is_err() {
                    abort.store(true, Ordering::SeqCst);
                }
                slots.lock().expect("slot lock").insert(i, outcome);
            });
        }
    });

    let mut slots = slots.into_inner().expect("slot lock");
    let mut out = Vec::with_capacity(cells.len());
    for (i, (ci, prompt)) in cells.iter().enumerate() {
        out.push(slots.remove(&i).unwrap_or_else(|| {
            Err(PipelineError::Backend {
                context_id: contexts[*ci].context_id,
                prompt_id: prompt.clone(),
                message: "not attempted after an earlier failure".into(),
            })
        }));
    }
    out
}

fn run_cell(
    backend: &dyn Backend,
    context: &ContextRecord,
    prompt: &PromptId,
    gen_cfg: &GenerationConfig,
    policy: &RetryPolicy,
) -> Result<CellOutput, PipelineError> {
    let backend_err = |message: String| PipelineError::Backend {
        context_id: context.context_id,
        prompt_id: prompt.clone(),
        message,
    };
    let rendered = render_prompt(&prompt.template(), &context.text);
    let generation =
        generate(backend, &rendered, gen_cfg, policy).map_err(|e| backend_err(e.to_string()))?;
    let parsed = parse_questions(&generation.response.text, gen_cfg.questions_per_prompt)
        .map_err(|e| backend_err(e.to_string()))?;
    Ok(CellOutput {
        shortfall: parsed.shortfall(),
        questions: parsed.questions,
        latency: generation.latency,
        retries: generation.retries,
    })
}

fn timing(started_at: &str, latencies: &[Duration]) -> RunTiming {
    RunTiming {
        started_at: started_at.to_string(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        generation_latency_ms_total: latencies.iter().map(|d| d.as_millis() as u64).sum(),
        generation_latency_ms_max: latencies
            .iter()
            .map(|d| d.as_millis() as u64)
            .max()
            .unwrap_or(0),
    }
}

#[allow(clippy::too_many_arguments)]
fn write_failure_manifest(
    cfg: &RunConfig,
    out: &Path,
    err: &PipelineError,
    snapshot: Option<&RunSnapshot>,
    results: &[PromptContextResult],
    cells_total: usize,
    started_at: &str,
    files: &[String],
) -> Result<(), PipelineError> {
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        status: "failed".into(),
        error: Some(ManifestError {
            stage: err.stage().into(),
            message: err.to_string(),
        }),
        config: cfg.clone(),
        snapshot: snapshot.cloned(),
        counts: RunCounts {
            contexts: cfg.sample_size,
            cells_total,
            cells_completed: results.len(),
            score_records: results.iter().map(|r| r.records.len()).sum(),
            zero_vector_records: results
                .iter()
                .flat_map(|r| &r.records)
                .filter(|r| r.zero_vector_flag)
                .count(),
            shortfall: results.iter().map(|r| r.shortfall).sum(),
            total_retries: 0,
        },
        files: files.to_vec(),
        timing: timing(started_at, &[]),
    };
    write_manifest(&manifest, out)
}

fn write_manifest(manifest: &RunManifest, out: &Path) -> Result<(), PipelineError> {
    let path = out.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| PipelineError::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, PipelineError> {
    let path = dir.join(MANIFEST_FILE);
    let raw = fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
    serde_json::from_str(&raw).map_err(|e| PipelineError::io(&path, e))
}
