//! Scoring generated questions against a context's baseline questions and
//! the aggregates built on top: question max, prompt max, match counts,
//! boxplot statistics and the per-context max series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::BaselineQuestion;
use crate::promptgen::{GeneratedQuestion, PromptId};
use crate::similarity::{
    cosine_similarity, sentence_vector, tokenize, EmbeddingTable, SentenceVector,
};
use crate::stats::BoxStats;
use crate::textstats::{Histogram, KeywordFrequency};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no score records to aggregate")]
    EmptyRecords,
    #[error("no scores to summarize")]
    EmptyInput,
    #[error("no result for context {context_id} under prompt {prompt_id}")]
    MissingCell {
        context_id: usize,
        prompt_id: PromptId,
    },
}

/// How a question max is compared against the match threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    /// `score > threshold`
    #[default]
    Strict,
    /// `score >= threshold`
    Inclusive,
}

impl MatchRule {
    pub fn is_match(self, score: f64, threshold: f64) -> bool {
        match self {
            MatchRule::Strict => score > threshold,
            MatchRule::Inclusive => score >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineScore {
    pub baseline_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub generated: GeneratedQuestion,
    pub per_baseline: Vec<BaselineScore>,
    pub question_max: f64,
    pub zero_vector_flag: bool,
}

/// Pooled vectors of a context's baselines, computed once and reused for
/// every generated question of that context.
#[derive(Debug, Clone)]
pub struct BaselineVectors {
    entries: Vec<(String, SentenceVector)>,
}

impl BaselineVectors {
    pub fn new(baselines: &[BaselineQuestion], table: &EmbeddingTable) -> Self {
        Self {
            entries: baselines
                .iter()
                .map(|b| (b.id.clone(), sentence_vector(&tokenize(&b.question), table)))
                .collect(),
        }
    }

    pub fn score(&self, generated: &GeneratedQuestion, table: &EmbeddingTable) -> ScoreRecord {
        assert!(
            !self.entries.is_empty(),
            "a context has at least one baseline"
        );
        let g = sentence_vector(&tokenize(&generated.text), table);
        let mut zero_vector_flag = g.is_zero();
        let mut per_baseline = Vec::with_capacity(self.entries.len());
        for (id, b) in &self.entries {
            zero_vector_flag |= b.is_zero();
            let score = cosine_similarity(&g, b).expect("vectors from one table share a dimension");
            per_baseline.push(BaselineScore {
                baseline_id: id.clone(),
                score,
            });
        }
        let question_max = per_baseline
            .iter()
            .map(|s| s.score)
            .fold(f64::NEG_INFINITY, f64::max);
        ScoreRecord {
            generated: generated.clone(),
            per_baseline,
            question_max,
            zero_vector_flag,
        }
    }
}

pub fn score_question(
    generated: &GeneratedQuestion,
    baselines: &[BaselineQuestion],
    table: &EmbeddingTable,
) -> ScoreRecord {
    BaselineVectors::new(baselines, table).score(generated, table)
}

pub fn prompt_max(records: &[ScoreRecord]) -> Result<f64, EvalError> {
    max_of(records.iter().map(|r| r.question_max)).ok_or(EvalError::EmptyRecords)
}

fn max_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.reduce(f64::max)
}

/// Records whose question max exceeds `threshold`.
pub fn count_matches(records: &[ScoreRecord], threshold: f64) -> usize {
    count_matches_with(records, threshold, MatchRule::Strict)
}

pub fn count_matches_with(records: &[ScoreRecord], threshold: f64, rule: MatchRule) -> usize {
    count_scores_matching(records.iter().map(|r| r.question_max), threshold, rule)
}

pub fn count_scores_matching(
    scores: impl IntoIterator<Item = f64>,
    threshold: f64,
    rule: MatchRule,
) -> usize {
    scores
        .into_iter()
        .filter(|&s| rule.is_match(s, threshold))
        .count()
}

pub fn summarize(scores: &[f64]) -> Result<BoxStats, EvalError> {
    BoxStats::compute(scores).ok_or(EvalError::EmptyInput)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContextResult {
    pub context_id: usize,
    pub prompt_id: PromptId,
    pub records: Vec<ScoreRecord>,
    pub prompt_max: f64,
    /// Questions requested but not recovered from the response.
    pub shortfall: usize,
}

impl PromptContextResult {
    pub fn new(
        context_id: usize,
        prompt_id: PromptId,
        records: Vec<ScoreRecord>,
        shortfall: usize,
    ) -> Result<Self, EvalError> {
        let prompt_max = prompt_max(&records)?;
        Ok(Self {
            context_id,
            prompt_id,
            records,
            prompt_max,
            shortfall,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSummary {
    pub prompt_id: PromptId,
    pub n_questions: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
    pub match_count: usize,
}

/// One summary per prompt over every question max it produced, in the
/// order of `prompts`.
pub fn summarize_prompts(
    results: &[PromptContextResult],
    prompts: &[PromptId],
    threshold: f64,
    rule: MatchRule,
) -> Result<Vec<PromptSummary>, EvalError> {
    prompts
        .iter()
        .map(|prompt| {
            let scores: Vec<f64> = results
                .iter()
                .filter(|r| &r.prompt_id == prompt)
                .flat_map(|r| r.records.iter().map(|rec| rec.question_max))
                .collect();
            let stats = summarize(&scores)?;
            Ok(PromptSummary {
                prompt_id: prompt.clone(),
                n_questions: stats.n,
                mean: stats.mean,
                median: stats.median,
                q1: stats.q1,
                q3: stats.q3,
                whisker_lo: stats.whisker_lo,
                whisker_hi: stats.whisker_hi,
                outliers: stats.outliers,
                match_count: count_scores_matching(scores.iter().copied(), threshold, rule),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxSeries {
    pub prompt_id: PromptId,
    /// `(context_id, prompt_max)` ordered by context id.
    pub points: Vec<(usize, f64)>,
}

/// Per-prompt series of prompt maxima over the `context_ids × prompts` grid.
pub fn build_max_series(
    results: &[PromptContextResult],
    context_ids: &[usize],
    prompts: &[PromptId],
) -> Result<Vec<MaxSeries>, EvalError> {
    let cells: BTreeMap<(usize, &PromptId), f64> = results
        .iter()
        .map(|r| ((r.context_id, &r.prompt_id), r.prompt_max))
        .collect();
    let mut ids = context_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    prompts
        .iter()
        .map(|prompt| {
            let points = ids
                .iter()
                .map(|&context_id| {
                    cells
                        .get(&(context_id, prompt))
                        .map(|&m| (context_id, m))
                        .ok_or(EvalError::MissingCell {
                            context_id,
                            prompt_id: prompt.clone(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(MaxSeries {
                prompt_id: prompt.clone(),
                points,
            })
        })
        .collect()
}

/// Settings and provenance that determine a run's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub seed: u64,
    pub rng_algorithm: String,
    pub threshold: f64,
    pub match_rule: MatchRule,
    pub sample_size: usize,
    pub temperature: f64,
    pub questions_per_prompt: usize,
    pub max_output_tokens: u32,
    pub prompts: Vec<PromptId>,
    pub backend_identity: String,
    pub dataset_sha256: String,
    pub vectors_sha256: String,
    pub vector_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFigures {
    pub question_lengths: Histogram,
    pub keywords: KeywordFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub config: RunSnapshot,
    pub context_ids: Vec<usize>,
    pub results: Vec<PromptContextResult>,
    pub summaries: Vec<PromptSummary>,
    pub max_series: Vec<MaxSeries>,
    pub zero_vector_records: usize,
    pub total_shortfall: usize,
    pub dataset_figures: DatasetFigures,
}

impl EvalRun {
    pub fn records(&self) -> impl Iterator<Item = &ScoreRecord> {
        self.results.iter().flat_map(|r| r.records.iter())
    }
}
