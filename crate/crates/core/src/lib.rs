//! Batch harness for generating reading-comprehension questions with
//! prompt templates and scoring them against SQuAD baseline questions by
//! mean-pooled word-vector cosine similarity.
//!
//! The pipeline runs parse → sample → render → generate → parse questions →
//! score → aggregate → persist; see [`pipeline::run_pipeline`].

pub mod corpus;
pub mod eval;
pub mod pipeline;
pub mod promptgen;
pub mod report;
pub mod rng;
pub mod similarity;
pub mod stats;
pub mod textstats;

pub use corpus::{parse_squad, SquadDataset};
pub use eval::EvalRun;
pub use pipeline::{run_pipeline, RunConfig};
pub use similarity::EmbeddingTable;
