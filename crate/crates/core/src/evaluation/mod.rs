//! Metrics, statistics and the benchmark harness over simulated bug corpora.

pub mod bench;
pub mod generate;
pub mod metrics;
pub mod stats;

use thiserror::Error;

pub use bench::{
    load_corpus, run_ablations, Ablation, BenchReport, BenchSettings, CorpusEntry, Variant,
};
pub use generate::{generate_corpus, generate_model, generate_model_with, BugShape};
pub use metrics::{corpus_metrics, score_ranking, BugScore, GroundTruth, MetricsReport, TOP_N};
pub use stats::{a12, mann_whitney_u, MannWhitney, PValueMethod};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("sample is empty")]
    EmptySample,
    #[error("bug {0} has no faulty files")]
    EmptyGroundTruth(String),
    #[error("model {0}: no level reproduces the failing outcome")]
    NoFailingLevel(String),
}
