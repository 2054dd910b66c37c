//! Metrics, the BM25 baseline, synthetic data and the dynamic-corpus
//! experiment runner.

mod bm25;
mod config;
mod experiment;
mod methods;
mod metrics;
mod pipeline;
mod run;
mod synthetic;

pub use bm25::{Bm25Index, Bm25Params};
pub use config::{
    DataSource, ExperimentConfig, HierSection, MdgrSection, Method, NgramSection, PartitionSection, PqSection, ScorerKind,
    TrainingSection,
};
pub use experiment::{
    build_report, load_corpus, partition_for, retrieve_stage, run_experiment, run_on, stage_meta, ExperimentOutput, MetricsReport, StageMeta,
    StageReport, StageRuns,
};
pub use methods::{IndexState, MethodIndex, NgramSource};
pub use metrics::{
    effective_vocab_size, forgetting_metric, generalization_metric, hit_at_k, idbi, idbi_from_counts,
    semantic_familiarity, Qrels, UnigramLm,
};
pub use pipeline::{evaluate_run_file, Workspace};
pub use run::RetrievalRun;
pub use synthetic::{generate as generate_synthetic, SyntheticCorpus, SyntheticParams};
