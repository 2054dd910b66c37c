//! The dynamic-corpus protocol: index the initial collection and train once,
//! then add each increment to the indexing structures only and evaluate
//! after every stage.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig};
use super::methods::MethodIndex;
use super::metrics::{forgetting_metric, generalization_metric, hit_at_k, idbi, semantic_familiarity, Qrels, UnigramLm};
use super::run::RetrievalRun;
use super::synthetic::generate;
use crate::corpus::{ingest, partition_dynamic, Corpus, DynamicPlan, PartitionParams};
use crate::io_util::write_json;
use crate::scorer::ReferenceScorer;
use crate::Result;

pub fn load_corpus(cfg: &ExperimentConfig) -> Result<Corpus> {
    match &cfg.data {
        DataSource::Files { documents, queries, qrels } => ingest(documents, queries, qrels),
        DataSource::Synthetic(p) => {
            let s = generate(p)?;
            Corpus::from_parts(s.documents, s.queries, s.qrels)
        }
    }
}

pub fn partition_for(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<DynamicPlan> {
    partition_dynamic(
        &corpus.docs,
        &corpus.qrels,
        PartitionParams {
            ratio_initial: cfg.partition.ratio_initial,
            n_increments: cfg.partition.n_increments,
            train_fraction: cfg.partition.train_fraction,
            seed: cfg.seed,
        },
    )
}

/// Per-stage facts recorded next to the run files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMeta {
    pub stage: usize,
    pub n_indexed: usize,
    pub scorer_hash: Option<String>,
    pub semantic_familiarity: Option<f64>,
    pub effective_vocab_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRuns {
    pub meta: StageMeta,
    /// Test queries of the initial collection.
    pub initial: RetrievalRun,
    /// Queries of this stage's increment; absent at stage 0.
    pub new: Option<RetrievalRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub n_indexed: usize,
    pub hit_initial: f64,
    pub hit_new: Option<f64>,
    pub idbi: Option<f64>,
    pub scorer_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub seed: u64,
    pub top_k: usize,
    pub stages: Vec<StageReport>,
    pub forgetting: f64,
    pub generalization: f64,
    pub mean_idbi: f64,
    pub semantic_familiarity: Option<f64>,
    pub effective_vocab_size: Option<usize>,
}

const FAMILIARITY_SAMPLE: usize = 2000;

pub fn stage_meta(index: &MethodIndex, scorer: Option<&ReferenceScorer>, corpus: &Corpus, plan: &DynamicPlan) -> Result<StageMeta> {
    let (mut familiarity, mut vocab) = (None, None);
    if let Some(registry) = index.docid_registry(corpus)? {
        vocab = Some(super::metrics::effective_vocab_size(&registry));
        let words: Vec<&str> = plan.d_sets[0]
            .iter()
            .filter_map(|id| corpus.docs.get(id))
            .flat_map(|d| d.tokens.iter().filter_map(|&t| corpus.vocab.word(t)))
            .collect();
        let lm = UnigramLm::fit(words);
        let sample: Vec<String> = registry
            .docids()
            .take(FAMILIARITY_SAMPLE)
            .flat_map(|z| z.iter().map(|&t| index.token_word(corpus, t)))
            .collect();
        if !sample.is_empty() {
            familiarity = Some(semantic_familiarity(&lm, sample.iter().map(String::as_str))?);
        }
    }
    Ok(StageMeta {
        stage: index.stage,
        n_indexed: index.indexed.len(),
        scorer_hash: scorer.map(ReferenceScorer::state_hash),
        semantic_familiarity: familiarity,
        effective_vocab_size: vocab,
    })
}

/// Retrieval for stage `index.stage`: initial test queries and, after the
/// first stage, the increment's queries.
pub fn retrieve_stage(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    plan: &DynamicPlan,
    index: &MethodIndex,
    scorer: Option<&ReferenceScorer>,
) -> Result<StageRuns> {
    let o = index.stage;
    let initial = index.retrieve(cfg, corpus, scorer, &plan.q_sets[0])?;
    let new = if o > 0 { Some(index.retrieve(cfg, corpus, scorer, &plan.q_sets[o])?) } else { None };
    Ok(StageRuns {
        meta: stage_meta(index, scorer, corpus, plan)?,
        initial,
        new,
    })
}

/// Folds per-stage runs into the report. Queries without results count as
/// misses.
pub fn build_report(cfg: &ExperimentConfig, corpus: &Corpus, plan: &DynamicPlan, stages: &[StageRuns]) -> Result<MetricsReport> {
    let qrels = Qrels::new(&corpus.qrels);
    let initial_docs: HashSet<&str> = plan.d_sets[0].iter().map(String::as_str).collect();
    let mut reports = Vec::with_capacity(stages.len());
    for s in stages {
        let o = s.meta.stage;
        let mut initial = s.initial.clone();
        initial.ensure_queries(&plan.q_sets[0]);
        let hit_initial = hit_at_k(&initial, &qrels, cfg.top_k)?;
        let (mut hit_new, mut bias) = (None, None);
        if let Some(new) = &s.new {
            let mut new = new.clone();
            new.ensure_queries(&plan.q_sets[o]);
            hit_new = Some(hit_at_k(&new, &qrels, cfg.top_k)?);
            let mut lists = initial.doc_lists();
            lists.extend(new.doc_lists());
            let n_new: usize = plan.d_sets[1..=o].iter().map(Vec::len).sum();
            bias = Some(idbi(&lists, |d| initial_docs.contains(d), plan.d_sets[0].len(), n_new, cfg.top_k)?);
        }
        reports.push(StageReport {
            stage: o,
            n_indexed: s.meta.n_indexed,
            hit_initial,
            hit_new,
            idbi: bias,
            scorer_hash: s.meta.scorer_hash.clone(),
        });
    }
    let later = &reports[1.min(reports.len())..];
    let p00 = reports.first().map_or(0.0, |r| r.hit_initial);
    let forgetting = forgetting_metric(p00, &later.iter().map(|r| r.hit_initial).collect::<Vec<_>>())?;
    let generalization = generalization_metric(&later.iter().filter_map(|r| r.hit_new).collect::<Vec<_>>())?;
    let idbis: Vec<f64> = later.iter().filter_map(|r| r.idbi).collect();
    let mean_idbi = idbis.iter().sum::<f64>() / idbis.len().max(1) as f64;
    let last = stages.last().map(|s| &s.meta);
    Ok(MetricsReport {
        method: cfg.method.name().to_string(),
        seed: cfg.seed,
        top_k: cfg.top_k,
        stages: reports,
        forgetting,
        generalization,
        mean_idbi,
        semantic_familiarity: last.and_then(|m| m.semantic_familiarity),
        effective_vocab_size: last.and_then(|m| m.effective_vocab_size),
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: MetricsReport,
    pub stages: Vec<StageRuns>,
}

impl ExperimentOutput {
    /// Writes run files, stage metadata and `report.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for s in &self.stages {
            write_stage(dir, &self.report.method, s)?;
        }
        write_json(&dir.join("report.json"), &self.report)
    }
}

pub(crate) fn run_path(dir: &Path, method: &str, stage: usize, part: &str) -> std::path::PathBuf {
    dir.join("runs").join(format!("{method}.stage{stage}.{part}"))
}

pub(crate) fn write_stage(dir: &Path, method: &str, s: &StageRuns) -> Result<()> {
    let o = s.meta.stage;
    s.initial.write(&run_path(dir, method, o, "initial.tsv"))?;
    if let Some(new) = &s.new {
        new.write(&run_path(dir, method, o, "new.tsv"))?;
    }
    write_json(&run_path(dir, method, o, "meta.json"), &s.meta)
}

/// Runs the whole protocol for `cfg.method`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let plan = partition_for(cfg, &corpus)?;
    run_on(cfg, &corpus, &plan)
}

/// The protocol on an already loaded corpus and plan.
pub fn run_on(cfg: &ExperimentConfig, corpus: &Corpus, plan: &DynamicPlan) -> Result<ExperimentOutput> {
    let mut index = MethodIndex::build(cfg, corpus, plan).map_err(|e| e.at_stage(0))?;
    let scorer = index.train(cfg, corpus, plan).map_err(|e| e.at_stage(0))?;
    let mut stages = Vec::with_capacity(plan.n_stages());
    for o in 0..plan.n_stages() {
        if o > 0 {
            index.add(corpus, &plan.d_sets[o]).map_err(|e| e.at_stage(o))?;
        }
        stages.push(retrieve_stage(cfg, corpus, plan, &index, scorer.as_ref()).map_err(|e| e.at_stage(o))?);
        log::info!("{} stage {o} done", cfg.method);
    }
    let report = build_report(cfg, corpus, plan, &stages)?;
    Ok(ExperimentOutput { report, stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::config::Method;
    use crate::eval::synthetic::SyntheticParams;

    fn tiny(method: Method) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            method,
            data: DataSource::Synthetic(SyntheticParams {
                n_docs: 120,
                doc_len: 60,
                ..Default::default()
            }),
            ..Default::default()
        };
        cfg.pq.k = 8;
        cfg.mdgr.k = 16;
        cfg
    }

    #[test]
    fn bm25_protocol_shape() {
        let out = run_experiment(&tiny(Method::Bm25)).unwrap();
        assert_eq!(out.report.stages.len(), 6);
        assert!(out.report.stages.iter().all(|s| s.hit_initial.is_finite()));
        assert!(out.report.stages[1..].iter().all(|s| s.hit_new.is_some() && s.idbi.is_some()));
        assert!(out.report.stages.iter().all(|s| s.scorer_hash.is_none()));
    }

    #[test]
    fn every_method_runs_and_is_deterministic() {
        for m in Method::ALL {
            let cfg = tiny(m);
            let a = run_experiment(&cfg).unwrap();
            let b = run_experiment(&cfg).unwrap();
            assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
            let r = &a.report;
            assert!(r.forgetting >= 0.0 && (0.0..=1.0).contains(&r.generalization), "{m}");
            if m.is_generative() {
                let h = r.stages[0].scorer_hash.clone().unwrap();
                assert!(r.stages.iter().all(|s| s.scorer_hash.as_ref() == Some(&h)));
            }
        }
    }

    #[test]
    fn uniform_scorer_is_selectable() {
        let mut cfg = tiny(Method::Pq);
        cfg.training.scorer = crate::eval::config::ScorerKind::Uniform;
        let uniform = run_experiment(&cfg).unwrap().report;
        let trained = run_experiment(&tiny(Method::Pq)).unwrap().report;
        assert_ne!(uniform.stages[0].scorer_hash, trained.stages[0].scorer_hash);
        assert!(uniform.stages[0].hit_initial < trained.stages[0].hit_initial);
    }

    #[test]
    fn stage_failure_names_stage() {
        let mut cfg = tiny(Method::Pq);
        cfg.pq.k = 10_000;
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("stage 0"), "{err}");
    }
}
