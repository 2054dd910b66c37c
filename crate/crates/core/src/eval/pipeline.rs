//! The protocol as a sequence of file-producing steps, one per subcommand.
//!
//! Layout under the output directory:
//!
//! ```text
//! plan.json                         partition
//! index/{method}/stage{o}/          build (o = 0), add (o >= 1)
//! scorer/{method}.bin               train
//! runs/{method}.stage{o}.*          retrieve
//! report.json                       evaluate
//! ```

use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::experiment::{
    build_report, load_corpus, partition_for, retrieve_stage, run_path, write_stage, MetricsReport, StageMeta, StageRuns,
};
use super::methods::MethodIndex;
use super::metrics::{hit_at_k, Qrels};
use super::run::RetrievalRun;
use crate::corpus::{read_qrels, Corpus, DynamicPlan};
use crate::io_util::{read_json, write_atomic, write_json};
use crate::scorer::ReferenceScorer;
use crate::{Error, Result};

/// One experiment's working directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub cfg: ExperimentConfig,
    pub dir: PathBuf,
}

fn require(path: PathBuf, needs: &'static str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, needs })
    }
}

impl Workspace {
    pub fn new(cfg: ExperimentConfig, dir: impl Into<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        Ok(Workspace { cfg, dir: dir.into() })
    }

    fn method(&self) -> &'static str {
        self.cfg.method.name()
    }

    pub fn plan_path(&self) -> PathBuf {
        self.dir.join("plan.json")
    }

    pub fn index_dir(&self, stage: usize) -> PathBuf {
        self.dir.join("index").join(self.method()).join(format!("stage{stage}"))
    }

    pub fn scorer_path(&self) -> PathBuf {
        self.dir.join("scorer").join(format!("{}.bin", self.method()))
    }

    pub fn report_path(&self) -> PathBuf {
        self.dir.join("report.json")
    }

    fn load_plan(&self) -> Result<DynamicPlan> {
        let plan: DynamicPlan = read_json(&require(self.plan_path(), "partition")?)?;
        if plan.params.seed != self.cfg.seed {
            return Err(Error::invalid(format!(
                "plan.json was made with seed {} but the config says {}; rerun `partition`",
                plan.params.seed, self.cfg.seed
            )));
        }
        Ok(plan)
    }

    fn load_index(&self, stage: usize) -> Result<MethodIndex> {
        let needs = if stage == 0 { "build" } else { "add" };
        let dir = self.index_dir(stage);
        require(dir.join("state.json"), needs)?;
        let index = MethodIndex::load(&dir)?;
        if index.method != self.cfg.method || index.stage != stage {
            return Err(Error::Format(format!("{} holds a {} index at stage {}", dir.display(), index.method, index.stage)));
        }
        Ok(index)
    }

    fn load_scorer(&self) -> Result<Option<ReferenceScorer>> {
        if !self.cfg.method.is_generative() {
            return Ok(None);
        }
        Ok(Some(ReferenceScorer::load(&require(self.scorer_path(), "train")?)?))
    }

    fn stage_in_range(&self, plan: &DynamicPlan, stage: usize) -> Result<()> {
        if stage >= plan.n_stages() {
            return Err(Error::invalid(format!("stage {stage} out of range; the plan has {} stages", plan.n_stages())));
        }
        Ok(())
    }

    pub fn corpus(&self) -> Result<Corpus> {
        load_corpus(&self.cfg)
    }

    pub fn partition(&self) -> Result<DynamicPlan> {
        let corpus = self.corpus()?;
        let plan = partition_for(&self.cfg, &corpus)?;
        write_atomic(&self.plan_path(), plan.to_json()?.as_bytes())?;
        Ok(plan)
    }

    pub fn build(&self) -> Result<MethodIndex> {
        let plan = self.load_plan()?;
        let index = MethodIndex::build(&self.cfg, &self.corpus()?, &plan)?;
        index.save(&self.index_dir(0))?;
        Ok(index)
    }

    /// Trains the scorer from the stage-0 index. No-op for BM25.
    pub fn train(&self) -> Result<Option<ReferenceScorer>> {
        let plan = self.load_plan()?;
        let index = self.load_index(0)?;
        let scorer = index.train(&self.cfg, &self.corpus()?, &plan)?;
        if let Some(s) = &scorer {
            s.save(&self.scorer_path())?;
        }
        Ok(scorer)
    }

    /// Adds increment `stage` to the index of stage `stage - 1`.
    pub fn add(&self, stage: usize) -> Result<MethodIndex> {
        let plan = self.load_plan()?;
        self.stage_in_range(&plan, stage)?;
        if stage == 0 {
            return Err(Error::invalid("stage 0 is the initial collection; use `build`"));
        }
        let mut index = self.load_index(stage - 1)?;
        index.add(&self.corpus()?, &plan.d_sets[stage])?;
        index.save(&self.index_dir(stage))?;
        Ok(index)
    }

    pub fn retrieve(&self, stage: usize) -> Result<StageRuns> {
        let plan = self.load_plan()?;
        self.stage_in_range(&plan, stage)?;
        let index = self.load_index(stage)?;
        let scorer = self.load_scorer()?;
        let runs = retrieve_stage(&self.cfg, &self.corpus()?, &plan, &index, scorer.as_ref())?;
        write_stage(&self.dir, self.method(), &runs)?;
        Ok(runs)
    }

    fn read_stage(&self, stage: usize) -> Result<StageRuns> {
        let meta_path = require(run_path(&self.dir, self.method(), stage, "meta.json"), "retrieve")?;
        let meta: StageMeta = read_json(&meta_path)?;
        let initial = RetrievalRun::read(&require(run_path(&self.dir, self.method(), stage, "initial.tsv"), "retrieve")?)?;
        let new = if stage > 0 {
            Some(RetrievalRun::read(&require(run_path(&self.dir, self.method(), stage, "new.tsv"), "retrieve")?)?)
        } else {
            None
        };
        Ok(StageRuns { meta, initial, new })
    }

    /// Folds the run files of every stage into `report.json`.
    pub fn evaluate(&self) -> Result<MetricsReport> {
        let plan = self.load_plan()?;
        let corpus = self.corpus()?;
        let stages = (0..plan.n_stages()).map(|o| self.read_stage(o)).collect::<Result<Vec<_>>>()?;
        let report = build_report(&self.cfg, &corpus, &plan, &stages)?;
        write_json(&self.report_path(), &report)?;
        Ok(report)
    }

    /// Every step in order.
    pub fn run(&self) -> Result<MetricsReport> {
        let plan = self.partition()?;
        self.build().map_err(|e| e.at_stage(0))?;
        self.train().map_err(|e| e.at_stage(0))?;
        for o in 1..plan.n_stages() {
            self.add(o).map_err(|e| e.at_stage(o))?;
        }
        for o in 0..plan.n_stages() {
            self.retrieve(o).map_err(|e| e.at_stage(o))?;
        }
        self.evaluate()
    }
}

/// Hit@K of a single run file against a qrels file.
pub fn evaluate_run_file(run: &Path, qrels: &Path, k: usize) -> Result<f64> {
    let run = RetrievalRun::read(run)?;
    let pairs: Vec<_> = read_qrels(qrels)?.into_iter().map(|(_, p)| p).collect();
    hit_at_k(&run, &Qrels::new(&pairs), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::config::{DataSource, Method};
    use crate::eval::experiment::run_on;
    use crate::eval::synthetic::SyntheticParams;

    fn small(method: Method) -> ExperimentConfig {
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
    fn steps_match_in_memory_protocol() {
        for method in Method::ALL {
            let dir = tempfile::tempdir().unwrap();
            let ws = Workspace::new(small(method), dir.path()).unwrap();
            let report = ws.run().unwrap();
            let corpus = ws.corpus().unwrap();
            let plan = partition_for(&ws.cfg, &corpus).unwrap();
            let direct = run_on(&ws.cfg, &corpus, &plan).unwrap();
            assert_eq!(report, direct.report, "{method}");
        }
    }

    #[test]
    fn missing_steps_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(small(Method::Pq), dir.path()).unwrap();
        let msg = ws.build().unwrap_err().to_string();
        assert!(msg.contains("`partition`"), "{msg}");
        ws.partition().unwrap();
        let msg = ws.retrieve(0).unwrap_err().to_string();
        assert!(msg.contains("`build`"), "{msg}");
        ws.build().unwrap();
        let msg = ws.retrieve(0).unwrap_err().to_string();
        assert!(msg.contains("`train`"), "{msg}");
        let msg = ws.retrieve(2).unwrap_err().to_string();
        assert!(msg.contains("`add`"), "{msg}");
    }

    #[test]
    fn seed_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        Workspace::new(small(Method::Bm25), dir.path()).unwrap().partition().unwrap();
        let other = Workspace::new(ExperimentConfig { seed: 99, ..small(Method::Bm25) }, dir.path()).unwrap();
        assert!(other.build().unwrap_err().to_string().contains("seed"));
    }
}
