//! Experiment configuration (TOML or JSON).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bm25::Bm25Params;
use super::synthetic::SyntheticParams;
use crate::mdgr::ExpansionMode;
use crate::quantize::KMeansParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    HierKmeans,
    Pq,
    NgramFm,
    Mdgr,
    Bm25,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::HierKmeans, Method::Pq, Method::NgramFm, Method::Mdgr, Method::Bm25];

    pub fn name(self) -> &'static str {
        match self {
            Method::HierKmeans => "hier-kmeans",
            Method::Pq => "pq",
            Method::NgramFm => "ngram-fm",
            Method::Mdgr => "mdgr",
            Method::Bm25 => "bm25",
        }
    }

    /// Whether retrieval goes through a trained docid scorer.
    pub fn is_generative(self) -> bool {
        self != Method::Bm25
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Files {
        documents: PathBuf,
        queries: PathBuf,
        qrels: PathBuf,
    },
    Synthetic(SyntheticParams),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSection {
    pub ratio_initial: f64,
    pub n_increments: usize,
    pub train_fraction: f64,
}

impl Default for PartitionSection {
    fn default() -> Self {
        PartitionSection {
            ratio_initial: 0.5,
            n_increments: 5,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    /// Counting model fitted on the training pairs.
    #[default]
    Reference,
    /// Untrained: every continuation equally likely.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub scorer: ScorerKind,
    pub lambda: f64,
    pub buckets: u32,
    pub pseudo_query_len: usize,
    /// Chunking for pseudo-queries of single-docid and n-gram methods.
    pub window: usize,
    pub stride: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            scorer: ScorerKind::Reference,
            lambda: 0.1,
            buckets: 4096,
            pseudo_query_len: 8,
            window: 32,
            stride: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PqSection {
    pub m: usize,
    pub k: usize,
}

impl Default for PqSection {
    fn default() -> Self {
        PqSection { m: 4, k: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierSection {
    pub branching: usize,
    pub leaf_threshold: usize,
}

impl Default for HierSection {
    fn default() -> Self {
        HierSection {
            branching: 10,
            leaf_threshold: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdgrSection {
    pub m: usize,
    pub k: usize,
    pub window: usize,
    pub stride: usize,
    pub expansion: ExpansionMode,
}

impl Default for MdgrSection {
    fn default() -> Self {
        MdgrSection {
            m: 4,
            k: 256,
            window: 32,
            stride: 16,
            expansion: ExpansionMode::WholeCode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NgramSection {
    /// Generated n-gram length in bytes.
    pub max_len: usize,
    pub targets_per_pair: usize,
    /// Occurrences resolved per generated n-gram.
    pub locate_limit: usize,
}

impl Default for NgramSection {
    fn default() -> Self {
        NgramSection {
            max_len: 6,
            targets_per_pair: 8,
            locate_limit: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub seed: u64,
    pub data: DataSource,
    pub partition: PartitionSection,
    pub top_k: usize,
    pub beam_width: usize,
    pub beta: f64,
    pub embed_dim: usize,
    pub kmeans: KMeansParams,
    pub training: TrainingSection,
    pub pq: PqSection,
    pub hier: HierSection,
    pub mdgr: MdgrSection,
    pub ngram: NgramSection,
    pub bm25: Bm25Params,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::Mdgr,
            seed: 0,
            data: DataSource::default(),
            partition: PartitionSection::default(),
            top_k: 10,
            beam_width: 20,
            beta: 1.0,
            embed_dim: 64,
            kmeans: KMeansParams::default(),
            training: TrainingSection::default(),
            pq: PqSection::default(),
            hier: HierSection::default(),
            mdgr: MdgrSection::default(),
            ngram: NgramSection::default(),
            bm25: Bm25Params::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the extension is `.json`. Relative data
    /// paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
                msg: e.message().to_string(),
            })?
        };
        if let DataSource::Files { documents, queries, qrels } = &mut cfg.data {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [documents, queries, qrels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Checks the parameters the selected method depends on.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.top_k == 0 || self.beam_width == 0 {
            return bad("top_k and beam_width must be at least 1".into());
        }
        if !(self.beta >= 0.0) {
            return bad(format!("beta must be non-negative, got {}", self.beta));
        }
        let p = &self.partition;
        if !(p.ratio_initial > 0.0 && p.ratio_initial < 1.0) || p.n_increments == 0 {
            return bad("partition needs 0 < ratio_initial < 1 and n_increments >= 1".into());
        }
        if !(p.train_fraction >= 0.0 && p.train_fraction <= 1.0) {
            return bad("train_fraction must lie in [0, 1]".into());
        }
        if self.embed_dim < 8 {
            return bad(format!("embed_dim must be >= 8, got {}", self.embed_dim));
        }
        let t = &self.training;
        if !(t.lambda > 0.0) || t.buckets == 0 {
            return bad("training needs lambda > 0 and buckets >= 1".into());
        }
        match self.method {
            Method::HierKmeans | Method::Pq | Method::NgramFm => {
                if t.window == 0 || t.stride == 0 || t.stride > t.window {
                    return bad("training chunking needs 0 < stride <= window".into());
                }
            }
            _ => {}
        }
        match self.method {
            Method::Pq => self.check_pq(self.pq.m, self.pq.k)?,
            Method::Mdgr => {
                self.check_pq(self.mdgr.m, self.mdgr.k)?;
                if self.mdgr.window == 0 || self.mdgr.stride == 0 || self.mdgr.stride > self.mdgr.window {
                    return bad("mdgr chunking needs 0 < stride <= window".into());
                }
            }
            Method::HierKmeans => {
                if self.hier.branching < 2 || self.hier.leaf_threshold == 0 {
                    return bad("hier needs branching >= 2 and leaf_threshold >= 1".into());
                }
            }
            Method::NgramFm => {
                let n = &self.ngram;
                if n.max_len == 0 || n.targets_per_pair == 0 || n.locate_limit == 0 {
                    return bad("ngram max_len, targets_per_pair and locate_limit must be positive".into());
                }
            }
            Method::Bm25 => {
                if !(self.bm25.k1 > 0.0) || !(0.0..=1.0).contains(&self.bm25.b) {
                    return bad("bm25 needs k1 > 0 and b in [0, 1]".into());
                }
            }
        }
        Ok(())
    }

    fn check_pq(&self, m: usize, k: usize) -> Result<()> {
        if m == 0 || k == 0 || self.embed_dim % m != 0 {
            return Err(Error::invalid(format!(
                "product quantization needs m, k >= 1 and m dividing embed_dim ({m}, {k}, {})",
                self.embed_dim
            )));
        }
        Ok(())
    }
}
