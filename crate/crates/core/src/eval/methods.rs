//! The retrieval methods compared by the experiment runner, behind one
//! build / train / add / retrieve surface.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bm25::Bm25Index;
use super::config::{ExperimentConfig, Method, ScorerKind};
use super::run::RetrievalRun;
use crate::corpus::{Chunk, Corpus, Document, DynamicPlan, TokenId, Vocabulary};
use crate::decode::{constrained_beam_search, FMIndex, FmConstraint};
use crate::docid_index::{DocidKind, DocidRegistry, PrefixTree, Token};
use crate::embed::{Embedder, IdfTable};
use crate::io_util::{mix64, read_json, write_json};
use crate::mdgr::{score_documents, MdgrIndex, MdgrParams, RankedDoc};
use crate::quantize::{hierarchical_docids, pq_fit, HierarchicalParams, HierarchicalTree, PQCodebook};
use crate::scorer::{
    build_training_pairs, train_reference_scorer, ChunkSpec, ReferenceScorer, ScorerParams, TargetSource,
    TrainingPair,
};
use crate::{Error, Result};

/// N-gram targets: the leading `max_len` bytes of every query word that
/// occurs in the document and is at least that long.
pub struct NgramSource<'a> {
    pub vocab: &'a Vocabulary,
    pub max_len: usize,
    pub cap: usize,
}

impl NgramSource<'_> {
    fn targets(&self, doc: &Document, query: &[TokenId]) -> Vec<Vec<Token>> {
        let present: BTreeSet<TokenId> = doc.tokens.iter().copied().collect();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &q in query {
            if out.len() >= self.cap {
                break;
            }
            if !present.contains(&q) || !seen.insert(q) {
                continue;
            }
            let Some(word) = self.vocab.word(q) else { continue };
            if word.len() >= self.max_len {
                out.push(word.as_bytes()[..self.max_len].iter().map(|&b| Token::from(b)).collect());
            }
        }
        out
    }
}

impl TargetSource for NgramSource<'_> {
    fn chunk_targets(&self, doc: &Document, _chunk: &Chunk, query: &[TokenId]) -> Vec<Vec<Token>> {
        self.targets(doc, query)
    }

    fn doc_targets(&self, doc: &Document, query: &[TokenId]) -> Vec<Vec<Token>> {
        self.targets(doc, query)
    }
}

#[derive(Debug, Clone)]
pub enum IndexState {
    HierKmeans {
        embedder: Embedder,
        tree: HierarchicalTree,
        registry: DocidRegistry,
        prefix: PrefixTree,
    },
    Pq {
        embedder: Embedder,
        codebook: PQCodebook,
        registry: DocidRegistry,
        prefix: PrefixTree,
    },
    NgramFm {
        fm: FMIndex,
    },
    Mdgr(Box<MdgrIndex>),
    Bm25,
}

/// A method's indexing structures plus the documents indexed so far.
#[derive(Debug, Clone)]
pub struct MethodIndex {
    pub method: Method,
    pub stage: usize,
    pub indexed: Vec<String>,
    pub state: IndexState,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    method: Method,
    stage: usize,
    indexed: Vec<String>,
    embed_dim: usize,
    embed_seed: u64,
}

fn docs<'a>(corpus: &'a Corpus, ids: &[String]) -> Result<Vec<&'a Document>> {
    ids.iter()
        .map(|id| corpus.docs.get(id).ok_or_else(|| Error::invalid(format!("unknown document {id:?}"))))
        .collect()
}

fn fm_over(docs: &[&Document]) -> Result<FMIndex> {
    FMIndex::build(docs.iter().map(|d| (d.id.clone(), d.normalized_text().into_bytes())))
}

fn register_all(registry: &mut DocidRegistry, prefix: &mut PrefixTree, doc: &str, code: &[Token]) -> Result<()> {
    registry.insert(code, doc)?;
    prefix.insert(code);
    Ok(())
}

impl MethodIndex {
    fn embedder(cfg: &ExperimentConfig, initial: &[&Document]) -> Result<Embedder> {
        let idf = IdfTable::fit(initial.iter().map(|d| d.tokens.as_slice()));
        Embedder::new(cfg.embed_dim, mix64(cfg.seed ^ 0xE), Some(idf))
    }

    /// Indexes the initial documents.
    pub fn build(cfg: &ExperimentConfig, corpus: &Corpus, plan: &DynamicPlan) -> Result<Self> {
        let initial_ids = &plan.d_sets[0];
        let initial = docs(corpus, initial_ids)?;
        let state = match cfg.method {
            Method::HierKmeans => {
                let embedder = Self::embedder(cfg, &initial)?;
                let vecs: Vec<(String, Vec<f64>)> = initial.iter().map(|d| (d.id.clone(), embedder.embed(&d.tokens).0)).collect();
                let tree = hierarchical_docids(
                    &vecs,
                    HierarchicalParams {
                        branching: cfg.hier.branching,
                        leaf_threshold: cfg.hier.leaf_threshold,
                        seed: cfg.seed,
                        kmeans: cfg.kmeans,
                    },
                )?;
                let mut registry = DocidRegistry::new(DocidKind::Numeric { len: tree.docid_len() });
                let mut prefix = PrefixTree::new();
                for d in &initial {
                    let code = tree.docids[&d.id].0.clone();
                    register_all(&mut registry, &mut prefix, &d.id, &code)?;
                }
                IndexState::HierKmeans {
                    embedder,
                    tree,
                    registry,
                    prefix,
                }
            }
            Method::Pq => {
                let embedder = Self::embedder(cfg, &initial)?;
                let vecs: Vec<Vec<f64>> = initial.iter().map(|d| embedder.embed(&d.tokens).0).collect();
                let codebook = pq_fit(&vecs, cfg.pq.m, cfg.pq.k, cfg.seed, cfg.kmeans)?;
                let mut registry = DocidRegistry::new(DocidKind::Numeric { len: cfg.pq.m });
                let mut prefix = PrefixTree::new();
                for (d, v) in initial.iter().zip(&vecs) {
                    register_all(&mut registry, &mut prefix, &d.id, &codebook.encode(v)?.0)?;
                }
                IndexState::Pq {
                    embedder,
                    codebook,
                    registry,
                    prefix,
                }
            }
            Method::NgramFm => IndexState::NgramFm { fm: fm_over(&initial)? },
            Method::Mdgr => {
                let embedder = Self::embedder(cfg, &initial)?;
                let params = MdgrParams {
                    m: cfg.mdgr.m,
                    k: cfg.mdgr.k,
                    window: cfg.mdgr.window,
                    stride: cfg.mdgr.stride,
                    seed: cfg.seed,
                    kmeans: cfg.kmeans,
                    expansion: cfg.mdgr.expansion,
                };
                IndexState::Mdgr(Box::new(MdgrIndex::build_initial(&initial, embedder, params)?))
            }
            Method::Bm25 => IndexState::Bm25,
        };
        Ok(MethodIndex {
            method: cfg.method,
            stage: 0,
            indexed: initial_ids.clone(),
            state,
        })
    }

    /// Indexes one more increment without touching any learned parameters.
    pub fn add(&mut self, corpus: &Corpus, ids: &[String]) -> Result<()> {
        let new = docs(corpus, ids)?;
        match &mut self.state {
            IndexState::HierKmeans {
                embedder,
                tree,
                registry,
                prefix,
            } => {
                for d in &new {
                    let code = tree.insert_new(&d.id, &embedder.embed(&d.tokens).0)?;
                    register_all(registry, prefix, &d.id, &code.0)?;
                }
            }
            IndexState::Pq {
                embedder,
                codebook,
                registry,
                prefix,
            } => {
                for d in &new {
                    let code = codebook.encode(&embedder.embed(&d.tokens).0)?;
                    register_all(registry, prefix, &d.id, &code.0)?;
                }
            }
            IndexState::NgramFm { fm } => {
                let mut all = docs(corpus, &self.indexed)?;
                all.extend(new.iter().copied());
                *fm = fm_over(&all)?;
            }
            IndexState::Mdgr(index) => index.index_new(&new)?,
            IndexState::Bm25 => {}
        }
        self.indexed.extend(ids.iter().cloned());
        self.stage += 1;
        Ok(())
    }

    pub fn scorer_vocab(&self) -> Option<usize> {
        match &self.state {
            IndexState::HierKmeans { tree, .. } => Some(tree.vocab_size()),
            IndexState::Pq { codebook, .. } => Some(codebook.k),
            IndexState::NgramFm { .. } => Some(256),
            IndexState::Mdgr(index) => Some(index.vocab_size()),
            IndexState::Bm25 => None,
        }
    }

    pub fn training_pairs(&self, cfg: &ExperimentConfig, corpus: &Corpus, plan: &DynamicPlan) -> Result<Vec<TrainingPair>> {
        let t = &cfg.training;
        let chunking = ChunkSpec {
            window: t.window,
            stride: t.stride,
        };
        match &self.state {
            IndexState::HierKmeans { registry, .. } | IndexState::Pq { registry, .. } => {
                build_training_pairs(plan, corpus, registry, Some(chunking), t.pseudo_query_len)
            }
            IndexState::NgramFm { .. } => {
                let source = NgramSource {
                    vocab: &corpus.vocab,
                    max_len: cfg.ngram.max_len,
                    cap: cfg.ngram.targets_per_pair,
                };
                build_training_pairs(plan, corpus, &source, Some(chunking), t.pseudo_query_len)
            }
            IndexState::Mdgr(index) => {
                build_training_pairs(plan, corpus, index.as_ref(), Some(index.params.chunking()), t.pseudo_query_len)
            }
            IndexState::Bm25 => Ok(Vec::new()),
        }
    }

    /// Fits the docid scorer on the initial collection; `None` for methods
    /// without one.
    pub fn train(&self, cfg: &ExperimentConfig, corpus: &Corpus, plan: &DynamicPlan) -> Result<Option<ReferenceScorer>> {
        let Some(vocab) = self.scorer_vocab() else {
            return Ok(None);
        };
        let pairs = match cfg.training.scorer {
            ScorerKind::Reference => self.training_pairs(cfg, corpus, plan)?,
            ScorerKind::Uniform => Vec::new(),
        };
        let params = ScorerParams {
            lambda: cfg.training.lambda,
            buckets: cfg.training.buckets,
            seed: cfg.seed,
        };
        Ok(Some(train_reference_scorer(&pairs, vocab, params)?))
    }

    fn numeric_matches(
        registry: &DocidRegistry,
        prefix: &PrefixTree,
        scorer: &ReferenceScorer,
        query: &[TokenId],
        cfg: &ExperimentConfig,
        len: usize,
    ) -> Result<Vec<RankedDoc>> {
        let hyps = constrained_beam_search(scorer, prefix, query, cfg.beam_width, len)?;
        score_documents(
            hyps.into_iter().map(|h| {
                let docs = registry.lookup(&h.tokens).map(str::to_string).collect();
                (h.tokens, h.rank, docs)
            }),
            cfg.beta,
            cfg.top_k,
        )
    }

    /// Ranks indexed documents for each query id.
    pub fn retrieve(&self, cfg: &ExperimentConfig, corpus: &Corpus, scorer: Option<&ReferenceScorer>, query_ids: &[String]) -> Result<RetrievalRun> {
        let mut run = RetrievalRun::new(self.method.name(), self.stage);
        let bm25 = match self.state {
            IndexState::Bm25 => Some(Bm25Index::build(&docs(corpus, &self.indexed)?, cfg.bm25)?),
            _ => None,
        };
        let need = || Error::MissingArtifact {
            path: "scorer.bin".into(),
            needs: "train",
        };
        for qid in query_ids {
            let q = corpus
                .queries
                .get(qid)
                .ok_or_else(|| Error::invalid(format!("unknown query {qid:?}")))?;
            let ranked: Vec<(String, f64)> = match &self.state {
                IndexState::Bm25 => bm25.as_ref().unwrap().retrieve(&q.tokens, cfg.top_k),
                state => {
                    let scorer = scorer.ok_or_else(need)?;
                    let docs = match state {
                        IndexState::HierKmeans { tree, registry, prefix, .. } => {
                            Self::numeric_matches(registry, prefix, scorer, &q.tokens, cfg, tree.docid_len())?
                        }
                        IndexState::Pq { codebook, registry, prefix, .. } => {
                            Self::numeric_matches(registry, prefix, scorer, &q.tokens, cfg, codebook.m)?
                        }
                        IndexState::NgramFm { fm } => {
                            let constraint = FmConstraint {
                                index: fm,
                                max_len: cfg.ngram.max_len,
                            };
                            let hyps = constrained_beam_search(scorer, &constraint, &q.tokens, cfg.beam_width, cfg.ngram.max_len)?;
                            let mut matches = Vec::with_capacity(hyps.len());
                            for h in hyps {
                                let bytes: Vec<u8> = h.tokens.iter().map(|&t| t as u8).collect();
                                let found: BTreeSet<usize> = fm.locate(&bytes, cfg.ngram.locate_limit)?.into_iter().map(|o| o.doc).collect();
                                let docs = found.into_iter().map(|d| fm.doc_id(d).to_string()).collect();
                                matches.push((h.tokens, h.rank, docs));
                            }
                            score_documents(matches, cfg.beta, cfg.top_k)?
                        }
                        IndexState::Mdgr(index) => index.retrieve(scorer, &q.tokens, cfg.beam_width, cfg.beta, cfg.top_k)?,
                        IndexState::Bm25 => unreachable!(),
                    };
                    docs.into_iter().map(|r| (r.doc_id, r.score)).collect()
                }
            };
            run.queries.insert(qid.clone(), ranked);
        }
        Ok(run)
    }

    /// The docid registry used for vocabulary statistics. N-gram docids are
    /// represented by the word trigrams of the indexed documents.
    pub fn docid_registry(&self, corpus: &Corpus) -> Result<Option<DocidRegistry>> {
        Ok(match &self.state {
            IndexState::HierKmeans { registry, .. } | IndexState::Pq { registry, .. } => Some(registry.clone()),
            IndexState::Mdgr(index) => Some(index.registry.clone()),
            IndexState::NgramFm { .. } => {
                let mut reg = DocidRegistry::new(DocidKind::Text);
                for d in docs(corpus, &self.indexed)? {
                    for g in d.tokens.chunks(3) {
                        reg.insert(g, &d.id)?;
                    }
                }
                Some(reg)
            }
            IndexState::Bm25 => None,
        })
    }

    /// Renders a docid token as a word: vocabulary words for n-grams,
    /// decimal strings for numeric codes.
    pub fn token_word(&self, corpus: &Corpus, t: Token) -> String {
        match self.state {
            IndexState::NgramFm { .. } => corpus.vocab.word(t).unwrap_or("").to_string(),
            _ => t.to_string(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let (embed_dim, embed_seed) = match &self.state {
            IndexState::HierKmeans { embedder, .. } | IndexState::Pq { embedder, .. } => (embedder.dim, embedder.seed),
            IndexState::Mdgr(index) => (index.embedder.dim, index.embedder.seed),
            _ => (0, 0),
        };
        match &self.state {
            IndexState::HierKmeans { embedder, tree, registry, .. } => {
                embedder.idf.as_ref().map(|i| i.save(&dir.join("idf.json"))).transpose()?;
                write_json(&dir.join("hier.json"), tree)?;
                registry.save_jsonl(&dir.join("registry.jsonl"))?;
            }
            IndexState::Pq { embedder, codebook, registry, .. } => {
                embedder.idf.as_ref().map(|i| i.save(&dir.join("idf.json"))).transpose()?;
                codebook.save(&dir.join("codebook.json"))?;
                registry.save_jsonl(&dir.join("registry.jsonl"))?;
            }
            IndexState::NgramFm { fm } => fm.save(&dir.join("fm.bin"))?,
            IndexState::Mdgr(index) => index.save(&dir.join("mdgr"))?,
            IndexState::Bm25 => {}
        }
        // written last: its presence marks a complete index
        write_json(
            &dir.join("state.json"),
            &StateFile {
                method: self.method,
                stage: self.stage,
                indexed: self.indexed.clone(),
                embed_dim,
                embed_seed,
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let state_path = dir.join("state.json");
        if !state_path.exists() {
            return Err(Error::MissingArtifact {
                path: state_path,
                needs: "build",
            });
        }
        let s: StateFile = read_json(&state_path)?;
        let embedder = || -> Result<Embedder> {
            let idf_path = dir.join("idf.json");
            let idf = if idf_path.exists() { Some(IdfTable::load(&idf_path)?) } else { None };
            Embedder::new(s.embed_dim, s.embed_seed, idf)
        };
        let state = match s.method {
            Method::HierKmeans => {
                let registry = DocidRegistry::load_jsonl(&dir.join("registry.jsonl"))?;
                IndexState::HierKmeans {
                    embedder: embedder()?,
                    tree: read_json(&dir.join("hier.json"))?,
                    prefix: registry.build_tree(),
                    registry,
                }
            }
            Method::Pq => {
                let registry = DocidRegistry::load_jsonl(&dir.join("registry.jsonl"))?;
                IndexState::Pq {
                    embedder: embedder()?,
                    codebook: PQCodebook::load(&dir.join("codebook.json"))?,
                    prefix: registry.build_tree(),
                    registry,
                }
            }
            Method::NgramFm => IndexState::NgramFm {
                fm: FMIndex::load(&dir.join("fm.bin"))?,
            },
            Method::Mdgr => IndexState::Mdgr(Box::new(MdgrIndex::load(&dir.join("mdgr"))?)),
            Method::Bm25 => IndexState::Bm25,
        };
        Ok(MethodIndex {
            method: s.method,
            stage: s.stage,
            indexed: s.indexed,
            state,
        })
    }
}
