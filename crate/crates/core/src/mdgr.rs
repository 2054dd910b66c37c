//! Multi-docid generative retrieval.
//!
//! Each document is cut into overlapping chunks and every chunk receives a
//! product-quantization code as its docid, so one document owns several
//! docids and one docid may name several documents. The codebook and the set
//! of codes are fixed after the initial build: new chunks are mapped onto the
//! nearest code that already exists. Retrieval decodes a beam of codes and
//! ranks documents by `coverage + β·Σ 1/rank`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{chunk_document, Chunk, Document, TokenId};
use crate::decode::constrained_beam_search;
use crate::docid_index::{DocidKind, DocidRegistry, PrefixTree, Token};
use crate::embed::{Embedder, IdfTable};
use crate::io_util::{read_json, write_json};
use crate::quantize::{pq_fit, KMeansParams, NumericDocid, PQCodebook};
use crate::scorer::{ChunkSpec, Scorer, TargetSource};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionMode {
    /// Nearest existing code as a whole; the code set never grows.
    #[default]
    WholeCode,
    /// Each position restricted to tokens seen at that position; the
    /// combination may be new.
    PerToken,
    /// Plain PQ encoding; new codes are added.
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdgrParams {
    pub m: usize,
    pub k: usize,
    pub window: usize,
    pub stride: usize,
    pub seed: u64,
    pub kmeans: KMeansParams,
    pub expansion: ExpansionMode,
}

impl Default for MdgrParams {
    fn default() -> Self {
        MdgrParams {
            m: 4,
            k: 256,
            window: 256,
            stride: 128,
            seed: 0,
            kmeans: KMeansParams::default(),
            expansion: ExpansionMode::WholeCode,
        }
    }
}

impl MdgrParams {
    pub fn chunking(&self) -> ChunkSpec {
        ChunkSpec {
            window: self.window,
            stride: self.stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdgrIndex {
    pub params: MdgrParams,
    pub embedder: Embedder,
    pub codebook: PQCodebook,
    pub registry: DocidRegistry,
    pub tree: PrefixTree,
    pub existing_codes: BTreeSet<Vec<Token>>,
    /// Code of every chunk, in chunk order.
    pub chunk_codes: HashMap<String, Vec<Vec<Token>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub doc_id: String,
    pub score: f64,
    pub coverage: usize,
    /// Distinct contributing docids with their best beam rank, rank order.
    pub contributions: Vec<(Vec<Token>, usize)>,
}

fn chunk_vectors(doc: &Document, embedder: &Embedder, params: &MdgrParams) -> Result<Vec<(Chunk, Vec<f64>)>> {
    Ok(chunk_document(doc.tokens.len(), params.window, params.stride)?
        .into_iter()
        .map(|c| {
            let v = embedder.embed(c.tokens(&doc.tokens)).0;
            (c, v)
        })
        .collect())
}

impl MdgrIndex {
    /// Chunks, embeds and quantizes the initial documents.
    pub fn build_initial(docs: &[&Document], embedder: Embedder, params: MdgrParams) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::invalid("initial collection is empty"));
        }
        let mut owners = Vec::new();
        let mut vectors = Vec::new();
        for doc in docs {
            for (_, v) in chunk_vectors(doc, &embedder, &params)? {
                owners.push(doc.id.as_str());
                vectors.push(v);
            }
        }
        let codebook = pq_fit(&vectors, params.m, params.k, params.seed, params.kmeans)?;
        let mut index = MdgrIndex {
            params,
            embedder,
            codebook,
            registry: DocidRegistry::new(DocidKind::Numeric { len: params.m }),
            tree: PrefixTree::new(),
            existing_codes: BTreeSet::new(),
            chunk_codes: HashMap::new(),
        };
        for (owner, v) in owners.into_iter().zip(&vectors) {
            let code = index.codebook.encode(v)?.0;
            index.add_code(owner, code)?;
        }
        Ok(index)
    }

    fn add_code(&mut self, doc: &str, code: Vec<Token>) -> Result<()> {
        self.registry.insert(&code, doc)?;
        self.tree.insert(&code);
        self.existing_codes.insert(code.clone());
        self.chunk_codes.entry(doc.to_string()).or_default().push(code);
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.params.k
    }

    /// Existing code whose reconstruction is nearest to `v`; lowest code on
    /// ties. Branch-and-bound over the prefix tree with the distance table.
    pub fn nearest_existing(&self, v: &[f64]) -> Result<Vec<Token>> {
        if self.existing_codes.is_empty() {
            return Err(Error::invalid("no existing codes to expand onto"));
        }
        let table = self.codebook.distance_table(v)?;
        let k = self.params.k;
        let m = self.params.m;
        let mut best: (f64, Vec<Token>) = (f64::INFINITY, Vec::new());
        let mut prefix = Vec::with_capacity(m);
        fn walk(
            tree: &PrefixTree,
            table: &[f64],
            k: usize,
            m: usize,
            prefix: &mut Vec<Token>,
            acc: f64,
            best: &mut (f64, Vec<Token>),
        ) {
            if prefix.len() == m {
                if acc < best.0 {
                    *best = (acc, prefix.clone());
                }
                return;
            }
            let s = prefix.len();
            for t in tree.allowed_next(prefix) {
                let d = acc + table[s * k + t as usize];
                if d >= best.0 {
                    continue;
                }
                prefix.push(t);
                walk(tree, table, k, m, prefix, d, best);
                prefix.pop();
            }
        }
        walk(&self.tree, &table, k, m, &mut prefix, 0.0, &mut best);
        if best.1.is_empty() {
            // every distance was infinite or NaN; fall back to the first code
            return Ok(self.existing_codes.iter().next().unwrap().clone());
        }
        Ok(best.1)
    }

    fn per_token_code(&self, v: &[f64]) -> Result<Vec<Token>> {
        let table = self.codebook.distance_table(v)?;
        let k = self.params.k;
        (0..self.params.m)
            .map(|s| {
                let seen: BTreeSet<Token> = self.existing_codes.iter().map(|c| c[s]).collect();
                seen.into_iter()
                    .fold(None, |acc: Option<(Token, f64)>, t| {
                        let d = table[s * k + t as usize];
                        match acc {
                            Some((_, bd)) if bd <= d => acc,
                            _ => Some((t, d)),
                        }
                    })
                    .map(|(t, _)| t)
                    .ok_or_else(|| Error::invalid("no existing codes to expand onto"))
            })
            .collect()
    }

    /// Indexes new documents with the frozen codebook.
    pub fn index_new(&mut self, docs: &[&Document]) -> Result<()> {
        for doc in docs {
            for (_, v) in chunk_vectors(doc, &self.embedder, &self.params)? {
                let code = match self.params.expansion {
                    ExpansionMode::WholeCode => self.nearest_existing(&v)?,
                    ExpansionMode::PerToken => self.per_token_code(&v)?,
                    ExpansionMode::Unconstrained => self.codebook.encode(&v)?.0,
                };
                self.add_code(&doc.id, code)?;
            }
        }
        Ok(())
    }

    /// Beam-decodes codes for `query` and ranks the documents they name.
    pub fn retrieve<S: Scorer + ?Sized>(
        &self,
        scorer: &S,
        query: &[TokenId],
        beam_width: usize,
        beta: f64,
        top_k: usize,
    ) -> Result<Vec<RankedDoc>> {
        let hyps = constrained_beam_search(scorer, &self.tree, query, beam_width, self.params.m)?;
        let matches = hyps.iter().map(|h| {
            let docs: Vec<String> = self.registry.lookup(&h.tokens).map(str::to_string).collect();
            (h.tokens.clone(), h.rank, docs)
        });
        score_documents(matches, beta, top_k)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("mdgr.json"), &Header {
            params: self.params,
            embed_dim: self.embedder.dim,
            embed_seed: self.embedder.seed,
        })?;
        if let Some(idf) = &self.embedder.idf {
            idf.save(&dir.join("idf.json"))?;
        }
        self.codebook.save(&dir.join("codebook.json"))?;
        self.registry.save_jsonl(&dir.join("registry.jsonl"))?;
        write_json(&dir.join("existing_codes.json"), &self.existing_codes)?;
        let chunks: BTreeMap<&String, &Vec<Vec<Token>>> = self.chunk_codes.iter().collect();
        write_json(&dir.join("chunk_codes.json"), &chunks)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header: Header = read_json(&dir.join("mdgr.json"))?;
        let idf_path = dir.join("idf.json");
        let idf = if idf_path.exists() { Some(IdfTable::load(&idf_path)?) } else { None };
        let registry = DocidRegistry::load_jsonl(&dir.join("registry.jsonl"))?;
        let existing_codes: BTreeSet<Vec<Token>> = read_json(&dir.join("existing_codes.json"))?;
        let mut tree = PrefixTree::new();
        for code in &existing_codes {
            tree.insert(code);
        }
        Ok(MdgrIndex {
            params: header.params,
            embedder: Embedder::new(header.embed_dim, header.embed_seed, idf)?,
            codebook: PQCodebook::load(&dir.join("codebook.json"))?,
            registry,
            tree,
            existing_codes,
            chunk_codes: read_json(&dir.join("chunk_codes.json"))?,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    params: MdgrParams,
    embed_dim: usize,
    embed_seed: u64,
}

/// Ranks documents from ranked docid matches `(docid, rank, docs named)`.
/// Each distinct docid counts once per document, at its best rank.
pub fn score_documents<I>(matches: I, beta: f64, top_k: usize) -> Result<Vec<RankedDoc>>
where
    I: IntoIterator<Item = (Vec<Token>, usize, Vec<String>)>,
{
    if !(beta >= 0.0) {
        return Err(Error::invalid(format!("beta must be non-negative, got {beta}")));
    }
    let mut per_doc: HashMap<String, BTreeMap<Vec<Token>, usize>> = HashMap::new();
    for (docid, rank, docs) in matches {
        if rank == 0 {
            return Err(Error::invalid("beam ranks start at 1"));
        }
        for d in docs {
            let best = per_doc.entry(d).or_default().entry(docid.clone()).or_insert(rank);
            *best = (*best).min(rank);
        }
    }
    let mut ranked: Vec<RankedDoc> = per_doc
        .into_iter()
        .map(|(doc_id, ids)| {
            let mut contributions: Vec<(Vec<Token>, usize)> = ids.into_iter().collect();
            contributions.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            let rank_term: f64 = contributions.iter().map(|c| 1.0 / c.1 as f64).sum();
            RankedDoc {
                doc_id,
                score: contributions.len() as f64 + beta * rank_term,
                coverage: contributions.len(),
                contributions,
            }
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
    ranked.truncate(top_k);
    Ok(ranked)
}

/// Chunk-level targets: each chunk trains toward its own code.
impl TargetSource for MdgrIndex {
    fn chunk_targets(&self, doc: &Document, chunk: &Chunk, _query: &[TokenId]) -> Vec<Vec<Token>> {
        self.chunk_codes
            .get(&doc.id)
            .and_then(|codes| codes.get(chunk.index))
            .map(|c| vec![c.clone()])
            .unwrap_or_default()
    }

    fn doc_targets(&self, doc: &Document, _query: &[TokenId]) -> Vec<Vec<Token>> {
        self.registry.docids_of(&doc.id).to_vec()
    }
}

/// Nearest reconstructed code by exhaustive scan; lowest code on ties.
pub fn brute_force_nearest(codebook: &PQCodebook, codes: &BTreeSet<Vec<Token>>, v: &[f64]) -> Result<Vec<Token>> {
    let mut best: Option<(f64, &Vec<Token>)> = None;
    for code in codes {
        let r = codebook.reconstruct(&NumericDocid(code.clone()))?;
        let d: f64 = r.0.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, code));
        }
    }
    best.map(|b| b.1.clone()).ok_or_else(|| Error::invalid("no existing codes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn doc(id: &str, n: usize, seed: u64) -> Document {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = Document::new(id, "");
        d.tokens = (0..n).map(|_| rng.gen_range(0..300)).collect();
        d
    }

    fn small_params(k: usize) -> MdgrParams {
        MdgrParams {
            m: 2,
            k,
            window: 16,
            stride: 8,
            seed: 3,
            ..Default::default()
        }
    }

    fn embedder() -> Embedder {
        Embedder::new(16, 1, None).unwrap()
    }

    #[test]
    fn one_chunk_one_code() {
        let d = doc("a", 10, 1);
        let idx = MdgrIndex::build_initial(&[&d], embedder(), small_params(1)).unwrap();
        assert_eq!(idx.registry.len(), 1);
        assert_eq!(idx.registry.docids_of("a").len(), 1);
    }

    #[test]
    fn long_doc_has_up_to_three_codes() {
        let d = doc("a", 512, 2);
        let p = MdgrParams {
            window: 256,
            stride: 128,
            ..small_params(3)
        };
        let idx = MdgrIndex::build_initial(&[&d], embedder(), p).unwrap();
        let distinct: BTreeSet<_> = idx.chunk_codes["a"].iter().collect();
        assert_eq!(idx.chunk_codes["a"].len(), 3);
        assert_eq!(idx.registry.docids_of("a").len(), distinct.len());
        for code in idx.registry.docids() {
            assert_eq!(code.len(), 2);
            assert!(code.iter().all(|&t| t < 3));
        }
    }

    #[test]
    fn whole_code_expansion_is_frozen_and_nearest() {
        let init: Vec<Document> = (0..30).map(|i| doc(&format!("d{i}"), 40, i)).collect();
        let refs: Vec<&Document> = init.iter().collect();
        let mut idx = MdgrIndex::build_initial(&refs, embedder(), small_params(8)).unwrap();
        let tree = idx.tree.clone();
        let codes = idx.existing_codes.clone();

        let mut twin = doc("twin", 0, 0);
        twin.tokens = init[4].tokens[..16].to_vec();
        let fresh: Vec<Document> = (0..40).map(|i| doc(&format!("n{i}"), 30, 100 + i)).collect();
        let mut new_refs: Vec<&Document> = fresh.iter().collect();
        new_refs.push(&twin);
        idx.index_new(&new_refs).unwrap();

        assert_eq!(idx.tree, tree);
        assert_eq!(idx.existing_codes, codes);
        assert_eq!(idx.chunk_codes["twin"][0], idx.chunk_codes["d4"][0]);
        for d in &fresh {
            for ((_, v), code) in chunk_vectors(d, &idx.embedder, &idx.params).unwrap().iter().zip(&idx.chunk_codes[&d.id]) {
                assert_eq!(code, &brute_force_nearest(&idx.codebook, &codes, v).unwrap());
            }
        }
    }

    #[test]
    fn other_expansion_modes() {
        let init: Vec<Document> = (0..10).map(|i| doc(&format!("d{i}"), 40, i)).collect();
        let refs: Vec<&Document> = init.iter().collect();
        let fresh = doc("n", 60, 77);
        for mode in [ExpansionMode::PerToken, ExpansionMode::Unconstrained] {
            let p = MdgrParams {
                expansion: mode,
                ..small_params(8)
            };
            let mut idx = MdgrIndex::build_initial(&refs, embedder(), p).unwrap();
            let before: Vec<BTreeSet<Token>> = (0..2).map(|s| idx.existing_codes.iter().map(|c| c[s]).collect()).collect();
            idx.index_new(&[&fresh]).unwrap();
            for code in &idx.chunk_codes["n"] {
                assert!(idx.tree.contains(code));
                if mode == ExpansionMode::PerToken {
                    assert!((0..2).all(|s| before[s].contains(&code[s])));
                }
            }
        }
    }

    #[test]
    fn score_formula() {
        let m = vec![(vec![1], 1, vec!["a".to_string()]), (vec![2], 2, vec!["a".to_string(), "b".to_string()])];
        let out = score_documents(m.clone(), 1.0, 10).unwrap();
        assert_eq!(out[0].doc_id, "a");
        assert_eq!(out[0].score, 3.5);
        assert_eq!(out[1].score, 1.5);
        let out = score_documents(m, 0.0, 10).unwrap();
        assert_eq!((out[0].score, out[1].score), (2.0, 1.0));
        assert!(score_documents(Vec::new(), -1.0, 10).is_err());
    }

    #[test]
    fn extra_match_never_lowers_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.gen_range(1..10);
            let mut m: Vec<(Vec<Token>, usize, Vec<String>)> = (0..n).map(|i| (vec![i as u32], i + 1, vec![format!("d{}", rng.gen_range(0..4))])).collect();
            let beta = rng.gen_range(0.0..3.0);
            let before = score_documents(m.clone(), beta, 100).unwrap();
            m.push((vec![99], n + 1, vec!["d0".to_string()]));
            let after = score_documents(m, beta, 100).unwrap();
            let get = |v: &[RankedDoc]| v.iter().find(|r| r.doc_id == "d0").map_or(0.0, |r| r.score);
            assert!(get(&after) > get(&before));
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let init: Vec<Document> = (0..10).map(|i| doc(&format!("d{i}"), 40, i)).collect();
        let refs: Vec<&Document> = init.iter().collect();
        let idx = MdgrIndex::build_initial(&refs, embedder(), small_params(4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        idx.save(dir.path()).unwrap();
        let back = MdgrIndex::load(dir.path()).unwrap();
        assert_eq!(back.existing_codes, idx.existing_codes);
        assert_eq!(back.tree.paths(), idx.tree.paths());
        assert_eq!(back.codebook, idx.codebook);
        assert_eq!(back.chunk_codes, idx.chunk_codes);
    }
}
