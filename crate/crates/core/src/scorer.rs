//! Autoregressive docid scoring.
//!
//! [`Scorer`] is the contract decoding relies on: a normalized distribution
//! over the next docid token given the query and the prefix generated so far.
//! [`ReferenceScorer`] fills that contract with smoothed counts
//! `(count + λ) / (total + λ·K)`, keyed by (hashed query token, prefix
//! position, previous token). Each query token yields one such distribution
//! and the query's prediction is their equal-weight mixture.

use std::collections::HashMap;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{chunk_document, Chunk, Corpus, Document, DynamicPlan, TokenId};
use crate::docid_index::{DocidRegistry, Token};
use crate::io_util::{mix64, write_atomic};
use crate::{Error, Result};

pub trait Scorer {
    fn vocab_size(&self) -> usize;

    /// `ln P(z_t | z_<t, q)` for every token of the vocabulary.
    fn next_logprobs(&self, query: &[TokenId], prefix: &[Token]) -> Vec<f64>;

    /// Log-probabilities of selected next tokens. Must agree exactly with
    /// [`next_logprobs`](Self::next_logprobs).
    fn logprobs_for(&self, query: &[TokenId], prefix: &[Token], tokens: &[Token]) -> Vec<f64> {
        let all = self.next_logprobs(query, prefix);
        tokens.iter().map(|&t| all[t as usize]).collect()
    }
}

/// `Σ_t ln P(z_t | z_<t, q)`.
pub fn sequence_logprob<S: Scorer + ?Sized>(scorer: &S, query: &[TokenId], docid: &[Token]) -> f64 {
    (0..docid.len())
        .map(|t| scorer.logprobs_for(query, &docid[..t], &docid[t..=t])[0])
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformScorer {
    pub vocab_size: usize,
}

impl Scorer for UniformScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, _query: &[TokenId], _prefix: &[Token]) -> Vec<f64> {
        vec![-(self.vocab_size as f64).ln(); self.vocab_size]
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_logprobs(&self, query: &[TokenId], prefix: &[Token]) -> Vec<f64> {
        (**self).next_logprobs(query, prefix)
    }
    fn logprobs_for(&self, query: &[TokenId], prefix: &[Token], tokens: &[Token]) -> Vec<f64> {
        (**self).logprobs_for(query, prefix, tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrainingPair {
    pub query: Vec<TokenId>,
    pub target: Vec<Token>,
    pub weight: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub lambda: f64,
    pub buckets: u32,
    pub seed: u64,
}

impl Default for ScorerParams {
    fn default() -> Self {
        ScorerParams {
            lambda: 0.1,
            buckets: 4096,
            seed: 0,
        }
    }
}

const BOS: Token = Token::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Context {
    bucket: u32,
    pos: u32,
    prev: Token,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Counts {
    total: u64,
    /// Sorted by token.
    entries: Vec<(Token, u64)>,
}

impl Counts {
    fn get(&self, t: Token) -> u64 {
        self.entries
            .binary_search_by_key(&t, |e| e.0)
            .map_or(0, |i| self.entries[i].1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceScorer {
    vocab_size: usize,
    params: ScorerParams,
    table: HashMap<Context, Counts>,
}

impl ReferenceScorer {
    pub fn params(&self) -> ScorerParams {
        self.params
    }

    fn bucket(&self, q: TokenId) -> u32 {
        (mix64(u64::from(q) ^ mix64(self.params.seed)) % u64::from(self.params.buckets)) as u32
    }

    /// One entry per query token; `None` where the context was never seen.
    fn contexts(&self, query: &[TokenId], prefix: &[Token]) -> Vec<Option<&Counts>> {
        let pos = prefix.len() as u32;
        let prev = prefix.last().copied().unwrap_or(BOS);
        query
            .iter()
            .map(|&q| {
                self.table.get(&Context {
                    bucket: self.bucket(q),
                    pos,
                    prev,
                })
            })
            .collect()
    }

    fn denominator(&self, c: Option<&Counts>) -> f64 {
        c.map_or(0, |c| c.total) as f64 + self.params.lambda * self.vocab_size as f64
    }

    /// Largest total of any single context.
    pub fn max_context_total(&self) -> u64 {
        self.table.values().map(|c| c.total).max().unwrap_or(0)
    }

    pub fn n_contexts(&self) -> usize {
        self.table.len()
    }

    fn sorted(&self) -> Vec<(&Context, &Counts)> {
        let mut v: Vec<_> = self.table.iter().collect();
        v.sort_by_key(|e| e.0);
        v
    }

    /// Canonical binary image: header then contexts in sorted order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.write_u32::<LE>(VERSION).unwrap();
        b.write_u64::<LE>(self.vocab_size as u64).unwrap();
        b.write_f64::<LE>(self.params.lambda).unwrap();
        b.write_u32::<LE>(self.params.buckets).unwrap();
        b.write_u64::<LE>(self.params.seed).unwrap();
        let entries = self.sorted();
        b.write_u64::<LE>(entries.len() as u64).unwrap();
        for (ctx, counts) in entries {
            b.write_u32::<LE>(ctx.bucket).unwrap();
            b.write_u32::<LE>(ctx.pos).unwrap();
            b.write_u32::<LE>(ctx.prev).unwrap();
            b.write_u64::<LE>(counts.total).unwrap();
            b.write_u32::<LE>(counts.entries.len() as u32).unwrap();
            for &(t, c) in &counts.entries {
                b.write_u32::<LE>(t).unwrap();
                b.write_u64::<LE>(c).unwrap();
            }
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("scorer: {m}"));
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.read_u32::<LE>()?;
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let vocab_size = r.read_u64::<LE>()? as usize;
        let lambda = r.read_f64::<LE>()?;
        let buckets = r.read_u32::<LE>()?;
        let seed = r.read_u64::<LE>()?;
        let n = r.read_u64::<LE>()? as usize;
        let mut table = HashMap::with_capacity(n);
        for _ in 0..n {
            let ctx = Context {
                bucket: r.read_u32::<LE>()?,
                pos: r.read_u32::<LE>()?,
                prev: r.read_u32::<LE>()?,
            };
            let total = r.read_u64::<LE>()?;
            let m = r.read_u32::<LE>()? as usize;
            let mut entries = Vec::with_capacity(m);
            for _ in 0..m {
                entries.push((r.read_u32::<LE>()?, r.read_u64::<LE>()?));
            }
            table.insert(ctx, Counts { total, entries });
        }
        Ok(ReferenceScorer {
            vocab_size,
            params: ScorerParams { lambda, buckets, seed },
            table,
        })
    }

    /// SHA-256 of the canonical image, hex encoded.
    pub fn state_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

const MAGIC: &[u8; 8] = b"DGRSCOR\0";
const VERSION: u32 = 1;

impl Scorer for ReferenceScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, query: &[TokenId], prefix: &[Token]) -> Vec<f64> {
        let k = self.vocab_size;
        if query.is_empty() {
            return vec![-(k as f64).ln(); k];
        }
        let lambda = self.params.lambda;
        let mut acc = vec![0.0; k];
        let mut row = vec![0u64; k];
        for c in self.contexts(query, prefix) {
            let denom = self.denominator(c);
            if let Some(c) = c {
                for &(t, n) in &c.entries {
                    row[t as usize] = n;
                }
            }
            for (a, r) in acc.iter_mut().zip(&row) {
                *a += (*r as f64 + lambda) / denom;
            }
            if let Some(c) = c {
                for &(t, _) in &c.entries {
                    row[t as usize] = 0;
                }
            }
        }
        let n = query.len() as f64;
        acc.into_iter().map(|p| (p / n).ln()).collect()
    }

    fn logprobs_for(&self, query: &[TokenId], prefix: &[Token], tokens: &[Token]) -> Vec<f64> {
        if query.is_empty() {
            return vec![-(self.vocab_size as f64).ln(); tokens.len()];
        }
        let lambda = self.params.lambda;
        let ctxs = self.contexts(query, prefix);
        let denoms: Vec<f64> = ctxs.iter().map(|&c| self.denominator(c)).collect();
        let n = query.len() as f64;
        tokens
            .iter()
            .map(|&t| {
                let mut p = 0.0;
                for (c, d) in ctxs.iter().zip(&denoms) {
                    p += (c.map_or(0, |c| c.get(t)) as f64 + lambda) / d;
                }
                (p / n).ln()
            })
            .collect()
    }
}

/// Accumulates smoothed next-token counts from training pairs. Pure counting
/// over integers, so pair order does not matter.
pub fn train_reference_scorer(pairs: &[TrainingPair], vocab_size: usize, params: ScorerParams) -> Result<ReferenceScorer> {
    if vocab_size == 0 {
        return Err(Error::invalid("vocabulary size must be positive"));
    }
    if !(params.lambda > 0.0) {
        return Err(Error::invalid("smoothing lambda must be positive"));
    }
    if params.buckets == 0 {
        return Err(Error::invalid("bucket count must be positive"));
    }
    let mut scorer = ReferenceScorer {
        vocab_size,
        params,
        table: HashMap::new(),
    };
    let mut acc: HashMap<Context, HashMap<Token, u64>> = HashMap::new();
    for p in pairs {
        if let Some(&t) = p.target.iter().find(|&&t| t as usize >= vocab_size) {
            return Err(Error::TokenOutOfRange { token: t, vocab: vocab_size });
        }
        let w = u64::from(p.weight);
        if w == 0 {
            continue;
        }
        for &q in &p.query {
            let bucket = scorer.bucket(q);
            for (pos, &t) in p.target.iter().enumerate() {
                let prev = if pos == 0 { BOS } else { p.target[pos - 1] };
                let ctx = Context {
                    bucket,
                    pos: pos as u32,
                    prev,
                };
                *acc.entry(ctx).or_default().entry(t).or_default() += w;
            }
        }
    }
    scorer.table = acc
        .into_iter()
        .map(|(ctx, m)| {
            let mut entries: Vec<(Token, u64)> = m.into_iter().collect();
            entries.sort_unstable();
            let total = entries.iter().map(|e| e.1).sum();
            (ctx, Counts { total, entries })
        })
        .collect();
    Ok(scorer)
}

/// Where training targets come from for a document.
pub trait TargetSource {
    /// Docids a chunk of `doc` should map to, given the (pseudo-)query drawn
    /// from it.
    fn chunk_targets(&self, doc: &Document, chunk: &Chunk, query: &[TokenId]) -> Vec<Vec<Token>>;

    /// Docids a real query relevant to `doc` should map to.
    fn doc_targets(&self, doc: &Document, query: &[TokenId]) -> Vec<Vec<Token>>;
}

/// Document-level targets: every chunk maps to all of the document's docids.
impl TargetSource for DocidRegistry {
    fn chunk_targets(&self, doc: &Document, _chunk: &Chunk, _query: &[TokenId]) -> Vec<Vec<Token>> {
        self.docids_of(&doc.id).to_vec()
    }

    fn doc_targets(&self, doc: &Document, _query: &[TokenId]) -> Vec<Vec<Token>> {
        self.docids_of(&doc.id).to_vec()
    }
}

/// Chunking used when building training pairs; `None` treats each document
/// as a single chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpec {
    pub window: usize,
    pub stride: usize,
}

pub fn chunks_of(doc: &Document, spec: Option<ChunkSpec>) -> Result<Vec<Chunk>> {
    match spec {
        Some(s) => chunk_document(doc.tokens.len(), s.window, s.stride),
        None => {
            let n = doc.tokens.len();
            chunk_document(n, n.max(1), n.max(1))
        }
    }
}

/// Three-part training data over the initial corpus:
/// (i) the leading `pseudo_query_len` tokens of each chunk, (ii) the full
/// chunk, (iii) real training queries paired with their relevant documents.
pub fn build_training_pairs(
    plan: &DynamicPlan,
    corpus: &Corpus,
    source: &dyn TargetSource,
    chunking: Option<ChunkSpec>,
    pseudo_query_len: usize,
) -> Result<Vec<TrainingPair>> {
    let mut pairs = Vec::new();
    let push = |pairs: &mut Vec<TrainingPair>, q: &[TokenId], targets: Vec<Vec<Token>>| {
        for target in targets {
            pairs.push(TrainingPair {
                query: q.to_vec(),
                target,
                weight: 1,
            });
        }
    };
    for id in &plan.d_sets[0] {
        let doc = corpus
            .docs
            .get(id)
            .ok_or_else(|| Error::invalid(format!("plan names unknown document {id:?}")))?;
        for chunk in chunks_of(doc, chunking)? {
            let toks = chunk.tokens(&doc.tokens);
            let pseudo = &toks[..toks.len().min(pseudo_query_len)];
            push(&mut pairs, pseudo, source.chunk_targets(doc, &chunk, pseudo));
            push(&mut pairs, toks, source.chunk_targets(doc, &chunk, toks));
        }
    }
    for p in &plan.train_pairs {
        let (Some(q), Some(doc)) = (corpus.queries.get(&p.query_id), corpus.docs.get(&p.doc_id)) else {
            return Err(Error::invalid(format!("training pair {}/{} does not resolve", p.query_id, p.doc_id)));
        };
        push(&mut pairs, &q.tokens, source.doc_targets(doc, &q.tokens));
    }
    Ok(pairs)
}
