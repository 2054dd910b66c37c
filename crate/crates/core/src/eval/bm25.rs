//! Okapi BM25 over an inverted index.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, TokenId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    doc_ids: Vec<String>,
    doc_len: Vec<u32>,
    avg_len: f64,
    postings: HashMap<TokenId, Vec<(u32, u32)>>,
}

impl Bm25Index {
    pub fn build(docs: &[&Document], params: Bm25Params) -> Result<Self> {
        if !(params.k1 > 0.0) || !(0.0..=1.0).contains(&params.b) {
            return Err(Error::invalid(format!("need k1 > 0 and b in [0, 1], got {params:?}")));
        }
        let mut postings: HashMap<TokenId, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            let mut tf: HashMap<TokenId, u32> = HashMap::new();
            for &t in &d.tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (t, c) in tf {
                postings.entry(t).or_default().push((i as u32, c));
            }
            doc_len.push(d.tokens.len() as u32);
        }
        let total: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
        let avg_len = if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 };
        Ok(Bm25Index {
            params,
            doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
            doc_len,
            avg_len,
            postings,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    /// Robertson idf clamped at zero.
    pub fn idf(&self, t: TokenId) -> f64 {
        let n = self.n_docs() as f64;
        let df = self.postings.get(&t).map_or(0, Vec::len) as f64;
        ((n - df + 0.5) / (df + 0.5)).ln().max(0.0)
    }

    fn term_weight(&self, tf: u32, len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let norm = if self.avg_len > 0.0 { f64::from(len) / self.avg_len } else { 0.0 };
        tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
    }

    /// Documents with a positive score, best first, ties by doc id.
    /// Repeated query terms count once.
    pub fn retrieve(&self, query: &[TokenId], top_k: usize) -> Vec<(String, f64)> {
        let terms: BTreeSet<TokenId> = query.iter().copied().collect();
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for t in terms {
            let idf = self.idf(t);
            if idf <= 0.0 {
                continue;
            }
            for &(d, tf) in self.postings.get(&t).map_or(&[][..], Vec::as_slice) {
                *acc.entry(d).or_default() += idf * self.term_weight(tf, self.doc_len[d as usize]);
            }
        }
        let mut out: Vec<(String, f64)> = acc
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(d, s)| (self.doc_ids[d as usize].clone(), s))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out.truncate(top_k);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn doc(id: &str, tokens: &[u32]) -> Document {
        let mut d = Document::new(id, "");
        d.tokens = tokens.to_vec();
        d
    }

    #[test]
    fn term_in_one_doc() {
        let a = doc("a", &[1, 2]);
        let b = doc("b", &[3, 4]);
        let c = doc("c", &[3, 5]);
        let idx = Bm25Index::build(&[&a, &b, &c], Bm25Params::default()).unwrap();
        assert_eq!(idx.retrieve(&[1], 10)[0].0, "a");
        assert!(idx.retrieve(&[9], 10).is_empty());
    }

    #[test]
    fn hand_computed() {
        // N=3, avgdl=3; term 7 in d0 (tf 2, len 4) only
        let d0 = doc("d0", &[7, 7, 1, 2]);
        let d1 = doc("d1", &[1, 2, 3]);
        let d2 = doc("d2", &[4, 5]);
        let idx = Bm25Index::build(&[&d0, &d1, &d2], Bm25Params { k1: 1.2, b: 0.75 }).unwrap();
        let idf = (2.5f64 / 1.5).ln();
        let tfw = 2.0 * 2.2 / (2.0 + 1.2 * (0.25 + 0.75 * 4.0 / 3.0));
        let got = idx.retrieve(&[7], 10);
        assert_eq!(got.len(), 1);
        assert!((got[0].1 - idf * tfw).abs() < 1e-9);
    }

    fn brute(docs: &[Document], q: &[u32], p: Bm25Params) -> Vec<(String, f64)> {
        let n = docs.len() as f64;
        let avg = docs.iter().map(|d| d.tokens.len()).sum::<usize>() as f64 / n;
        let terms: BTreeSet<u32> = q.iter().copied().collect();
        let mut out: Vec<(String, f64)> = docs
            .iter()
            .map(|d| {
                let s: f64 = terms
                    .iter()
                    .map(|&t| {
                        let df = docs.iter().filter(|x| x.tokens.contains(&t)).count() as f64;
                        let idf = ((n - df + 0.5) / (df + 0.5)).ln().max(0.0);
                        let tf = d.tokens.iter().filter(|&&x| x == t).count() as f64;
                        idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * (d.tokens.len() as f64 / avg)))
                    })
                    .sum();
                (d.id.clone(), s)
            })
            .filter(|x| x.1 > 0.0)
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    #[test]
    fn matches_brute_force_as_corpus_grows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Bm25Params::default();
        let mut docs: Vec<Document> = Vec::new();
        for i in 0..40 {
            let toks: Vec<u32> = (0..rng.gen_range(1..30)).map(|_| rng.gen_range(0..25)).collect();
            docs.push(doc(&format!("d{i:02}"), &toks));
            let refs: Vec<&Document> = docs.iter().collect();
            let idx = Bm25Index::build(&refs, p).unwrap();
            let q: Vec<u32> = (0..4).map(|_| rng.gen_range(0..25)).collect();
            let got = idx.retrieve(&q, usize::MAX);
            let want = brute(&docs, &q, p);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert_eq!(g.0, w.0);
                assert!((g.1 - w.1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bad_params() {
        assert!(Bm25Index::build(&[], Bm25Params { k1: 0.0, b: 0.5 }).is_err());
        assert!(Bm25Index::build(&[], Bm25Params { k1: 1.0, b: 1.5 }).is_err());
    }
}
