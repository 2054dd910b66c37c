//! Hashed TF-IDF document encoder.
//!
//! Each token id is hashed (seeded) to one of `dim` buckets with a ±1 sign.
//! The idf table is fit once on the initial corpus and frozen, the same way a
//! trained encoder would be kept fixed while new documents arrive.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenId;
use crate::io_util::{mix64, read_json, write_json};
use crate::{Error, Result};

pub const DEFAULT_DIM: usize = 256;

/// A dense vector; L2 norm is 1 unless every component is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum::<f64>() / (na * nb)
    }
}

/// Document frequencies over a fixed collection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub n_docs: u64,
    pub df: HashMap<TokenId, u64>,
}

impl IdfTable {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a [TokenId]>) -> Self {
        let mut df: HashMap<TokenId, u64> = HashMap::new();
        let mut n_docs = 0;
        for toks in docs {
            n_docs += 1;
            let mut seen: Vec<TokenId> = toks.to_vec();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        IdfTable { n_docs, df }
    }

    /// Smoothed idf, `ln((N+1)/(df+1)) + 1`; unseen tokens get the maximum.
    pub fn idf(&self, t: TokenId) -> f64 {
        let df = self.df.get(&t).copied().unwrap_or(0) as f64;
        ((self.n_docs as f64 + 1.0) / (df + 1.0)).ln() + 1.0
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        // JSON object keys must be strings; store sorted pairs instead.
        let mut pairs: Vec<(TokenId, u64)> = self.df.iter().map(|(&k, &v)| (k, v)).collect();
        pairs.sort_unstable();
        write_json(path, &IdfDump { n_docs: self.n_docs, df: pairs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let d: IdfDump = read_json(path)?;
        Ok(IdfTable {
            n_docs: d.n_docs,
            df: d.df.into_iter().collect(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct IdfDump {
    n_docs: u64,
    df: Vec<(TokenId, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedder {
    pub dim: usize,
    pub seed: u64,
    /// `None` disables idf weighting (pure term frequency).
    pub idf: Option<IdfTable>,
}

impl Embedder {
    pub fn new(dim: usize, seed: u64, idf: Option<IdfTable>) -> Result<Self> {
        if dim < 8 {
            return Err(Error::invalid(format!("embedding dim must be >= 8, got {dim}")));
        }
        Ok(Embedder { dim, seed, idf })
    }

    fn slot(&self, t: TokenId) -> (usize, f64) {
        let h = mix64(u64::from(t) ^ mix64(self.seed));
        let bucket = (h % self.dim as u64) as usize;
        let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
        (bucket, sign)
    }

    pub fn embed(&self, tokens: &[TokenId]) -> Embedding {
        let mut v = vec![0.0; self.dim];
        if tokens.is_empty() {
            return Embedding(v);
        }
        let mut tf: Vec<(TokenId, u32)> = Vec::new();
        let mut sorted = tokens.to_vec();
        sorted.sort_unstable();
        for t in sorted {
            match tf.last_mut() {
                Some((last, c)) if *last == t => *c += 1,
                _ => tf.push((t, 1)),
            }
        }
        for (t, c) in tf {
            let w = f64::from(c) * self.idf.as_ref().map_or(1.0, |idf| idf.idf(t));
            let (b, s) = self.slot(t);
            v[b] += s * w;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        Embedding(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_is_zero() {
        let e = Embedder::new(32, 1, None).unwrap();
        assert_eq!(e.embed(&[]).0, vec![0.0; 32]);
    }

    #[test]
    fn rejects_tiny_dim() {
        assert!(Embedder::new(7, 0, None).is_err());
    }

    #[test]
    fn deterministic_bits() {
        let idf = IdfTable::fit([&[1u32, 2, 3][..], &[2, 3, 4][..]]);
        let e = Embedder::new(64, 9, Some(idf)).unwrap();
        let a = e.embed(&[1, 2, 2, 5]);
        let b = e.embed(&[1, 2, 2, 5]);
        assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn unit_norm_or_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let idf = IdfTable::fit((0..20).map(|i| vec![i, i + 1, i + 2]).collect::<Vec<_>>().iter().map(|v| v.as_slice()));
        let e = Embedder::new(DEFAULT_DIM, 4, Some(idf)).unwrap();
        for _ in 0..200 {
            let n = rng.gen_range(0..40);
            let toks: Vec<u32> = (0..n).map(|_| rng.gen_range(0..500)).collect();
            let norm = e.embed(&toks).norm();
            assert!(norm.abs() < 1e-9 || (norm - 1.0).abs() < 1e-9, "{norm}");
        }
    }

    #[test]
    fn repetition_is_scale_invariant_without_idf() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = Embedder::new(128, 2, None).unwrap();
        for _ in 0..100 {
            let n = rng.gen_range(1..30);
            let t: Vec<u32> = (0..n).map(|_| rng.gen_range(0..100)).collect();
            let tt: Vec<u32> = t.iter().chain(&t).copied().collect();
            let c = e.embed(&t).cosine(&e.embed(&tt));
            assert!((c - 1.0).abs() < 1e-12, "{c}");
        }
    }

    #[test]
    fn disjoint_vocab_mean_cosine_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut sum = 0.0;
        for i in 0..1000u64 {
            let e = Embedder::new(DEFAULT_DIM, i, None).unwrap();
            let a: Vec<u32> = (0..20).map(|_| rng.gen_range(0..10_000)).collect();
            let b: Vec<u32> = (0..20).map(|_| rng.gen_range(10_000..20_000)).collect();
            sum += e.embed(&a).cosine(&e.embed(&b));
        }
        let mean = sum / 1000.0;
        assert!(mean.abs() < 0.1, "{mean}");
    }

    #[test]
    fn idf_roundtrip() {
        let idf = IdfTable::fit([&[1u32, 2][..], &[2][..]]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("idf.json");
        idf.save(&p).unwrap();
        assert_eq!(IdfTable::load(&p).unwrap(), idf);
    }
}
