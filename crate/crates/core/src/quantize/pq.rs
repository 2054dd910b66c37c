use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans_fit, sq_dist, KMeansParams};
use crate::embed::Embedding;
use crate::io_util::{mix64, read_json, write_json};
use crate::{Error, Result};

/// A fixed-length numeric identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NumericDocid(pub Vec<u32>);

impl NumericDocid {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// Product-quantization codebook: `m` subspaces of `dim / m` components,
/// `k` centroids each. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PQCodebook {
    pub format: String,
    pub version: u32,
    pub m: usize,
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    /// Row-major `m × k × sub_dim`.
    pub centroids: Vec<f64>,
}

const FORMAT: &str = "pq-codebook";
const VERSION: u32 = 1;

impl PQCodebook {
    pub fn sub_dim(&self) -> usize {
        self.dim / self.m
    }

    pub fn centroid(&self, subspace: usize, j: usize) -> &[f64] {
        let sd = self.sub_dim();
        let at = (subspace * self.k + j) * sd;
        &self.centroids[at..at + sd]
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Nearest centroid per subspace, lowest index on ties.
    pub fn encode(&self, v: &[f64]) -> Result<NumericDocid> {
        self.check_dim(v)?;
        let sd = self.sub_dim();
        let code = (0..self.m)
            .map(|s| {
                let x = &v[s * sd..(s + 1) * sd];
                let mut best = (0u32, f64::INFINITY);
                for j in 0..self.k {
                    let d = sq_dist(self.centroid(s, j), x);
                    if d < best.1 {
                        best = (j as u32, d);
                    }
                }
                best.0
            })
            .collect();
        Ok(NumericDocid(code))
    }

    pub fn reconstruct(&self, code: &NumericDocid) -> Result<Embedding> {
        if code.len() != self.m {
            return Err(Error::DocidLength {
                expected: self.m,
                got: code.len(),
            });
        }
        let mut out = Vec::with_capacity(self.dim);
        for (s, &j) in code.0.iter().enumerate() {
            if j as usize >= self.k {
                return Err(Error::TokenOutOfRange { token: j, vocab: self.k });
            }
            out.extend_from_slice(self.centroid(s, j as usize));
        }
        Ok(Embedding(out))
    }

    /// Squared distances from each subvector of `v` to every centroid of its
    /// subspace, laid out `m × k`. Summing one entry per subspace gives the
    /// squared distance from `v` to a reconstructed code.
    pub fn distance_table(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        let sd = self.sub_dim();
        let mut table = Vec::with_capacity(self.m * self.k);
        for s in 0..self.m {
            let x = &v[s * sd..(s + 1) * sd];
            for j in 0..self.k {
                table.push(sq_dist(self.centroid(s, j), x));
            }
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cb: PQCodebook = read_json(path)?;
        if cb.format != FORMAT || cb.version != VERSION {
            return Err(Error::Format(format!("{}: expected {FORMAT} v{VERSION}", path.display())));
        }
        if cb.m == 0 || cb.dim % cb.m != 0 || cb.centroids.len() != cb.m * cb.k * cb.sub_dim() {
            return Err(Error::Format(format!("{}: inconsistent codebook shape", path.display())));
        }
        Ok(cb)
    }
}

/// Fits one k-means per subspace on the corresponding slices of `vectors`.
pub fn pq_fit(vectors: &[Vec<f64>], m: usize, k: usize, seed: u64, params: KMeansParams) -> Result<PQCodebook> {
    let dim = vectors.first().map_or(0, Vec::len);
    if m == 0 || dim == 0 || dim % m != 0 {
        return Err(Error::invalid(format!("dim {dim} is not divisible by m={m}")));
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
    }
    let sd = dim / m;
    let mut centroids = Vec::with_capacity(m * k * sd);
    let mut sub = Vec::with_capacity(vectors.len() * sd);
    for s in 0..m {
        sub.clear();
        for v in vectors {
            sub.extend_from_slice(&v[s * sd..(s + 1) * sd]);
        }
        let model = kmeans_fit(&sub, sd, k, mix64(seed ^ s as u64), params).map_err(|e| Error::Subspace {
            subspace: s,
            source: Box::new(e),
        })?;
        log::debug!("pq subspace {s}: k={k} iters={}", model.iters_run);
        centroids.extend_from_slice(&model.centroids);
    }
    Ok(PQCodebook {
        format: FORMAT.to_owned(),
        version: VERSION,
        m,
        k,
        dim,
        seed,
        centroids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::kmeans_fit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    fn quick() -> KMeansParams {
        KMeansParams { max_iters: 8, tol: 1e-6 }
    }

    #[test]
    fn centroid_concat_encodes_to_its_indices() {
        let cb = pq_fit(&random(300, 16, 1), 4, 16, 2, quick()).unwrap();
        let want = NumericDocid(vec![3, 7, 1, 9]);
        let v = cb.reconstruct(&want).unwrap();
        assert_eq!(cb.encode(&v.0).unwrap(), want);
        assert_eq!(cb.encode(&v.0).unwrap(), cb.encode(&v.0).unwrap());
    }

    #[test]
    fn zero_code_is_first_centroids() {
        let cb = pq_fit(&random(100, 8, 3), 4, 4, 0, quick()).unwrap();
        let r = cb.reconstruct(&NumericDocid(vec![0; 4])).unwrap();
        let want: Vec<f64> = (0..4).flat_map(|s| cb.centroid(s, 0).to_vec()).collect();
        assert_eq!(r.0, want);
    }

    #[test]
    fn single_subspace_is_plain_kmeans() {
        let data = random(200, 6, 4);
        let cb = pq_fit(&data, 1, 5, 11, quick()).unwrap();
        let flat: Vec<f64> = data.iter().flatten().copied().collect();
        let km = kmeans_fit(&flat, 6, 5, mix64(11), quick()).unwrap();
        for v in &data {
            assert_eq!(cb.encode(v).unwrap().0, vec![km.assign(v) as u32]);
        }
    }

    #[test]
    fn errors() {
        let data = random(50, 10, 5);
        assert!(pq_fit(&data, 4, 4, 0, quick()).is_err()); // 10 % 4 != 0
        let err = pq_fit(&data, 2, 64, 0, quick()).unwrap_err();
        assert!(matches!(err, Error::Subspace { subspace: 0, .. }), "{err}");
        let cb = pq_fit(&data, 2, 4, 0, quick()).unwrap();
        assert!(matches!(cb.encode(&[0.0; 3]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(cb.reconstruct(&NumericDocid(vec![0, 4])), Err(Error::TokenOutOfRange { .. })));
    }

    #[test]
    fn distance_table_sums_to_reconstruction_distance() {
        let data = random(100, 8, 6);
        let cb = pq_fit(&data, 2, 8, 0, quick()).unwrap();
        let v = &data[3];
        let t = cb.distance_table(v).unwrap();
        let code = NumericDocid(vec![5, 2]);
        let r = cb.reconstruct(&code).unwrap();
        let direct = sq_dist(&r.0, v);
        assert!((t[5] + t[8 + 2] - direct).abs() < 1e-12);
    }

    #[test]
    fn save_load() {
        let cb = pq_fit(&random(40, 8, 7), 2, 4, 0, quick()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cb.json");
        cb.save(&p).unwrap();
        assert_eq!(PQCodebook::load(&p).unwrap(), cb);
    }
}
