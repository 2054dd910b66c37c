use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Squared Euclidean distance. Four independent accumulators let the
/// compiler vectorize the loop.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            let d = x[i] - y[i];
            acc[i] += d * d;
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        s += d * d;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub max_iters: usize,
    /// Stop once no centroid moves further than this.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            max_iters: 50,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub dim: usize,
    /// Row-major `k × dim`.
    pub centroids: Vec<f64>,
    pub seed: u64,
    pub iters_run: usize,
    /// Inertia measured at each assignment step.
    #[serde(default)]
    pub inertia: Vec<f64>,
}

impl KMeansModel {
    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    /// Index of the nearest centroid; the lowest index wins ties.
    pub fn assign(&self, v: &[f64]) -> usize {
        nearest(&self.centroids, self.dim, v).0
    }

    pub fn inertia_of(&self, data: &[f64]) -> f64 {
        data.chunks_exact(self.dim)
            .map(|x| nearest(&self.centroids, self.dim, x).1)
            .sum()
    }
}

fn nearest(centroids: &[f64], dim: usize, v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(c, v);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Seeded k-means++ initialization followed by Lloyd iterations.
///
/// `data` is row-major with `dim` columns. Empty clusters are moved onto the
/// point farthest from its current centroid.
pub fn kmeans_fit(data: &[f64], dim: usize, k: usize, seed: u64, params: KMeansParams) -> Result<KMeansModel> {
    if dim == 0 || data.len() % dim != 0 {
        return Err(Error::invalid(format!("data length {} is not a multiple of dim {dim}", data.len())));
    }
    let n = data.len() / dim;
    if n == 0 {
        return Err(Error::invalid("k-means needs at least one vector"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > n {
        return Err(Error::TooFewVectors { k, n });
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("k-means input contains non-finite values"));
    }
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut min_d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    for _ in 1..k {
        let total: f64 = min_d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in min_d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // fp drift can run past the end; fall back to the last positive weight
            if min_d2[chosen] == 0.0 {
                chosen = min_d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, d) in min_d2.iter_mut().enumerate() {
            let nd = sq_dist(row(i), &c);
            if nd < *d {
                *d = nd;
            }
        }
        centroids.extend_from_slice(&c);
    }

    let mut assign = vec![0usize; n];
    let mut dist = vec![0.0f64; n];
    let mut inertia = Vec::new();
    let mut iters_run = 0;
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for _ in 0..params.max_iters {
        iters_run += 1;
        for i in 0..n {
            let (j, d) = nearest(&centroids, dim, row(i));
            assign[i] = j;
            dist[i] = d;
        }
        inertia.push(dist.iter().sum());

        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for i in 0..n {
            let j = assign[i];
            counts[j] += 1;
            for (s, x) in sums[j * dim..(j + 1) * dim].iter_mut().zip(row(i)) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        let mut taken = vec![false; n];
        for j in 0..k {
            let c = &mut centroids[j * dim..(j + 1) * dim];
            let new: Vec<f64> = if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                sums[j * dim..(j + 1) * dim].iter().map(|s| s * inv).collect()
            } else {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dist[b] >= dist[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("k <= n leaves a free point");
                taken[far] = true;
                dist[far] = 0.0;
                row(far).to_vec()
            };
            shift = shift.max(sq_dist(c, &new).sqrt());
            c.copy_from_slice(&new);
        }
        if shift < params.tol {
            break;
        }
    }

    Ok(KMeansModel {
        k,
        dim,
        centroids,
        seed,
        iters_run,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn k1_is_mean() {
        let data = vec![0.0, 0.0, 2.0, 4.0, 4.0, 8.0, 6.0, 0.0];
        let m = kmeans_fit(&data, 2, 1, 3, KMeansParams::default()).unwrap();
        assert!((m.centroid(0)[0] - 3.0).abs() < 1e-12);
        assert!((m.centroid(0)[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_clusters() {
        let err = kmeans_fit(&[1.0, 2.0], 1, 3, 0, KMeansParams::default()).unwrap_err();
        assert!(matches!(err, Error::TooFewVectors { k: 3, n: 2 }));
    }

    #[test]
    fn separated_clouds_are_pure() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut data = Vec::new();
            let mut truth = Vec::new();
            for i in 0..200 {
                let c = i % 2;
                let centre = if c == 0 { -50.0 } else { 50.0 };
                for _ in 0..3 {
                    data.push(centre + gaussian(&mut rng));
                }
                truth.push(c);
            }
            let m = kmeans_fit(&data, 3, 2, seed, KMeansParams::default()).unwrap();
            let labels: Vec<usize> = data.chunks(3).map(|x| m.assign(x)).collect();
            let flip = labels[0] != truth[0];
            for (l, t) in labels.iter().zip(&truth) {
                assert_eq!(*l, if flip { 1 - t } else { *t });
            }
        }
    }

    #[test]
    fn inertia_non_increasing() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let n = rng.gen_range(10..80);
            let k = rng.gen_range(1..=n.min(12));
            let data: Vec<f64> = (0..n * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = kmeans_fit(&data, 4, k, seed, KMeansParams { max_iters: 30, tol: 0.0 }).unwrap();
            for w in m.inertia.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn duplicate_points_reseed() {
        // three distinct values, k=3, many duplicates
        let data: Vec<f64> = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 5.0].to_vec();
        let m = kmeans_fit(&data, 1, 3, 4, KMeansParams::default()).unwrap();
        let mut cs: Vec<f64> = m.centroids.clone();
        cs.sort_by(f64::total_cmp);
        assert_eq!(cs, vec![0.0, 1.0, 5.0]);
    }

    #[test]
    fn tie_break_lowest_index() {
        let m = KMeansModel {
            k: 3,
            dim: 1,
            centroids: vec![1.0, -1.0, 1.0],
            seed: 0,
            iters_run: 0,
            inertia: vec![],
        };
        assert_eq!(m.assign(&[0.0]), 0);
        assert_eq!(m.assign(&[1.0]), 0);
        assert_eq!(m.assign(&[-0.5]), 1);
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f64> = (0..300).map(|_| rng.gen()).collect();
        let a = kmeans_fit(&data, 3, 7, 42, KMeansParams::default()).unwrap();
        let b = kmeans_fit(&data, 3, 7, 42, KMeansParams::default()).unwrap();
        assert_eq!(a, b);
    }
}
