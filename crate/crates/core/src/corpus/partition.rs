use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DocumentStore, RelevancePair};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionParams {
    pub ratio_initial: f64,
    pub n_increments: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams {
            ratio_initial: 0.5,
            n_increments: 5,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// The initial corpus plus its increments, with the queries answerable at
/// each stage.
///
/// `d_sets[0]` is the initial corpus; `q_sets[0]` holds its held-out test
/// queries while `train_queries`/`train_pairs` hold the training split.
/// `q_sets[o]` for `o >= 1` are the queries whose earliest relevant document
/// arrives with `d_sets[o]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicPlan {
    pub params: PartitionParams,
    pub d_sets: Vec<Vec<String>>,
    pub q_sets: Vec<Vec<String>>,
    pub train_queries: Vec<String>,
    pub train_pairs: Vec<RelevancePair>,
}

impl DynamicPlan {
    pub fn n_stages(&self) -> usize {
        self.d_sets.len()
    }

    /// Documents indexed after stage `o` (D0 ∪ … ∪ Do).
    pub fn docs_through(&self, o: usize) -> impl Iterator<Item = &str> {
        self.d_sets[..=o].iter().flatten().map(String::as_str)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn partition_dynamic(
    store: &DocumentStore,
    qrels: &[RelevancePair],
    params: PartitionParams,
) -> Result<DynamicPlan> {
    let PartitionParams {
        ratio_initial,
        n_increments,
        train_fraction,
        seed,
    } = params;
    if !(ratio_initial > 0.0 && ratio_initial < 1.0) {
        return Err(Error::invalid(format!("ratio_initial must lie in (0,1), got {ratio_initial}")));
    }
    if n_increments == 0 {
        return Err(Error::invalid("n_increments must be at least 1"));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::invalid(format!("train_fraction must lie in [0,1], got {train_fraction}")));
    }
    let n = store.len();
    if n < n_increments + 1 {
        return Err(Error::invalid(format!(
            "corpus has {n} documents, need at least {} for {n_increments} increments",
            n_increments + 1
        )));
    }
    let n0 = (ratio_initial * n as f64).round() as usize;
    if n0 == 0 || n - n0 < n_increments {
        return Err(Error::invalid(format!(
            "ratio {ratio_initial} leaves {n0} initial and {} incremental documents",
            n - n0
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<&str> = store.iter().map(|d| d.id.as_str()).collect();
    ids.shuffle(&mut rng);

    let mut d_sets: Vec<Vec<String>> = Vec::with_capacity(n_increments + 1);
    d_sets.push(ids[..n0].iter().map(|s| s.to_string()).collect());
    let rest = &ids[n0..];
    let base = rest.len() / n_increments;
    let extra = rest.len() % n_increments;
    let mut at = 0;
    for i in 0..n_increments {
        let size = base + usize::from(i < extra);
        d_sets.push(rest[at..at + size].iter().map(|s| s.to_string()).collect());
        at += size;
    }

    let set_of: HashMap<&str, usize> = d_sets
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.iter().map(move |d| (d.as_str(), i)))
        .collect();

    // Earliest set holding any relevant document of the query.
    let mut first_set: HashMap<&str, usize> = HashMap::new();
    for p in qrels.iter().filter(|p| p.grade > 0) {
        let Some(&s) = set_of.get(p.doc_id.as_str()) else {
            return Err(Error::invalid(format!(
                "qrel for query {:?} references document {:?} outside the store",
                p.query_id, p.doc_id
            )));
        };
        first_set
            .entry(p.query_id.as_str())
            .and_modify(|e| *e = (*e).min(s))
            .or_insert(s);
    }
    let mut by_set: Vec<Vec<String>> = vec![Vec::new(); n_increments + 1];
    for (q, s) in &first_set {
        by_set[*s].push(q.to_string());
    }
    for qs in &mut by_set {
        qs.sort();
    }

    let mut initial = std::mem::take(&mut by_set[0]);
    initial.shuffle(&mut rng);
    let n_train = (train_fraction * initial.len() as f64).round() as usize;
    let mut train_queries: Vec<String> = initial[..n_train].to_vec();
    let mut test0: Vec<String> = initial[n_train..].to_vec();
    train_queries.sort();
    test0.sort();
    by_set[0] = test0;

    let train_set: std::collections::HashSet<&str> = train_queries.iter().map(String::as_str).collect();
    let mut train_pairs: Vec<RelevancePair> = qrels
        .iter()
        .filter(|p| p.grade > 0 && train_set.contains(p.query_id.as_str()) && set_of[p.doc_id.as_str()] == 0)
        .cloned()
        .collect();
    train_pairs.sort();
    train_pairs.dedup();

    Ok(DynamicPlan {
        params,
        d_sets,
        q_sets: by_set,
        train_queries,
        train_pairs,
    })
}
