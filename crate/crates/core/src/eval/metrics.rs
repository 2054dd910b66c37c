//! Dynamic-corpus retrieval metrics.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::run::RetrievalRun;
use crate::corpus::RelevancePair;
use crate::docid_index::DocidRegistry;
use crate::{Error, Result};

/// Relevant documents per query (grade > 0).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels(HashMap<String, HashSet<String>>);

impl Qrels {
    pub fn new<'a>(pairs: impl IntoIterator<Item = &'a RelevancePair>) -> Self {
        let mut m: HashMap<String, HashSet<String>> = HashMap::new();
        for p in pairs {
            let e = m.entry(p.query_id.clone()).or_default();
            if p.grade > 0 {
                e.insert(p.doc_id.clone());
            }
        }
        Qrels(m)
    }

    pub fn relevant(&self, query: &str) -> Option<&HashSet<String>> {
        self.0.get(query)
    }
}

/// Fraction of the run's queries with a relevant document in the top `k`.
pub fn hit_at_k(run: &RetrievalRun, qrels: &Qrels, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if run.queries.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (q, list) in &run.queries {
        let rel = qrels
            .relevant(q)
            .ok_or_else(|| Error::invalid(format!("query {q:?} has no relevance judgments")))?;
        hits += usize::from(list.iter().take(k).any(|(d, _)| rel.contains(d)));
    }
    Ok(hits as f64 / run.queries.len() as f64)
}

/// `F_n = (1/n)·Σ_{o=1..n} max(p_00 − p_o0, 0)`.
pub fn forgetting_metric(p00: f64, later: &[f64]) -> Result<f64> {
    if later.is_empty() {
        return Err(Error::invalid("need at least one later stage"));
    }
    Ok(later.iter().map(|p| (p00 - p).max(0.0)).sum::<f64>() / later.len() as f64)
}

/// `GA_n = (1/n)·Σ_{o=1..n} p_oo`.
pub fn generalization_metric(new_stage_hits: &[f64]) -> Result<f64> {
    if new_stage_hits.is_empty() {
        return Err(Error::invalid("need at least one later stage"));
    }
    Ok(new_stage_hits.iter().sum::<f64>() / new_stage_hits.len() as f64)
}

/// `(R − E) / (K − E)`, unclamped.
pub fn idbi_from_counts(r_init: f64, e_init: f64, k: usize) -> Result<f64> {
    let k = k as f64;
    if e_init >= k {
        return Err(Error::Undefined("retrieval bias needs at least one new document".into()));
    }
    Ok((r_init - e_init) / (k - e_init))
}

/// Over-representation of initial documents in the top-`k` lists.
/// Lists shorter than `k` are padded with slots at the corpus proportion.
pub fn idbi<S: AsRef<str>>(lists: &[Vec<S>], is_initial: impl Fn(&str) -> bool, n_initial: usize, n_new: usize, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if n_new == 0 {
        return Err(Error::Undefined("retrieval bias needs at least one new document".into()));
    }
    if lists.is_empty() {
        return Err(Error::invalid("no result lists"));
    }
    let share = n_initial as f64 / (n_initial + n_new) as f64;
    let e_init = k as f64 * share;
    let r_init = lists
        .iter()
        .map(|l| {
            let shown = l.len().min(k);
            let init = l.iter().take(k).filter(|d| is_initial(d.as_ref())).count();
            init as f64 + (k - shown) as f64 * share
        })
        .sum::<f64>()
        / lists.len() as f64;
    idbi_from_counts(r_init, e_init, k)
}

/// Unigram language model with add-one smoothing; one extra slot for
/// unseen words.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramLm {
    counts: HashMap<String, u64>,
    total: u64,
}

impl UnigramLm {
    pub fn fit<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut total = 0;
        for w in words {
            *counts.entry(w.to_string()).or_default() += 1;
            total += 1;
        }
        UnigramLm { counts, total }
    }

    /// Size of the smoothed vocabulary.
    pub fn vocab_size(&self) -> usize {
        self.counts.len() + 1
    }

    pub fn logprob(&self, word: &str) -> f64 {
        let c = self.counts.get(word).copied().unwrap_or(0);
        ((c + 1) as f64 / (self.total + self.vocab_size() as u64) as f64).ln()
    }
}

/// Mean log-probability of docid tokens under `lm`.
pub fn semantic_familiarity<'a>(lm: &UnigramLm, tokens: impl IntoIterator<Item = &'a str>) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for t in tokens {
        sum += lm.logprob(t);
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid("empty docid sample"));
    }
    Ok(sum / n as f64)
}

/// Distinct tokens across all registered docids.
pub fn effective_vocab_size(registry: &DocidRegistry) -> usize {
    registry.docids().flat_map(|z| z.iter().copied()).collect::<BTreeSet<_>>().len()
}
