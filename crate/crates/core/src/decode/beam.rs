//! Beam search restricted to prefixes a constraint attests.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::fm_index::FMIndex;
use crate::corpus::TokenId;
use crate::docid_index::{PrefixTree, Token};
use crate::scorer::Scorer;
use crate::{Error, Result};

pub trait Constraint {
    /// Tokens that may follow `prefix`, sorted ascending.
    fn allowed_next(&self, prefix: &[Token]) -> Vec<Token>;

    /// Whether `prefix` is itself a complete docid.
    fn is_complete(&self, prefix: &[Token]) -> bool;
}

impl Constraint for PrefixTree {
    fn allowed_next(&self, prefix: &[Token]) -> Vec<Token> {
        PrefixTree::allowed_next(self, prefix)
    }

    fn is_complete(&self, prefix: &[Token]) -> bool {
        self.is_terminal(prefix)
    }
}

/// Byte n-grams attested in an FM-index, generated up to `max_len` bytes.
/// Only prefixes of exactly `max_len` bytes are complete.
#[derive(Debug, Clone, Copy)]
pub struct FmConstraint<'a> {
    pub index: &'a FMIndex,
    pub max_len: usize,
}

fn as_bytes(prefix: &[Token]) -> Option<Vec<u8>> {
    prefix.iter().map(|&t| u8::try_from(t).ok()).collect()
}

impl Constraint for FmConstraint<'_> {
    fn allowed_next(&self, prefix: &[Token]) -> Vec<Token> {
        if prefix.len() >= self.max_len {
            return Vec::new();
        }
        match as_bytes(prefix) {
            Some(p) => self.index.allowed_extensions(&p).into_keys().map(Token::from).collect(),
            None => Vec::new(),
        }
    }

    fn is_complete(&self, prefix: &[Token]) -> bool {
        if prefix.is_empty() || prefix.len() != self.max_len {
            return false;
        }
        as_bytes(prefix).is_some_and(|p| self.index.count(&p).is_ok_and(|n| n > 0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamHypothesis {
    pub tokens: Vec<Token>,
    pub logprob: f64,
    /// 1-based position in the returned list.
    pub rank: usize,
}

fn order(a: &(Vec<Token>, f64), b: &(Vec<Token>, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Beam search where every expansion is intersected with the constraint.
/// Returns at most `beam_width` complete docids sorted by log-probability
/// descending, ties by token order.
pub fn constrained_beam_search<S, C>(
    scorer: &S,
    constraint: &C,
    query: &[TokenId],
    beam_width: usize,
    max_len: usize,
) -> Result<Vec<BeamHypothesis>>
where
    S: Scorer + ?Sized,
    C: Constraint + ?Sized,
{
    if beam_width == 0 {
        return Err(Error::invalid("beam width must be at least 1"));
    }
    let mut beams: Vec<(Vec<Token>, f64)> = vec![(Vec::new(), 0.0)];
    let mut finished: Vec<(Vec<Token>, f64)> = Vec::new();
    for _ in 0..max_len {
        let mut candidates = Vec::new();
        for (tokens, lp) in &beams {
            let allowed = constraint.allowed_next(tokens);
            if allowed.is_empty() {
                continue;
            }
            let scores = scorer.logprobs_for(query, tokens, &allowed);
            for (t, s) in allowed.into_iter().zip(scores) {
                let mut next = tokens.clone();
                next.push(t);
                candidates.push((next, lp + s));
            }
        }
        candidates.sort_by(order);
        candidates.truncate(beam_width);
        beams.clear();
        for cand in candidates {
            if constraint.is_complete(&cand.0) {
                finished.push(cand.clone());
            }
            if cand.0.len() < max_len && !constraint.allowed_next(&cand.0).is_empty() {
                beams.push(cand);
            }
        }
        if beams.is_empty() {
            break;
        }
    }
    finished.sort_by(order);
    finished.truncate(beam_width);
    Ok(finished
        .into_iter()
        .enumerate()
        .map(|(i, (tokens, logprob))| BeamHypothesis {
            tokens,
            logprob,
            rank: i + 1,
        })
        .collect())
}
