//! Generated corpora with controllable topical structure.
//!
//! Every document mixes three word populations: frequent function-like words
//! shared by everyone, words of the document's topic, and a handful of rare
//! key words each shared by only a few documents. Queries are noisy windows
//! cut from their source document.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Query, RelevancePair};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub n_docs: usize,
    pub doc_len: usize,
    pub n_topics: usize,
    pub words_per_topic: usize,
    pub n_common: usize,
    pub keys_per_doc: usize,
    pub docs_per_key: usize,
    pub common_share: f64,
    pub topic_share: f64,
    pub query_len: usize,
    pub drop_prob: f64,
    pub replace_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            n_docs: 2000,
            doc_len: 200,
            n_topics: 40,
            words_per_topic: 40,
            n_common: 120,
            keys_per_doc: 6,
            docs_per_key: 8,
            common_share: 0.4,
            topic_share: 0.35,
            query_len: 12,
            drop_prob: 0.25,
            replace_prob: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub queries: Vec<Query>,
    pub qrels: Vec<RelevancePair>,
}

const CONSONANTS: &[u8] = b"bcdfghklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

struct WordMaker {
    seen: BTreeSet<String>,
}

impl WordMaker {
    fn make(&mut self, rng: &mut ChaCha8Rng, syllables: std::ops::RangeInclusive<usize>) -> String {
        loop {
            let n = rng.gen_range(syllables.clone());
            let mut w = String::with_capacity(2 * n);
            for _ in 0..n {
                w.push(*CONSONANTS.choose(rng).unwrap() as char);
                w.push(*VOWELS.choose(rng).unwrap() as char);
            }
            if self.seen.insert(w.clone()) {
                return w;
            }
        }
    }
}

pub fn generate(p: &SyntheticParams) -> Result<SyntheticCorpus> {
    if p.n_docs == 0 || p.doc_len == 0 || p.n_topics == 0 || p.words_per_topic == 0 || p.n_common == 0 {
        return Err(Error::invalid("synthetic corpus sizes must be positive"));
    }
    if p.keys_per_doc == 0 || p.docs_per_key == 0 || p.query_len == 0 || p.query_len > p.doc_len {
        return Err(Error::invalid("need keys_per_doc, docs_per_key > 0 and 0 < query_len <= doc_len"));
    }
    if p.common_share < 0.0 || p.topic_share < 0.0 || p.common_share + p.topic_share > 1.0 {
        return Err(Error::invalid("word shares must be non-negative and sum to at most 1"));
    }
    if p.drop_prob < 0.0 || p.replace_prob < 0.0 || p.drop_prob + p.replace_prob >= 1.0 {
        return Err(Error::invalid("query noise probabilities must sum below 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut maker = WordMaker { seen: BTreeSet::new() };
    let common: Vec<String> = (0..p.n_common).map(|_| maker.make(&mut rng, 1..=2)).collect();
    let topics: Vec<Vec<String>> = (0..p.n_topics)
        .map(|_| (0..p.words_per_topic).map(|_| maker.make(&mut rng, 3..=4)).collect())
        .collect();
    let n_keys = (p.n_docs * p.keys_per_doc).div_ceil(p.docs_per_key).max(p.keys_per_doc);
    let keys: Vec<String> = (0..n_keys).map(|_| maker.make(&mut rng, 3..=4)).collect();

    // key assignment: a shuffled deck of key slots so each key lands in
    // about docs_per_key documents
    let mut deck: Vec<usize> = (0..n_keys).flat_map(|k| std::iter::repeat_n(k, p.docs_per_key)).collect();
    deck.shuffle(&mut rng);
    let mut deck = deck.into_iter();

    let mut documents = Vec::with_capacity(p.n_docs);
    let mut queries = Vec::with_capacity(p.n_docs);
    let mut qrels = Vec::with_capacity(p.n_docs);
    let width = p.n_docs.to_string().len();
    for i in 0..p.n_docs {
        let topic = &topics[rng.gen_range(0..p.n_topics)];
        let mut mine: Vec<usize> = Vec::with_capacity(p.keys_per_doc);
        while mine.len() < p.keys_per_doc {
            let k = deck.next().unwrap_or_else(|| rng.gen_range(0..n_keys));
            if !mine.contains(&k) {
                mine.push(k);
            }
        }
        let words: Vec<&str> = (0..p.doc_len)
            .map(|_| {
                let r: f64 = rng.gen();
                if r < p.common_share {
                    // skewed toward the head of the list
                    let u: f64 = rng.gen();
                    common[((u * u) * p.n_common as f64) as usize].as_str()
                } else if r < p.common_share + p.topic_share {
                    topic[rng.gen_range(0..topic.len())].as_str()
                } else {
                    keys[mine[rng.gen_range(0..mine.len())]].as_str()
                }
            })
            .collect();
        let id = format!("d{i:0width$}");
        let mut doc = Document::new(id.clone(), words.join(" "));
        doc.title = Some(format!("{} {}", topic[0], keys[mine[0]]));

        let start = rng.gen_range(0..=p.doc_len - p.query_len);
        let mut q: Vec<&str> = Vec::with_capacity(p.query_len);
        for &w in &words[start..start + p.query_len] {
            let r: f64 = rng.gen();
            if r < p.drop_prob {
                continue;
            } else if r < p.drop_prob + p.replace_prob {
                q.push(common[rng.gen_range(0..p.n_common)].as_str());
            } else {
                q.push(w);
            }
        }
        if q.is_empty() {
            q.push(words[start]);
        }
        let qid = format!("q{i:0width$}");
        queries.push(Query::new(qid.clone(), q.join(" ")));
        qrels.push(RelevancePair {
            query_id: qid,
            doc_id: id,
            grade: 1,
        });
        documents.push(doc);
    }
    Ok(SyntheticCorpus { documents, queries, qrels })
}
