//! Ranked result lists and their TSV run-file form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io_util::write_atomic;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRun {
    pub method: String,
    pub stage: usize,
    /// Query id to `(doc_id, score)` in rank order.
    pub queries: BTreeMap<String, Vec<(String, f64)>>,
}

impl RetrievalRun {
    pub fn new(method: impl Into<String>, stage: usize) -> Self {
        RetrievalRun {
            method: method.into(),
            stage,
            queries: BTreeMap::new(),
        }
    }

    /// Adds an empty result list for every listed query not yet present.
    pub fn ensure_queries<S: AsRef<str>>(&mut self, ids: &[S]) {
        for q in ids {
            self.queries.entry(q.as_ref().to_string()).or_default();
        }
    }

    pub fn doc_lists(&self) -> Vec<Vec<&str>> {
        self.queries.values().map(|l| l.iter().map(|(d, _)| d.as_str()).collect()).collect()
    }

    /// `query doc rank score method stage`, one line per result.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, list) in &self.queries {
            for (i, (d, s)) in list.iter().enumerate() {
                writeln!(out, "{q}\t{d}\t{}\t{s:?}\t{}\t{}", i + 1, self.method, self.stage).unwrap();
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_tsv().as_bytes())
    }

    /// Parses run lines; every line must share one method and stage, and
    /// ranks must run 1, 2, … per query.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut run: Option<RetrievalRun> = None;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: origin.into(),
                line: lineno,
                msg,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(err(format!("expected 6 tab-separated fields, got {}", f.len())));
            }
            let rank: usize = f[2].parse().map_err(|_| err(format!("bad rank {:?}", f[2])))?;
            let score: f64 = f[3].parse().map_err(|_| err(format!("bad score {:?}", f[3])))?;
            let stage: usize = f[5].parse().map_err(|_| err(format!("bad stage {:?}", f[5])))?;
            let r = run.get_or_insert_with(|| RetrievalRun::new(f[4], stage));
            if r.method != f[4] || r.stage != stage {
                return Err(err("mixed method or stage in one run file".into()));
            }
            let list = r.queries.entry(f[0].to_string()).or_default();
            if rank != list.len() + 1 {
                return Err(err(format!("rank {rank} out of sequence for query {}", f[0])));
            }
            if list.iter().any(|(d, _)| d == f[1]) {
                return Err(err(format!("document {} listed twice for query {}", f[1], f[0])));
            }
            list.push((f[1].to_string(), score));
        }
        run.ok_or_else(|| Error::Parse {
            path: origin.into(),
            line: 0,
            msg: "empty run file".into(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn tsv_roundtrip(
            lists in proptest::collection::btree_map("[a-z0-9]{1,6}", proptest::collection::vec(-1e6f64..1e6, 1..8), 1..6),
            stage in 0usize..6,
        ) {
            let mut run = RetrievalRun::new("mdgr", stage);
            for (q, scores) in lists {
                run.queries.insert(q, scores.into_iter().enumerate().map(|(i, s)| (format!("d{i}"), s)).collect());
            }
            let back = RetrievalRun::parse(&run.to_tsv(), "mem").unwrap();
            prop_assert_eq!(back, run);
        }
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RetrievalRun::parse("q\td\t2\t1.0\tm\t0\n", "x").is_err());
        assert!(RetrievalRun::parse("q\td\t1\t1.0\tm\t0\nq\td\t2\t1.0\tm\t0\n", "x").is_err());
        assert!(RetrievalRun::parse("q\td\t1\t1.0\tm\n", "x").is_err());
        assert!(RetrievalRun::parse("", "x").is_err());
    }
}
