use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;

use super::{check_pair, Corpus, Document, DocumentStore, Query, QueryStore, RelevancePair, Vocabulary};
use crate::io_util::write_atomic;
use crate::{Error, Result};

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push((i + 1, item));
    }
    Ok(out)
}

/// Reads a JSONL document file (`id`, `text`, optional `title` and `url`).
/// Tokens are left empty.
pub fn read_documents(path: &Path) -> Result<Vec<Document>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (line, d) in read_jsonl::<Document>(path)? {
        if !seen.insert(d.id.clone()) {
            return Err(Error::DuplicateId {
                kind: "document",
                id: d.id,
                line,
            });
        }
        out.push(d);
    }
    Ok(out)
}

pub fn read_queries(path: &Path) -> Result<Vec<Query>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (line, q) in read_jsonl::<Query>(path)? {
        if !seen.insert(q.id.clone()) {
            return Err(Error::DuplicateId {
                kind: "query",
                id: q.id,
                line,
            });
        }
        out.push(q);
    }
    Ok(out)
}

/// Reads `query_id<TAB>doc_id<TAB>grade` lines. Ids are not resolved here.
pub fn read_qrels(path: &Path) -> Result<Vec<(usize, RelevancePair)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            msg: msg.to_owned(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad("expected query_id<TAB>doc_id<TAB>grade"));
        }
        let grade = fields[2]
            .trim()
            .parse::<u32>()
            .map_err(|_| bad("grade must be a non-negative integer"))?;
        out.push((
            i + 1,
            RelevancePair {
                query_id: fields[0].to_owned(),
                doc_id: fields[1].to_owned(),
                grade,
            },
        ));
    }
    Ok(out)
}

/// Loads a dataset and tokenizes it. Documents are interned before queries,
/// each in file order, so token ids are reproducible across runs.
pub fn ingest(doc_path: &Path, query_path: &Path, qrel_path: &Path) -> Result<Corpus> {
    let mut vocab = Vocabulary::new();
    let mut docs = DocumentStore::new();
    for mut d in read_documents(doc_path)? {
        d.tokens = vocab.intern_text(&d.text);
        docs.insert(d)?;
    }
    let mut queries = QueryStore::new();
    for mut q in read_queries(query_path)? {
        q.tokens = vocab.intern_text(&q.text);
        queries.insert(q)?;
    }
    let mut qrels = Vec::new();
    for (line, p) in read_qrels(qrel_path)? {
        check_pair(&docs, &queries, &p, line)?;
        qrels.push(p);
    }
    Ok(Corpus {
        docs,
        queries,
        qrels,
        vocab,
    })
}

fn jsonl<T: serde::Serialize>(items: impl Iterator<Item = T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, &item)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn write_documents<'a>(path: &Path, docs: impl IntoIterator<Item = &'a Document>) -> Result<()> {
    write_atomic(path, &jsonl(docs.into_iter())?)
}

pub fn write_queries<'a>(path: &Path, queries: impl IntoIterator<Item = &'a Query>) -> Result<()> {
    write_atomic(path, &jsonl(queries.into_iter())?)
}

pub fn write_qrels<'a>(path: &Path, qrels: impl IntoIterator<Item = &'a RelevancePair>) -> Result<()> {
    let mut out = String::new();
    for p in qrels {
        out.push_str(&format!("{}\t{}\t{}\n", p.query_id, p.doc_id, p.grade));
    }
    write_atomic(path, out.as_bytes())
}
