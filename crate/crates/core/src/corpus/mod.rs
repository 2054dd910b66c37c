//! Documents, queries, relevance judgments and the dynamic-corpus partition.

mod chunk;
mod ingest;
mod partition;
mod tokenize;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use chunk::{chunk_document, Chunk};
pub use ingest::{ingest, read_documents, read_qrels, read_queries, write_documents, write_qrels, write_queries};
pub use partition::{partition_dynamic, DynamicPlan, PartitionParams};
pub use tokenize::{tokenize, TokenId, Vocabulary};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(skip)]
    pub tokens: Vec<TokenId>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            title: None,
            url: None,
            tokens: Vec::new(),
        }
    }

    /// Lowercased text with tokens joined by single spaces. This is the byte
    /// string the FM-index is built over.
    pub fn normalized_text(&self) -> String {
        tokenize(&self.text).join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(skip)]
    pub tokens: Vec<TokenId>,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Query {
            id: id.into(),
            text: text.into(),
            tokens: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelevancePair {
    pub query_id: String,
    pub doc_id: String,
    pub grade: u32,
}

impl RelevancePair {
    /// A pair with grade 1.
    pub fn new(query_id: impl Into<String>, doc_id: impl Into<String>) -> Self {
        RelevancePair {
            query_id: query_id.into(),
            doc_id: doc_id.into(),
            grade: 1,
        }
    }
}

/// An insertion-ordered store keyed by unique id.
#[derive(Debug, Clone)]
pub struct Store<T> {
    items: Vec<T>,
    by_id: HashMap<String, usize>,
}

pub type DocumentStore = Store<Document>;
pub type QueryStore = Store<Query>;

pub trait HasId {
    fn id(&self) -> &str;
}

impl HasId for Document {
    fn id(&self) -> &str {
        &self.id
    }
}

impl HasId for Query {
    fn id(&self) -> &str {
        &self.id
    }
}

impl<T> Default for Store<T> {
    fn default() -> Self {
        Store {
            items: Vec::new(),
            by_id: HashMap::new(),
        }
    }
}

impl<T: HasId> Store<T> {
    pub fn new() -> Self {
        Store {
            items: Vec::new(),
            by_id: HashMap::new(),
        }
    }

    /// Inserts an item, rejecting duplicate ids. Returns the item's ordinal.
    pub fn insert(&mut self, item: T) -> Result<usize> {
        if self.by_id.contains_key(item.id()) {
            return Err(Error::invalid(format!("duplicate id {:?}", item.id())));
        }
        let ord = self.items.len();
        self.by_id.insert(item.id().to_owned(), ord);
        self.items.push(item);
        Ok(ord)
    }

    pub fn get(&self, id: &str) -> Option<&T> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn ordinal(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.items.iter()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.items
    }
}

impl<T: HasId> FromIterator<T> for Store<T> {
    /// Panics on duplicate ids; use [`Store::insert`] for fallible building.
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut s = Store::new();
        for item in iter {
            s.insert(item).expect("duplicate id");
        }
        s
    }
}

/// Everything read from one dataset: documents, queries, judgments and the
/// vocabulary their tokens were interned into.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub docs: DocumentStore,
    pub queries: QueryStore,
    pub qrels: Vec<RelevancePair>,
    pub vocab: Vocabulary,
}

impl Corpus {
    /// Builds a corpus from in-memory records, tokenizing documents first and
    /// queries second so token ids match what [`ingest`] would assign.
    pub fn from_parts(
        docs: Vec<Document>,
        queries: Vec<Query>,
        qrels: Vec<RelevancePair>,
    ) -> Result<Corpus> {
        let mut vocab = Vocabulary::new();
        let mut dstore = DocumentStore::new();
        for (line, mut d) in docs.into_iter().enumerate() {
            if dstore.contains(&d.id) {
                return Err(Error::DuplicateId {
                    kind: "document",
                    id: d.id,
                    line: line + 1,
                });
            }
            d.tokens = vocab.intern_text(&d.text);
            dstore.insert(d)?;
        }
        let mut qstore = QueryStore::new();
        for (line, mut q) in queries.into_iter().enumerate() {
            if qstore.contains(&q.id) {
                return Err(Error::DuplicateId {
                    kind: "query",
                    id: q.id,
                    line: line + 1,
                });
            }
            q.tokens = vocab.intern_text(&q.text);
            qstore.insert(q)?;
        }
        for (line, p) in qrels.iter().enumerate() {
            check_pair(&dstore, &qstore, p, line + 1)?;
        }
        Ok(Corpus {
            docs: dstore,
            queries: qstore,
            qrels,
            vocab,
        })
    }
}

pub(crate) fn check_pair(
    docs: &DocumentStore,
    queries: &QueryStore,
    p: &RelevancePair,
    line: usize,
) -> Result<()> {
    if !queries.contains(&p.query_id) {
        return Err(Error::DanglingId {
            kind: "query",
            id: p.query_id.clone(),
            line,
        });
    }
    if !docs.contains(&p.doc_id) {
        return Err(Error::DanglingId {
            kind: "document",
            id: p.doc_id.clone(),
            line,
        });
    }
    Ok(())
}
