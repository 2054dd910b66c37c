//! Docid registry and the prefix tree that constrains decoding.
//!
//! The registry is many-to-many: a document can own several docids (one per
//! chunk) and a docid can be shared by several documents. Nothing is ever
//! removed; registering only adds paths.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io_util::write_atomic;
use crate::{Error, Result};

pub type Token = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DocidKind {
    /// Fixed-length codes.
    Numeric { len: usize },
    /// Variable-length token sequences (titles, URLs, n-grams).
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocidRegistry {
    kind: DocidKind,
    by_docid: BTreeMap<Vec<Token>, BTreeSet<String>>,
    by_doc: HashMap<String, Vec<Vec<Token>>>,
}

impl DocidRegistry {
    pub fn new(kind: DocidKind) -> Self {
        DocidRegistry {
            kind,
            by_docid: BTreeMap::new(),
            by_doc: HashMap::new(),
        }
    }

    pub fn kind(&self) -> DocidKind {
        self.kind
    }

    /// Adds the `(docid, doc)` pair. Returns `false` when it was already present.
    pub fn insert(&mut self, docid: &[Token], doc: &str) -> Result<bool> {
        if let DocidKind::Numeric { len } = self.kind {
            if docid.len() != len {
                return Err(Error::DocidLength {
                    expected: len,
                    got: docid.len(),
                });
            }
        }
        if docid.is_empty() {
            return Err(Error::invalid("empty docid"));
        }
        let docs = self.by_docid.entry(docid.to_vec()).or_default();
        if !docs.insert(doc.to_owned()) {
            return Ok(false);
        }
        self.by_doc.entry(doc.to_owned()).or_default().push(docid.to_vec());
        Ok(true)
    }

    /// Documents registered under `docid`; empty when unknown.
    pub fn lookup(&self, docid: &[Token]) -> impl Iterator<Item = &str> {
        self.by_docid.get(docid).into_iter().flatten().map(String::as_str)
    }

    pub fn docids_of(&self, doc: &str) -> &[Vec<Token>] {
        self.by_doc.get(doc).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, docid: &[Token]) -> bool {
        self.by_docid.contains_key(docid)
    }

    /// Registered docids in lexicographic order.
    pub fn docids(&self) -> impl Iterator<Item = &Vec<Token>> {
        self.by_docid.keys()
    }

    /// Number of distinct docids.
    pub fn len(&self) -> usize {
        self.by_docid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_docid.is_empty()
    }

    /// Number of `(docid, doc)` pairs.
    pub fn n_pairs(&self) -> usize {
        self.by_docid.values().map(BTreeSet::len).sum()
    }

    pub fn n_docs(&self) -> usize {
        self.by_doc.len()
    }

    /// One JSON object per docid: `{"docid":[…],"docs":[…]}`, lexicographic.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        let header = RegistryHeader { kind: self.kind };
        serde_json::to_writer(&mut buf, &header)?;
        buf.push(b'\n');
        for (docid, docs) in &self.by_docid {
            serde_json::to_writer(
                &mut buf,
                &RegistryLine {
                    docid: docid.clone(),
                    docs: docs.iter().cloned().collect(),
                },
            )?;
            buf.push(b'\n');
        }
        write_atomic(path, &buf)
    }

    /// Reads a registry written by [`save_jsonl`](Self::save_jsonl). Per-doc
    /// docid order is rebuilt from file order.
    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines().enumerate();
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_owned(),
            line,
            msg,
        };
        let (_, first) = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
        let header: RegistryHeader = serde_json::from_str(&first?).map_err(|e| parse_err(1, e.to_string()))?;
        let mut reg = DocidRegistry::new(header.kind);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RegistryLine = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
            for d in &rec.docs {
                reg.insert(&rec.docid, d)?;
            }
        }
        Ok(reg)
    }

    /// Rebuilds a prefix tree holding exactly the registered docids.
    pub fn build_tree(&self) -> PrefixTree {
        let mut tree = PrefixTree::new();
        for docid in self.by_docid.keys() {
            tree.insert(docid);
        }
        tree
    }
}

#[derive(Serialize, Deserialize)]
struct RegistryHeader {
    kind: DocidKind,
}

#[derive(Serialize, Deserialize)]
struct RegistryLine {
    docid: Vec<Token>,
    docs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
struct Node {
    children: BTreeMap<Token, usize>,
    terminal: bool,
}

/// Trie of valid docid prefixes; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrefixTree {
    nodes: Vec<Node>,
    n_paths: usize,
}

impl Default for PrefixTree {
    fn default() -> Self {
        Self::new()
    }
}

impl PrefixTree {
    pub fn new() -> Self {
        PrefixTree {
            nodes: vec![Node::default()],
            n_paths: 0,
        }
    }

    /// Adds a path; returns `false` if it was already terminal.
    pub fn insert(&mut self, docid: &[Token]) -> bool {
        let mut at = 0;
        for &t in docid {
            at = match self.nodes[at].children.get(&t) {
                Some(&next) => next,
                None => {
                    let next = self.nodes.len();
                    self.nodes.push(Node::default());
                    self.nodes[at].children.insert(t, next);
                    next
                }
            };
        }
        let fresh = !self.nodes[at].terminal;
        self.nodes[at].terminal = true;
        self.n_paths += usize::from(fresh);
        fresh
    }

    fn find(&self, prefix: &[Token]) -> Option<usize> {
        let mut at = 0;
        for t in prefix {
            at = *self.nodes[at].children.get(t)?;
        }
        Some(at)
    }

    /// Tokens that may follow `prefix`, ascending. Empty if `prefix` is not in
    /// the tree.
    pub fn allowed_next(&self, prefix: &[Token]) -> Vec<Token> {
        self.find(prefix)
            .map(|n| self.nodes[n].children.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn is_terminal(&self, prefix: &[Token]) -> bool {
        self.find(prefix).is_some_and(|n| self.nodes[n].terminal)
    }

    pub fn contains(&self, docid: &[Token]) -> bool {
        self.is_terminal(docid)
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// All terminal paths in lexicographic order.
    pub fn paths(&self) -> Vec<Vec<Token>> {
        let mut out = Vec::with_capacity(self.n_paths);
        let mut stack: Vec<(usize, Vec<Token>)> = vec![(0, Vec::new())];
        while let Some((n, path)) = stack.pop() {
            if self.nodes[n].terminal {
                out.push(path.clone());
            }
            for (&t, &c) in self.nodes[n].children.iter().rev() {
                let mut p = path.clone();
                p.push(t);
                stack.push((c, p));
            }
        }
        out
    }
}

/// Registers `docid` for `doc` in both the registry and the tree. Re-adding an
/// existing pair changes nothing.
pub fn register(registry: &mut DocidRegistry, tree: &mut PrefixTree, docid: &[Token], doc: &str) -> Result<()> {
    registry.insert(docid, doc)?;
    tree.insert(docid);
    Ok(())
}
