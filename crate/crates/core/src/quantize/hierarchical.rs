use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans_fit, KMeansModel, KMeansParams};
use super::pq::NumericDocid;
use crate::io_util::mix64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalParams {
    pub branching: usize,
    pub leaf_threshold: usize,
    pub seed: u64,
    pub kmeans: KMeansParams,
}

impl Default for HierarchicalParams {
    fn default() -> Self {
        HierarchicalParams {
            branching: 10,
            leaf_threshold: 10,
            seed: 0,
            kmeans: KMeansParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Internal { model: KMeansModel, children: Vec<Node> },
    Leaf { members: Vec<String> },
}

/// Recursive k-means over document embeddings.
///
/// A docid is the root-to-leaf cluster path, padded with `pad` up to the
/// deepest leaf, followed by the document's ordinal inside its leaf. All
/// docids therefore have length `depth + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalTree {
    pub params: HierarchicalParams,
    pub dim: usize,
    pub depth: usize,
    pub pad: u32,
    root: Node,
    pub docids: BTreeMap<String, NumericDocid>,
}

impl HierarchicalTree {
    /// Token vocabulary size: cluster indices and ordinals lie below `pad`.
    pub fn vocab_size(&self) -> usize {
        self.pad as usize + 1
    }

    pub fn docid_len(&self) -> usize {
        self.depth + 1
    }

    fn finish(&self, path: Vec<u32>, ordinal: usize) -> NumericDocid {
        let mut code = path;
        code.resize(self.depth, self.pad);
        code.push((ordinal % self.pad as usize) as u32);
        NumericDocid(code)
    }

    /// Routes a new document down the frozen centroids and appends it to the
    /// leaf it lands in. Centroids are not touched. Once a leaf has used every
    /// ordinal below `pad`, ordinals wrap and the docid is shared.
    pub fn insert_new(&mut self, doc_id: &str, v: &[f64]) -> Result<NumericDocid> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if let Some(code) = self.docids.get(doc_id) {
            return Ok(code.clone());
        }
        let mut path = Vec::new();
        let mut node = &mut self.root;
        let ordinal = loop {
            match node {
                Node::Internal { model, children } => {
                    let j = model.assign(v);
                    path.push(j as u32);
                    node = &mut children[j];
                }
                Node::Leaf { members } => {
                    members.push(doc_id.to_owned());
                    break members.len() - 1;
                }
            }
        };
        let code = self.finish(path, ordinal);
        self.docids.insert(doc_id.to_owned(), code.clone());
        Ok(code)
    }
}

fn build(
    ids: Vec<String>,
    data: Vec<f64>,
    dim: usize,
    params: &HierarchicalParams,
    node_seed: u64,
) -> Result<Node> {
    let n = ids.len();
    if n <= params.leaf_threshold {
        return Ok(Node::Leaf { members: ids });
    }
    let k = params.branching.min(n);
    let model = kmeans_fit(&data, dim, k, node_seed, params.kmeans)?;
    let mut parts: Vec<(Vec<String>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); k];
    for (id, x) in ids.into_iter().zip(data.chunks_exact(dim)) {
        let j = model.assign(x);
        parts[j].0.push(id);
        parts[j].1.extend_from_slice(x);
    }
    if parts.iter().filter(|p| !p.0.is_empty()).count() <= 1 {
        // identical vectors cannot be split further
        let members = parts.into_iter().flat_map(|p| p.0).collect();
        return Ok(Node::Leaf { members });
    }
    let children = parts
        .into_iter()
        .enumerate()
        .map(|(j, (ids, data))| build(ids, data, dim, params, mix64(node_seed ^ (j as u64 + 1))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Node::Internal { model, children })
}

fn collect(node: &Node, path: &mut Vec<u32>, out: &mut Vec<(String, Vec<u32>, usize)>, depth: &mut usize, widest: &mut usize) {
    match node {
        Node::Internal { children, .. } => {
            for (j, c) in children.iter().enumerate() {
                path.push(j as u32);
                collect(c, path, out, depth, widest);
                path.pop();
            }
        }
        Node::Leaf { members } => {
            *depth = (*depth).max(path.len());
            *widest = (*widest).max(members.len());
            for (o, m) in members.iter().enumerate() {
                out.push((m.clone(), path.clone(), o));
            }
        }
    }
}

/// Assigns hierarchical k-means docids to `(doc_id, embedding)` pairs.
pub fn hierarchical_docids(docs: &[(String, Vec<f64>)], params: HierarchicalParams) -> Result<HierarchicalTree> {
    if params.branching < 2 {
        return Err(Error::invalid("branching must be at least 2"));
    }
    if params.leaf_threshold == 0 {
        return Err(Error::invalid("leaf_threshold must be at least 1"));
    }
    let dim = docs.first().map_or(0, |d| d.1.len());
    if let Some(bad) = docs.iter().find(|d| d.1.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.1.len() });
    }
    let ids: Vec<String> = docs.iter().map(|d| d.0.clone()).collect();
    let data: Vec<f64> = docs.iter().flat_map(|d| d.1.iter().copied()).collect();
    let root = build(ids, data, dim, &params, params.seed)?;

    let mut rows = Vec::new();
    let (mut depth, mut widest) = (0, 0);
    collect(&root, &mut Vec::new(), &mut rows, &mut depth, &mut widest);
    let pad = params.branching.max(params.leaf_threshold).max(widest) as u32;
    let mut tree = HierarchicalTree {
        params,
        dim,
        depth,
        pad,
        root,
        docids: BTreeMap::new(),
    };
    for (id, path, ord) in rows {
        let code = tree.finish(path, ord);
        tree.docids.insert(id, code);
    }
    Ok(tree)
}
