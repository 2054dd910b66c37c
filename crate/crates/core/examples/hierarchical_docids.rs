//! Hierarchical k-means docids: cluster paths plus a leaf ordinal, and how
//! new documents are routed through the frozen tree.
//!
//! cargo run --release --example hierarchical_docids

use dyngr::corpus::Corpus;
use dyngr::embed::{Embedder, IdfTable};
use dyngr::eval::{generate_synthetic, SyntheticParams};
use dyngr::quantize::{hierarchical_docids, HierarchicalParams};

fn main() -> anyhow::Result<()> {
    let data = generate_synthetic(&SyntheticParams {
        n_docs: 400,
        ..Default::default()
    })?;
    let corpus = Corpus::from_parts(data.documents, data.queries, data.qrels)?;
    let (old, new) = corpus.docs.as_slice().split_at(300);
    let embedder = Embedder::new(64, 3, Some(IdfTable::fit(old.iter().map(|d| d.tokens.as_slice()))))?;
    let embedded: Vec<(String, Vec<f64>)> = old.iter().map(|d| (d.id.clone(), embedder.embed(&d.tokens).0)).collect();

    let mut tree = hierarchical_docids(
        &embedded,
        HierarchicalParams {
            branching: 8,
            leaf_threshold: 8,
            ..Default::default()
        },
    )?;
    println!("depth {} pad {} vocabulary {}", tree.depth, tree.pad, tree.vocab_size());
    for (id, code) in tree.docids.iter().take(4) {
        println!("  {id} -> {:?}", code.as_slice());
    }

    for d in &new[..4] {
        let code = tree.insert_new(&d.id, &embedder.embed(&d.tokens).0)?;
        println!("  new {} -> {:?}", d.id, code.as_slice());
    }
    Ok(())
}
