//! BM25 over a synthetic collection, queried with one of its noisy queries.
//!
//! cargo run --release --example bm25_baseline

use dyngr::corpus::Corpus;
use dyngr::eval::{generate_synthetic, Bm25Index, Bm25Params, SyntheticParams};

fn main() -> anyhow::Result<()> {
    let data = generate_synthetic(&SyntheticParams {
        n_docs: 500,
        ..Default::default()
    })?;
    let corpus = Corpus::from_parts(data.documents, data.queries, data.qrels)?;
    let docs: Vec<_> = corpus.docs.iter().collect();
    let index = Bm25Index::build(&docs, Bm25Params::default())?;
    for p in corpus.qrels.iter().take(3) {
        let q = corpus.queries.get(&p.query_id).unwrap();
        println!("{} {:?} -> relevant {}", q.id, q.text, p.doc_id);
        for (doc, score) in index.retrieve(&q.tokens, 3) {
            println!("  {doc:<6} {score:.3}");
        }
    }
    Ok(())
}
