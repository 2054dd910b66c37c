//! Trains PQ codebooks on embedded documents and shows how reconstruction
//! error and code diversity change with the number of centroids.
//!
//! cargo run --release --example product_quantization

use std::collections::BTreeSet;

use dyngr::embed::{Embedder, IdfTable};
use dyngr::eval::{generate_synthetic, SyntheticParams};
use dyngr::quantize::{pq_fit, sq_dist, KMeansParams};

fn main() -> anyhow::Result<()> {
    let data = generate_synthetic(&SyntheticParams {
        n_docs: 600,
        ..Default::default()
    })?;
    let corpus = dyngr::corpus::Corpus::from_parts(data.documents, data.queries, data.qrels)?;
    let idf = IdfTable::fit(corpus.docs.iter().map(|d| d.tokens.as_slice()));
    let embedder = Embedder::new(64, 1, Some(idf))?;
    let vectors: Vec<Vec<f64>> = corpus.docs.iter().map(|d| embedder.embed(&d.tokens).0).collect();

    println!("{:>5} {:>12} {:>14}", "k", "mean error", "distinct codes");
    for k in [4, 16, 64, 256] {
        let book = pq_fit(&vectors, 4, k, 11, KMeansParams::default())?;
        let mut codes = BTreeSet::new();
        let mut err = 0.0;
        for v in &vectors {
            let code = book.encode(v)?;
            err += sq_dist(v, book.reconstruct(&code)?.as_slice());
            codes.insert(code);
        }
        println!("{k:>5} {:>12.4} {:>14}", err / vectors.len() as f64, codes.len());
    }

    let book = pq_fit(&vectors, 4, 16, 11, KMeansParams::default())?;
    let code = book.encode(&vectors[0])?;
    println!("first document -> {:?}", code.as_slice());
    Ok(())
}
