//! Writes a tiny JSONL dataset, reads it back and splits it into an initial
//! collection plus increments, with chunking of one document.
//!
//! cargo run --example corpus_partition

use dyngr::corpus::{chunk_document, ingest, partition_dynamic, write_documents, write_qrels, write_queries, Document, PartitionParams, Query, RelevancePair};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let docs: Vec<Document> = (0..20).map(|i| Document::new(format!("d{i}"), format!("document {i} about topic {}", i % 4))).collect();
    let queries: Vec<Query> = (0..20).map(|i| Query::new(format!("q{i}"), format!("topic {} number {i}", i % 4))).collect();
    let qrels: Vec<RelevancePair> = (0..20).map(|i| RelevancePair::new(format!("q{i}"), format!("d{i}"))).collect();
    let (dp, qp, rp) = (dir.path().join("docs.jsonl"), dir.path().join("queries.jsonl"), dir.path().join("qrels.tsv"));
    write_documents(&dp, &docs)?;
    write_queries(&qp, &queries)?;
    write_qrels(&rp, &qrels)?;

    let corpus = ingest(&dp, &qp, &rp)?;
    println!("{} docs, {} queries, vocabulary {}", corpus.docs.len(), corpus.queries.len(), corpus.vocab.len());

    let plan = partition_dynamic(
        &corpus.docs,
        &corpus.qrels,
        PartitionParams {
            ratio_initial: 0.5,
            n_increments: 5,
            train_fraction: 0.8,
            seed: 1,
        },
    )?;
    for (o, (d, q)) in plan.d_sets.iter().zip(&plan.q_sets).enumerate() {
        println!("stage {o}: docs {d:?} queries {q:?}");
    }
    println!("training queries {:?}", plan.train_queries);

    for c in chunk_document(10, 4, 3)? {
        print!("[{}, {}) ", c.start, c.end);
    }
    println!();
    Ok(())
}
