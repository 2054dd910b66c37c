//! Multi-docid retrieval end to end: chunk-level PQ codes for the initial
//! collection, constrained expansion for new documents, and coverage + rank
//! scoring at query time.
//!
//! cargo run --release --example mdgr_retrieval

use dyngr::corpus::Corpus;
use dyngr::embed::{Embedder, IdfTable};
use dyngr::eval::{generate_synthetic, SyntheticParams};
use dyngr::mdgr::{MdgrIndex, MdgrParams};
use dyngr::scorer::{build_training_pairs, train_reference_scorer, ScorerParams};

fn main() -> anyhow::Result<()> {
    let data = generate_synthetic(&SyntheticParams {
        n_docs: 400,
        ..Default::default()
    })?;
    let corpus = Corpus::from_parts(data.documents, data.queries, data.qrels)?;
    let plan = dyngr::corpus::partition_dynamic(&corpus.docs, &corpus.qrels, Default::default())?;
    let initial: Vec<_> = plan.d_sets[0].iter().map(|id| corpus.docs.get(id).unwrap()).collect();
    let embedder = Embedder::new(64, 5, Some(IdfTable::fit(initial.iter().map(|d| d.tokens.as_slice()))))?;
    let params = MdgrParams {
        k: 64,
        window: 32,
        stride: 16,
        ..Default::default()
    };
    let mut index = MdgrIndex::build_initial(&initial, embedder, params)?;
    println!("initial: {} docs, {} distinct codes", initial.len(), index.existing_codes.len());

    let pairs = build_training_pairs(&plan, &corpus, &index, Some(params.chunking()), 8)?;
    let scorer = train_reference_scorer(&pairs, index.vocab_size(), ScorerParams::default())?;

    let codes_before = index.existing_codes.clone();
    for o in 1..plan.n_stages() {
        let new: Vec<_> = plan.d_sets[o].iter().map(|id| corpus.docs.get(id).unwrap()).collect();
        index.index_new(&new)?;
    }
    assert_eq!(codes_before, index.existing_codes);
    println!("after increments: {} docs, still {} codes", index.registry.n_docs(), index.existing_codes.len());

    let qid = &plan.q_sets[plan.n_stages() - 1][0];
    let query = corpus.queries.get(qid).unwrap();
    let relevant: Vec<&str> = corpus.qrels.iter().filter(|p| &p.query_id == qid).map(|p| p.doc_id.as_str()).collect();
    println!("query {qid} {:?} relevant {relevant:?}", query.text);
    for r in index.retrieve(&scorer, &query.tokens, 20, 1.0, 5)? {
        println!("  {:<6} score {:.3} coverage {}", r.doc_id, r.score, r.coverage);
    }
    Ok(())
}
