//! The dynamic-corpus metrics on hand-made numbers: forgetting, generalization,
//! the initial document bias index, Hit@K and semantic familiarity.
//!
//! cargo run --example metrics

use std::collections::BTreeMap;

use dyngr::corpus::RelevancePair;
use dyngr::eval::{forgetting_metric, generalization_metric, hit_at_k, idbi_from_counts, semantic_familiarity, Qrels, RetrievalRun, UnigramLm};

fn main() -> anyhow::Result<()> {
    // Hit@10 on initial queries after each stage, and on each increment's queries
    let initial = [0.871, 0.850, 0.832, 0.829, 0.812, 0.804];
    let new = [0.46, 0.44, 0.41, 0.37, 0.35];
    println!("F_n  = {:.4}", forgetting_metric(initial[0], &initial[1..])?);
    println!("GA_n = {:.4}", generalization_metric(&new)?);

    // 8 of 10 results are initial documents while the corpus is half initial
    println!("IDBI = {:.2}", idbi_from_counts(8.0, 5.0, 10)?);

    let mut run = RetrievalRun::new("demo", 0);
    run.queries = BTreeMap::from([
        ("q1".to_string(), vec![("d3".to_string(), 2.0), ("d1".to_string(), 1.0)]),
        ("q2".to_string(), vec![("d2".to_string(), 1.0)]),
    ]);
    let pairs = vec![RelevancePair::new("q1", "d1"), RelevancePair::new("q2", "d9")];
    let qrels = Qrels::new(&pairs);
    println!("hit@1 = {}  hit@2 = {}", hit_at_k(&run, &qrels, 1)?, hit_at_k(&run, &qrels, 2)?);

    let lm = UnigramLm::fit("the cat sat on the mat the end".split(' '));
    println!("S(titles)  = {:.3}", semantic_familiarity(&lm, "the cat".split(' '))?);
    println!("S(numbers) = {:.3}", semantic_familiarity(&lm, "17 204".split(' '))?);
    Ok(())
}
