//! Trains the counting scorer on query/docid pairs and decodes with beam
//! search restricted to registered docids.
//!
//! cargo run --example constrained_decoding

use dyngr::corpus::Vocabulary;
use dyngr::decode::constrained_beam_search;
use dyngr::docid_index::{register, DocidKind, DocidRegistry, PrefixTree};
use dyngr::scorer::{sequence_logprob, train_reference_scorer, ScorerParams, TrainingPair};

fn main() -> anyhow::Result<()> {
    let mut vocab = Vocabulary::new();
    let docs = [
        ("astronomy", vec![0, 1, 2], "stars planets orbit telescope"),
        ("botany", vec![0, 3, 1], "plants leaves roots flowers"),
        ("cooking", vec![2, 2, 0], "recipe oven flour butter"),
        ("geology", vec![0, 1, 3], "rocks minerals volcano crust"),
    ];
    let mut registry = DocidRegistry::new(DocidKind::Numeric { len: 3 });
    let mut tree = PrefixTree::new();
    let mut pairs = Vec::new();
    for (name, code, words) in &docs {
        register(&mut registry, &mut tree, code, name)?;
        for w in words.split(' ') {
            pairs.push(TrainingPair {
                query: vocab.intern_text(w),
                target: code.clone(),
                weight: 1,
            });
        }
    }
    let scorer = train_reference_scorer(&pairs, 4, ScorerParams::default())?;

    for q in ["telescope orbit", "volcano rocks", "butter"] {
        let query = vocab.intern_text(q);
        let hyps = constrained_beam_search(&scorer, &tree, &query, 3, 3)?;
        println!("{q:?}");
        for h in hyps {
            let names: Vec<&str> = registry.lookup(&h.tokens).collect();
            assert!((h.logprob - sequence_logprob(&scorer, &query, &h.tokens)).abs() < 1e-9);
            println!("  {}. {:?} {:>8.3} {names:?}", h.rank, h.tokens, h.logprob);
        }
    }
    Ok(())
}
