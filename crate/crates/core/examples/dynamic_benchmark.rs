//! Runs every method through the dynamic-corpus protocol and prints a
//! summary table.
//!
//! cargo run --release --example dynamic_benchmark -- [config.toml] [method...]

use std::path::PathBuf;
use std::time::Instant;

use dyngr::eval::{load_corpus, partition_for, ExperimentConfig, Method};

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic.toml")));
    let methods: Vec<Method> = {
        let named: Vec<Method> = args.map(|a| a.parse()).collect::<Result<_, _>>()?;
        if named.is_empty() { Method::ALL.to_vec() } else { named }
    };
    let base = ExperimentConfig::load(&path)?;
    let corpus = load_corpus(&base)?;
    let plan = partition_for(&base, &corpus)?;
    println!("{:<12} {:>7} {:>7} {:>7} {:>8} {:>9} {:>8}", "method", "P00", "F_n", "GA_n", "IDBI", "S", "|V|");
    for method in methods {
        let cfg = ExperimentConfig { method, ..base.clone() };
        cfg.validate()?;
        let t = Instant::now();
        let out = dyngr::eval::run_on(&cfg, &corpus, &plan)?;
        let r = &out.report;
        println!(
            "{:<12} {:>7.3} {:>7.3} {:>7.3} {:>8.3} {:>9} {:>8}   ({:.1}s)",
            method.name(),
            r.stages[0].hit_initial,
            r.forgetting,
            r.generalization,
            r.mean_idbi,
            r.semantic_familiarity.map_or("-".into(), |s| format!("{s:.2}")),
            r.effective_vocab_size.map_or("-".into(), |v| v.to_string()),
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
