//! New-document Hit@10 of MDGR as the per-position vocabulary grows.
//!
//! cargo run --release --example codebook_sweep -- [config.toml] [k...]

use std::path::PathBuf;
use std::time::Instant;

use dyngr::eval::{load_corpus, partition_for, run_on, ExperimentConfig, Method};

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic.toml")));
    let ks: Vec<usize> = {
        let given: Vec<usize> = args.map(|a| a.parse()).collect::<Result<_, _>>()?;
        if given.is_empty() { vec![64, 1024, 8192] } else { given }
    };
    let base = ExperimentConfig {
        method: Method::Mdgr,
        ..ExperimentConfig::load(&path)?
    };
    let corpus = load_corpus(&base)?;
    let plan = partition_for(&base, &corpus)?;
    println!("{:>6} {:>7} {:>7} {:>8}", "k", "P00", "GA_n", "codes");
    for k in ks {
        let mut cfg = base.clone();
        cfg.mdgr.k = k;
        cfg.validate()?;
        let t = Instant::now();
        let out = run_on(&cfg, &corpus, &plan)?;
        println!(
            "{k:>6} {:>7.3} {:>7.3} {:>8}   ({:.1}s)",
            out.report.stages[0].hit_initial,
            out.report.generalization,
            out.report.effective_vocab_size.unwrap_or(0),
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
