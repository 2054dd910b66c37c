//! The protocol as separate file-producing steps, the same ones the `dyngr`
//! binary exposes as subcommands.
//!
//! cargo run --release --example pipeline_steps -- [config.toml] [out-dir]

use std::path::PathBuf;

use dyngr::eval::{ExperimentConfig, Workspace};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic.toml")));
    let tmp = tempfile::tempdir()?;
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());
    let ws = Workspace::new(ExperimentConfig::load(&config)?, &out)?;

    let plan = ws.partition()?;
    ws.build()?;
    if let Some(s) = ws.train()? {
        println!("scorer {}", &s.state_hash()[..16]);
    }
    for o in 1..plan.n_stages() {
        ws.add(o)?;
    }
    for o in 0..plan.n_stages() {
        ws.retrieve(o)?;
    }
    let report = ws.evaluate()?;
    for s in &report.stages {
        println!("stage {} indexed {:>5} hit initial {:.3} new {}", s.stage, s.n_indexed, s.hit_initial, s.hit_new.map_or("-".into(), |h| format!("{h:.3}")));
    }
    println!("F_n {:.4}  GA_n {:.4}  written to {}", report.forgetting, report.generalization, ws.report_path().display());
    Ok(())
}
