use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dyngr::eval::{evaluate_run_file, ExperimentConfig, Method, MetricsReport, Workspace};

#[derive(Parser)]
#[command(name = "dyngr", version, about = "Generative retrieval over growing corpora")]
struct Cli {
    /// Experiment config (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the config method (hier-kmeans, pq, ngram-fm, mdgr, bm25).
    #[arg(long, global = true)]
    method: Option<Method>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Split documents and queries into the initial collection and increments.
    Partition,
    /// Index the initial collection.
    Build,
    /// Train the scorer on the initial collection.
    Train,
    /// Add one increment to the index.
    Add {
        #[arg(long)]
        stage: usize,
    },
    /// Retrieve for the queries of one stage.
    Retrieve {
        #[arg(long)]
        stage: usize,
    },
    /// Fold the run files into report.json, or score a single run file.
    Evaluate {
        #[arg(long, requires = "qrels")]
        run: Option<PathBuf>,
        #[arg(long)]
        qrels: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// All steps in order.
    Run,
}

fn workspace(cli: &Cli) -> Result<Workspace> {
    let path = cli.config.as_ref().context("--config is required for this subcommand")?;
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(method) = cli.method {
        cfg.method = method;
    }
    Ok(Workspace::new(cfg, &cli.out_dir)?)
}

fn summary(r: &MetricsReport) {
    println!("{}  F_n={:.4}  GA_n={:.4}  IDBI={:.4}", r.method, r.forgetting, r.generalization, r.mean_idbi);
}

fn main() -> ExitCode {
    env_logger::init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Cmd::Evaluate { run: Some(run), qrels: Some(qrels), k } = &cli.cmd {
        println!("hit@{k}\t{:.6}", evaluate_run_file(run, qrels, *k)?);
        return Ok(());
    }
    let ws = workspace(&cli)?;
    match cli.cmd {
        Cmd::Partition => {
            let plan = ws.partition()?;
            let sizes: Vec<usize> = plan.d_sets.iter().map(Vec::len).collect();
            println!("stages {}  documents {sizes:?}", plan.n_stages());
        }
        Cmd::Build => {
            let index = ws.build()?;
            println!("indexed {} documents", index.indexed.len());
        }
        Cmd::Train => match ws.train()? {
            Some(s) => println!("scorer {}", s.state_hash()),
            None => println!("{} has no scorer", ws.cfg.method),
        },
        Cmd::Add { stage } => {
            let index = ws.add(stage)?;
            println!("stage {stage}: {} documents indexed", index.indexed.len());
        }
        Cmd::Retrieve { stage } => {
            let runs = ws.retrieve(stage)?;
            println!("stage {stage}: {} initial queries", runs.initial.queries.len());
        }
        Cmd::Evaluate { .. } => summary(&ws.evaluate()?),
        Cmd::Run => summary(&ws.run()?),
    }
    Ok(())
}
