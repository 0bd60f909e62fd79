use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod error;
mod stages;

use config::RunConfig;
use error::CliResult;
use stages::{ConditionSpec, Stage};

/// Task-agnostic GNN explanation pipeline.
#[derive(Parser, Debug)]
#[command(name = "tage", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the configured synthetic dataset.
    GenData,
    /// Stage 1: pretrain (or train) and freeze the encoder.
    Pretrain,
    /// Stage 2: fit downstream heads on frozen embeddings.
    TrainDownstream {
        /// Only this task; every task otherwise.
        #[arg(long)]
        task: Option<usize>,
    },
    /// Train the embedding explainer without labels or heads.
    TrainExplainer,
    /// Score the edges of one graph or node.
    Explain {
        /// one-hot:K, downstream:T or uniform.
        #[arg(long)]
        condition: String,
        #[arg(long, default_value_t = 0)]
        graph: usize,
        /// Node to explain (node-level data).
        #[arg(long)]
        target: Option<usize>,
    },
    /// Fidelity at the configured sparsity and edge AUC, per task and method.
    Evaluate,
    /// Fidelity and sparsity over `eval.k_list`.
    Sweep,
    /// One explainer for every task, with timing.
    Report,
    /// Print the resolved configuration.
    ShowConfig,
}

fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::defaults();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for pair in &cli.overrides {
        cfg.apply_override(pair)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.set("out_dir", &dir.to_string_lossy())?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = resolve(&cli)?;
    if let Command::ShowConfig = cli.command {
        cfg.validate()?;
        print!("{}", cfg.to_text());
        println!("# config_hash = {}", cfg.hash());
        return Ok(());
    }
    let stage = Stage::new(cfg)?;
    match cli.command {
        Command::GenData => stage.gen_data(),
        Command::Pretrain => stage.pretrain(),
        Command::TrainDownstream { task } => stage.train_downstream(task),
        Command::TrainExplainer => stage.train_explainer(),
        Command::Explain {
            condition,
            graph,
            target,
        } => {
            let body = stage.explain(ConditionSpec::parse(&condition)?, graph, target)?;
            print!("{body}");
            Ok(())
        }
        Command::Evaluate => stage.evaluate(),
        Command::Sweep => stage.sweep(),
        Command::Report => stage.report(),
        Command::ShowConfig => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
