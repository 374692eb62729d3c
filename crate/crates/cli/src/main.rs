//! `credro` command-line interface.
//!
//! Exit codes: 0 success, 1 usage (bad flags, missing input files), 2 data
//! error (malformed or inconsistent files), 3 numeric or oracle failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "credro", version, about = "Credal uncertainty quantification with top-δ DRO ensembles")]
struct Cli {
    /// Worker threads for member training and per-instance UQ (default: all
    /// cores). Outputs do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled feature table from a dataset spec.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an ensemble and write member model files plus metadata.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Train the deep-ensemble baseline (plain ERM, no top-δ selection).
        #[arg(long)]
        deep_ensemble: bool,
    },
    /// Write every member's predictions for every row of a feature table.
    Predict {
        #[arg(long)]
        model_dir: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute one uncertainty value per instance of a prediction file.
    Uq(UqArgs),
    /// AUROC of separating in-distribution from OOD instances by uncertainty.
    EvalOod {
        #[arg(long)]
        id: PathBuf,
        #[arg(long)]
        ood: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy-rejection curve, its AUC, normalized AR, ECE and PIL summary.
    EvalSelect {
        #[arg(long)]
        pred: PathBuf,
        /// entropy-diff, mi, width or pil (default: width for C = 2, else entropy-diff)
        #[arg(long)]
        measure: Option<String>,
        /// box or hull
        #[arg(long, default_value = "box")]
        set: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-check the exact solvers and AUROC against brute-force oracles.
    OracleCheck {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct UqArgs {
    #[arg(long)]
    pred: PathBuf,
    /// box or hull
    #[arg(long, default_value = "box")]
    set: String,
    /// entropy-diff, mi, width or pil (default: width for C = 2, else entropy-diff)
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
