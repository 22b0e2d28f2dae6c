//! `mml` — drive the manufactured-learning pipeline from the shell:
//! synthesize datasets, train the Fourier neural operator, benchmark
//! zero-forcing generalization, and dump figure data.

use clap::{Parser, Subcommand};
use mml_cli::commands;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mml",
    version,
    about = "Manufactured-solution operator learning pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a training dataset (and optionally a validation dataset
    /// drawn from the sample indices right after the training range).
    Generate {
        /// Run-config file: flat `key = value`, omitted keys take defaults.
        #[arg(long)]
        config: PathBuf,
        /// Output path for the training dataset.
        #[arg(long)]
        out: PathBuf,
        /// Also write a validation dataset here.
        #[arg(long)]
        val_out: Option<PathBuf>,
        /// Override the config's n_samples for the training set.
        #[arg(long)]
        n_samples: Option<usize>,
    },
    /// Train the operator and save the best-validation checkpoint.
    Train {
        /// Run-config file (model + optimizer sections apply here).
        #[arg(long)]
        config: PathBuf,
        /// Training dataset written by `generate`.
        #[arg(long)]
        data: PathBuf,
        /// Validation dataset.
        #[arg(long)]
        val: PathBuf,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Output CSV of per-epoch losses and validation error.
        #[arg(long)]
        history: PathBuf,
        /// Not supported: training always restarts from initialization.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Benchmark a checkpoint on the three canonical starts and write the
    /// report CSV (reporting only — large errors still exit 0).
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Equation name; must match the checkpoint.
        #[arg(long)]
        pde: String,
        /// Output report CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump one benchmark case: time-slice CSVs, full-field CSVs, and
    /// grayscale heatmaps of prediction, reference, and absolute error.
    Plot {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Equation name; must match the checkpoint.
        #[arg(long)]
        pde: String,
        /// Initial condition: single | two | three.
        #[arg(long)]
        ic: String,
        /// Output files are `<prefix>_slice_t0.csv`, `<prefix>_prediction.pgm`, ...
        #[arg(long)]
        out_prefix: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate {
            config,
            out,
            val_out,
            n_samples,
        } => commands::generate(&config, &out, val_out.as_deref(), n_samples),
        Command::Train {
            config,
            data,
            val,
            out,
            history,
            resume,
        } => commands::train(&config, &data, &val, &out, &history, resume.as_deref()),
        Command::Eval {
            checkpoint,
            pde,
            out,
        } => commands::eval(&checkpoint, &pde, &out),
        Command::Plot {
            checkpoint,
            pde,
            ic,
            out_prefix,
        } => commands::plot(&checkpoint, &pde, &ic, &out_prefix),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
