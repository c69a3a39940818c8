//! `pra`: dataset generation, LP oracle, training, evaluation, EDF baseline,
//! sweeps and method comparison for predictive resource allocation.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "pra",
    version,
    about = "Predictive resource allocation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Flat `key = value` config file; the desk preset when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run seed; overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Clone)]
pub struct Method {
    /// Overrides the config's sharing flag.
    #[arg(long)]
    pub sharing: Option<bool>,
    /// Fit DNN-s to LP labels instead of primal-dual training.
    #[arg(long)]
    pub supervised: bool,
}

#[derive(Args, Clone)]
pub struct TestSet {
    /// Test dataset (from `gen-data --random-k`).
    #[arg(long)]
    pub test: PathBuf,
    /// Oracle file for the test dataset.
    #[arg(long)]
    pub oracle: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenarios into a line-delimited dataset file.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: usize,
        /// Draw K uniformly from 1..=k_max per scenario instead of K = k_max.
        #[arg(long)]
        random_k: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the plan LP of every scenario of a dataset.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train DNN-s and DNN-λ on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        method: Method,
        #[arg(long)]
        data: PathBuf,
        /// Model container to write.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch CSV log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Test dataset used to log the gap.
        #[arg(long, requires = "oracle")]
        test: Option<PathBuf>,
        #[arg(long, requires = "test")]
        oracle: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        eval_every: usize,
    },
    /// Gap and constraint violations of a trained model.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        test: TestSet,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the EDF scheduler on every scenario of a dataset.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gap versus training-set size, with and without sharing.
    SweepSamples {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        test: TestSet,
        /// Ascending training-set sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.2)]
        target: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Epochs needed to reach the target gap, with and without sharing.
    SweepEpochs {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        test: TestSet,
        #[arg(long, default_value_t = 0.2)]
        target: f64,
        #[arg(long, default_value_t = 1)]
        eval_every: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean transmission time of the optimal, proposed, supervised and EDF methods.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Training dataset for the proposed and supervised models.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        test: TestSet,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData {
            common,
            count,
            random_k,
            out,
        } => commands::gen_data(&common, count, random_k, &out),
        Command::Oracle { common, data, out } => commands::oracle(&common, &data, &out),
        Command::Train {
            common,
            method,
            data,
            out,
            log,
            test,
            oracle,
            eval_every,
        } => {
            let test = test
                .zip(oracle)
                .map(|(test, oracle)| TestSet { test, oracle });
            commands::train(
                &common,
                &method,
                &data,
                &out,
                log.as_deref(),
                test.as_ref(),
                eval_every,
            )
        }
        Command::Eval {
            common,
            model,
            test,
            out,
        } => commands::eval(&common, &model, &test, &out),
        Command::Baseline { common, data, out } => commands::baseline(&common, &data, &out),
        Command::SweepSamples {
            common,
            data,
            test,
            sizes,
            target,
            out,
        } => commands::sweep_samples(&common, &data, &test, &sizes, target, &out),
        Command::SweepEpochs {
            common,
            data,
            test,
            target,
            eval_every,
            out,
        } => commands::sweep_epochs(&common, &data, &test, target, eval_every, &out),
        Command::Compare {
            common,
            data,
            test,
            out,
        } => commands::compare(&common, &data, &test, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
