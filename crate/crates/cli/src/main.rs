//! `qrecon`: generate tomography datasets, train reconstruction networks,
//! reconstruct states and reproduce the fidelity experiments.

mod commands;
mod config;
mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Profile, Settings};
use error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "qrecon", version, about = "Dimension-adaptive neural quantum state reconstruction")]
struct Cli {
    /// TOML file of `key = value` settings; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scale defaults: desk (4000/200/50) or paper (35000/500/300)
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo and experiments; 1 is fully serial
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample random states and write a binary dataset
    Generate(GenerateArgs),
    /// Train a network on a dataset
    Train(TrainArgs),
    /// Reconstruct states from a dataset's measurement vectors
    Reconstruct(ReconstructArgs),
    /// Reproduce an experiment
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Random-pair and maximally-mixed fidelity baselines
    Baselines(BaselineArgs),
}

#[derive(Subcommand, Debug)]
enum ExperimentCmd {
    /// Fidelity of the full reconstruction and its subsystems
    Fig2(Fig2Args),
    /// Engineered vs zero padding across qubit counts
    Fig3(Fig3Args),
    /// Same as the top-level `baselines` command
    Baselines(BaselineArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub qubits: Option<usize>,
    /// hs or bures
    #[arg(long)]
    pub measure: Option<String>,
    /// Number of states; defaults to train_count + val_count
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Separate validation set; otherwise the last val_count records of --data are held out
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory of an earlier run to continue from
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub val_count: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub dense1: Option<usize>,
    #[arg(long)]
    pub dense2: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset whose measurement vectors are reconstructed
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// engineered or zero
    #[arg(long)]
    pub mode: Option<String>,
    /// Bloch vector "x,y,z" for the fictitious qubits in engineered mode (default: maximally mixed)
    #[arg(long)]
    pub pad_bloch: Option<String>,
}

#[derive(Args, Debug)]
pub struct Fig2Args {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Test dataset; generated from the seed when absent
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub test_count: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Fig3Args {
    /// One checkpoint per network size
    #[arg(long, required = true)]
    pub checkpoint: Vec<PathBuf>,
    /// Test datasets, at most one per qubit count; missing ones are generated
    #[arg(long)]
    pub test: Vec<PathBuf>,
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub test_count: Option<usize>,
    #[arg(long)]
    pub baseline_pairs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long)]
    pub baseline_pairs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

impl Cli {
    fn flag_settings(&self) -> Settings {
        let global = Settings { profile: self.profile, seed: self.seed, workers: self.workers, ..Settings::default() };
        let local = match &self.command {
            Command::Generate(a) => Settings { qubits: a.qubits, measure: a.measure.clone(), count: a.count, ..Settings::default() },
            Command::Train(a) => Settings {
                val_count: a.val_count,
                epochs: a.epochs,
                filters: a.filters,
                dense1: a.dense1,
                dense2: a.dense2,
                dropout: a.dropout,
                learning_rate: a.learning_rate,
                batch_size: a.batch_size,
                ..Settings::default()
            },
            Command::Reconstruct(a) => Settings { mode: a.mode.clone(), pad_bloch: a.pad_bloch.clone(), ..Settings::default() },
            Command::Experiment(ExperimentCmd::Fig2(a)) => {
                Settings { measure: a.measure.clone(), test_count: a.test_count, ..Settings::default() }
            }
            Command::Experiment(ExperimentCmd::Fig3(a)) => Settings {
                measure: a.measure.clone(),
                test_count: a.test_count,
                baseline_pairs: a.baseline_pairs,
                ..Settings::default()
            },
            Command::Experiment(ExperimentCmd::Baselines(a)) | Command::Baselines(a) => {
                Settings { baseline_pairs: a.baseline_pairs, ..Settings::default() }
            }
        };
        global.overlay(local)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let settings = Settings::resolve(file, cli.flag_settings());
    match &cli.command {
        Command::Generate(a) => commands::generate(a, &settings),
        Command::Train(a) => commands::train(a, &settings),
        Command::Reconstruct(a) => commands::reconstruct(a, &settings),
        Command::Experiment(ExperimentCmd::Fig2(a)) => commands::fig2(a, &settings),
        Command::Experiment(ExperimentCmd::Fig3(a)) => commands::fig3(a, &settings),
        Command::Experiment(ExperimentCmd::Baselines(a)) | Command::Baselines(a) => commands::baselines(a, &settings),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
