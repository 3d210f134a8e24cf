//! `kgelab` — train, evaluate and probe link-prediction embedding models.
//!
//! Subcommands:
//! - `train`  — run a training job into a self-describing run directory
//!   (manifest + metric log + checkpoint).
//! - `eval`   — rank one dataset split under a saved checkpoint.
//! - `theory` — desk-scale numerical checks of the loss-analysis claims.
//! - `freq`   — dump per-triple subsampling weights as JSON lines.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (bad files, mismatched
//! vocabularies), 3 numerical failure (non-finite loss, failed theory check).

mod cmd_eval;
mod cmd_freq;
mod cmd_theory;
mod cmd_train;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kgelab::loss::{LossFamily, SubsamplingMethod};
use kgelab::scoring::ModelKind;

/// Outcome of a subcommand, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or flag values; nothing was written. Exit 1.
    Usage(String),
    /// Bad input data: unreadable files, malformed triples, vocabulary
    /// mismatches, existing run directories. Exit 2.
    Data(String),
    /// The numbers went wrong: non-finite loss, failed numeric check. Exit 3.
    Numerical(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<kgelab::Error> for Failure {
    fn from(e: kgelab::Error) -> Self {
        match &e {
            kgelab::Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ if e.is_data_error() => Failure::Data(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "kgelab",
    version,
    about = "Link-prediction embedding laboratory",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model into a run directory (manifest, metric log, checkpoint).
    Train(TrainArgs),
    /// Rank a dataset split under a saved checkpoint.
    Eval(EvalArgs),
    /// Run one scenario of the numerical loss-analysis checks.
    Theory(TheoryArgs),
    /// Dump per-triple subsampling weights as JSON lines.
    Freq(FreqArgs),
}

/// Model family, as spelled on the command line.
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Rescal,
    Distmult,
    Complex,
    Transe,
    Rotate,
    Hake,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> ModelKind {
        match m {
            ModelArg::Rescal => ModelKind::Rescal,
            ModelArg::Distmult => ModelKind::DistMult,
            ModelArg::Complex => ModelKind::ComplEx,
            ModelArg::Transe => ModelKind::TransE,
            ModelArg::Rotate => ModelKind::RotatE,
            ModelArg::Hake => ModelKind::Hake,
        }
    }
}

/// Negative-sample weighting family.
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    /// Unit weight per negative sample.
    Ns,
    /// 1/nu weight per negative sample.
    NsKge,
    /// Softmax-of-scores weight per negative sample.
    Sans,
}

impl From<LossArg> for LossFamily {
    fn from(l: LossArg) -> LossFamily {
        match l {
            LossArg::Ns => LossFamily::NsOriginal,
            LossArg::NsKge => LossFamily::NsKge,
            LossArg::Sans => LossFamily::Sans,
        }
    }
}

/// Frequency-based instance weighting scheme.
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SubsamplingArg {
    None,
    Base,
    Freq,
    Uniq,
}

impl From<SubsamplingArg> for SubsamplingMethod {
    fn from(s: SubsamplingArg) -> SubsamplingMethod {
        match s {
            SubsamplingArg::None => SubsamplingMethod::None,
            SubsamplingArg::Base => SubsamplingMethod::Base,
            SubsamplingArg::Freq => SubsamplingMethod::Freq,
            SubsamplingArg::Uniq => SubsamplingMethod::Uniq,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// TOML file holding a full training configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named hyperparameter preset (see `--preset list`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,

    // Overrides applied on top of the config file or preset.
    #[arg(long)]
    model: Option<ModelArg>,
    #[arg(long)]
    loss: Option<LossArg>,
    /// Margin added to every score inside the loss.
    #[arg(long)]
    gamma: Option<f64>,
    /// Negative samples per training instance.
    #[arg(long)]
    nu: Option<usize>,
    /// Temperature of the adversarial weighting (sans only).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    subsampling: Option<SubsamplingArg>,
    #[arg(long)]
    lr: Option<f64>,
    /// Training instances per step.
    #[arg(long)]
    batch: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Total optimizer steps.
    #[arg(long)]
    steps: Option<u64>,
    /// Root seed; every random draw in the run derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Validation-ranking cadence in steps (0 disables).
    #[arg(long)]
    eval_every: Option<u64>,
    /// Residual-norm exponent for the distance models (1 or 2).
    #[arg(long)]
    p: Option<u32>,
    /// Directory holding train.txt / valid.txt / test.txt.
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    /// Run directory to create (default: runs/<label>-seed<seed>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Dataset split selector.
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Valid,
    Test,
}

/// Whether known answers are dropped from the candidate list before ranking.
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Filtered,
    Raw,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Checkpoint file written by `train`.
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// Directory holding train.txt / valid.txt / test.txt.
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long, value_enum, default_value = "filtered")]
    mode: ModeArg,
}

/// The numeric checks, one scenario per claim.
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    /// Both fixed-weight families drive descent to the same distribution.
    Prop1,
    /// A bounded score range makes low-noise cells unreachable without a
    /// margin, and the loss floor rises exactly on those cells.
    Prop2,
    /// The margin changes the gradients of the normalized family.
    Prop3,
    /// The sample count bounds what the unit-weight family can reach.
    Prop4,
    /// Negative-term gradient norms grow linearly with the sample count
    /// under unit weights and stay flat under normalized weights.
    Prop5,
    /// The adversarial loss matches exact model-noise resampling.
    Prop6,
    /// Smallest margin that keeps every cell reachable, per benchmark.
    Margins,
}

#[derive(Debug, clap::Args)]
pub struct TheoryArgs {
    #[arg(value_enum)]
    scenario: ScenarioArg,
    /// Seed for the synthetic instances and Monte-Carlo draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, clap::Args)]
pub struct FreqArgs {
    /// Directory holding train.txt / valid.txt / test.txt.
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    /// Weighting scheme to dump.
    #[arg(long, value_enum, default_value = "base")]
    method: SubsamplingArg,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap writes help to stdout and errors to stderr on its own.
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train::run(&args),
        Command::Eval(args) => cmd_eval::run(&args),
        Command::Theory(args) => cmd_theory::run(&args),
        Command::Freq(args) => cmd_freq::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
