//! Command-line surface: checkpoint creation, batch embedding, trial
//! scoring, score normalization, metric evaluation, and cost accounting.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
//! error (non-finite outputs).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use nexttdnn::error::Error;

pub mod batch;
pub mod commands;
pub mod manifest;

use batch::BatchError;

#[derive(Parser)]
#[command(
    name = "nexttdnn",
    version,
    about = "NeXt-TDNN speaker-verification inference and evaluation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Write a seeded random checkpoint for a config
    InitRandom {
        /// Architecture config (TOML)
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output checkpoint path
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute embeddings for every WAV in a list
    Embed {
        #[arg(long)]
        ckpt: PathBuf,
        /// Text file: one `PATH` or `ID PATH` per line
        #[arg(long)]
        wav_list: PathBuf,
        /// Crop start within each file, seconds
        #[arg(long, default_value_t = 0.0)]
        offset_sec: f64,
        /// Crop duration, seconds (whole file when omitted)
        #[arg(long)]
        dur_sec: Option<f64>,
        /// Output embedding store
        #[arg(long)]
        out: PathBuf,
        /// Worker pool degree (logical cores when omitted)
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Raw cosine scores for a trial list
    Score {
        /// Embedding store with all trial utterances
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        trials: PathBuf,
        /// Output score file
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply adaptive s-norm to a score file
    Snorm {
        #[arg(long)]
        scores: PathBuf,
        /// Embedding store with the trial utterances
        #[arg(long)]
        emb: PathBuf,
        /// Imposter cohort embedding store
        #[arg(long)]
        cohort_emb: PathBuf,
        /// Number of top imposter scores per side
        #[arg(long, default_value_t = nexttdnn::eval::DEFAULT_TOP_K)]
        top_k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print EER(%) and minDCF for scored trials
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        trials: PathBuf,
    },
    /// Parameter count with a per-layer breakdown
    Params {
        #[arg(long)]
        config: PathBuf,
    },
    /// Multiply-accumulate count with a per-layer breakdown
    Macs {
        #[arg(long)]
        config: PathBuf,
        /// Segment length the costs are measured on
        #[arg(long, default_value_t = 3.0)]
        seconds: f64,
    },
}

/// Command failure, possibly tagged with the utterance that caused it.
#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Job { id: String, source: Error },
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<BatchError> for CliError {
    fn from(e: BatchError) -> Self {
        match e {
            BatchError::Setup(source) => CliError::Core(source),
            BatchError::Job { id, source } => CliError::Job { id, source },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Job { id, source } => write!(f, "utterance '{id}': {source}"),
        }
    }
}

impl CliError {
    fn source(&self) -> &Error {
        match self {
            CliError::Core(e) => e,
            CliError::Job { source, .. } => source,
        }
    }

    fn exit_code(&self) -> i32 {
        match self.source() {
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}

/// Parse and dispatch; returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::InitRandom { config, seed, out: path } => {
            commands::init_random(config, *seed, path, out)
        }
        Command::Embed {
            ckpt,
            wav_list,
            offset_sec,
            dur_sec,
            out: path,
            workers,
        } => commands::embed(ckpt, wav_list, *offset_sec, *dur_sec, path, *workers, out),
        Command::Score { emb, trials, out: path } => commands::score(emb, trials, path, out),
        Command::Snorm {
            scores,
            emb,
            cohort_emb,
            top_k,
            out: path,
        } => commands::snorm(scores, emb, cohort_emb, *top_k, path, out),
        Command::Eval { scores, trials } => commands::eval(scores, trials, out),
        Command::Params { config } => commands::params(config, out),
        Command::Macs { config, seconds } => commands::macs(config, *seconds, out),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            match &err {
                CliError::Core(e) => eprintln!("error: {e}"),
                CliError::Job { id, source } => eprintln!("error: utterance '{id}': {source}"),
            }
            err.exit_code()
        }
    }
}
