use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use shotscore::scoring::FVariant;

use crate::config::{Profile, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "shotscore",
    version,
    about = "Frame importance scoring and shot-level video summarization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic brightness dataset.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train a scorer on the training split of a dataset.
    Train {
        /// Directory holding manifest.json and annotations.csv.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score every frame of the test videos with a trained checkpoint.
    Predict {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Score every video instead of only the test split.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Compute MAE, AEV and F-measure from per-frame score CSVs.
    Evaluate {
        /// Directory of per-video score CSVs written by `predict`.
        #[arg(long)]
        scores: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Select summary shots from per-frame score CSVs.
    Summarize {
        #[arg(long)]
        scores: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare analytic and finite-difference gradients in 64-bit mode.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
    /// synth, train, predict, evaluate and summarize in one run.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Synth { common }
            | Command::Train { common, .. }
            | Command::Predict { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Summarize { common, .. }
            | Command::Gradcheck { common }
            | Command::Pipeline { common } => common,
        }
    }
}

/// Flags shared by every subcommand; each overrides the matching key of
/// the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub keep_prob: Option<f64>,
    #[arg(long)]
    pub input_side: Option<usize>,
    #[arg(long)]
    pub resize_side: Option<usize>,
    #[arg(long)]
    pub summary_fraction: Option<f64>,
    /// paper or standard.
    #[arg(long)]
    pub f_variant: Option<FVariant>,
    #[arg(long)]
    pub smooth_window: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn resolve(&self) -> shotscore::Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref(), self.profile)?;
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        set!(
            seed,
            epochs,
            batch_size,
            max_iterations,
            lr,
            keep_prob,
            input_side,
            resize_side,
            summary_fraction,
            f_variant,
            smooth_window,
            out
        );
        Ok(cfg)
    }
}
