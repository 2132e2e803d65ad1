use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "iest", version, about = "Implicit emotion classification for tweets")]
pub struct Cli {
    /// Worker threads for multi-seed training, sweeps and subset search.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Default dimensions.
    Default,
    /// Small dimensions for desk-scale runs.
    Toy,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value = "tsv")]
    pub report: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Substitute placeholders and tokenize a dataset.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lowercase: bool,
    },
    /// Generate a synthetic labeled dataset.
    GenData {
        /// Overrides the generator's `examples` setting.
        #[arg(long)]
        examples: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Generator settings as `key = value` lines.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Single `key=value` setting, applied after `--spec`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model, or `--members` models with consecutive seeds.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "default")]
        preset: Preset,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        members: usize,
        /// Checkpoint file, or a directory when `--members` exceeds 1.
        #[arg(long)]
        out: PathBuf,
        /// History CSV; defaults to the checkpoint path plus `.history.csv`.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Cache class probabilities of one or more checkpoints.
    Predict {
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Directory receiving one `<checkpoint stem>.proba` per model.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive subset search over cached probabilities.
    Ensemble {
        #[arg(long)]
        probs: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Also cache the averaged probabilities of the best subset.
        #[arg(long)]
        best_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Classification report of predictions against gold labels.
    Evaluate {
        /// Probability cache, or one label per line.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Error analyses over a labeled dataset.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
    /// One fit per configuration override, or per training-data fraction.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long, value_enum, default_value = "default")]
        preset: Preset,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Comma-separated fractions; switches to a data-amount curve.
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args)]
pub struct Labeled {
    /// Labeled dataset the predictions refer to.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Analysis {
    /// Accuracy with and without emoji; per-emoji removal deltas with `--model`.
    Emoji {
        #[command(flatten)]
        data: Labeled,
        #[arg(long, required_unless_present = "model")]
        pred: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Accuracy with and without hashtags.
    Hashtag {
        #[command(flatten)]
        data: Labeled,
        #[arg(long)]
        pred: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Statistics of `un __TRIGGERWORD__` tweets; clustering with `--model`.
    Pattern {
        #[command(flatten)]
        data: Labeled,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Projection of sentence vectors with 2-means cluster ids.
    Pca {
        #[command(flatten)]
        data: Labeled,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}
