use std::path::PathBuf;

use adams::engine::AttackMode;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "adams", version, about = "Adaptive, dynamic mangling-rule dictionary attacks")]
pub struct Cli {
    /// JSON object of flag values for the subcommand; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dictionary, attacked set and rule set.
    Synth(SynthArgs),
    /// Label dictionary words by simulating an attack.
    Label(LabelArgs),
    /// Train a compatibility model on a labeled training set.
    Train(TrainArgs),
    /// Run a guessing attack and write its report.
    Attack(AttackArgs),
    /// Success rates, histograms and run comparison over attack reports.
    Eval(EvalArgs),
    /// Measure guesses per second of several attack modes.
    Bench(BenchArgs),
    /// Write the model's word representations as CSV.
    ExportEmbeddings(ExportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Label(_) => "label",
            Command::Train(_) => "train",
            Command::Attack(_) => "attack",
            Command::Eval(_) => "eval",
            Command::Bench(_) => "bench",
            Command::ExportEmbeddings(_) => "export-embeddings",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of dictionary words.
    #[arg(long, default_value_t = 5000)]
    pub words: usize,
    /// Number of attacked-set passwords.
    #[arg(long, default_value_t = 20000)]
    pub targets: usize,
    /// Template mixture weights: name,short,digits,mixed.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub weights: Option<Vec<f64>>,
    /// Share of targets derived from an earlier target instead of a dictionary word.
    #[arg(long)]
    pub chain_fraction: Option<f64>,
    /// Share of targets mangled with a family foreign to the base word's template.
    #[arg(long)]
    pub cross_fraction: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct LabelArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long)]
    pub targets: PathBuf,
    /// Training-set file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the set bits as `word_index,rule_index` CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Training-set file produced by `label`.
    #[arg(long)]
    pub data: PathBuf,
    /// Weight file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON-lines training log; defaults to `<out>.log.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 64)]
    pub filters: usize,
    #[arg(long, default_value_t = 5)]
    pub kernel: usize,
    #[arg(long, default_value_t = 2)]
    pub bottleneck: usize,
    #[arg(long, default_value_t = 128)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    /// Fixed focal-loss class weight; derived from the positive-label ratio when absent.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    /// Share of the training set held out for validation.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct AttackArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long, default_value = "standard")]
    pub mode: AttackMode,
    /// Weight file; required by adaptive, dynamic-budget and adams.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.6)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta_scale: f64,
    #[arg(long, default_value_t = 0.05)]
    pub clamp_min: f64,
    #[arg(long, default_value_t = 0.99)]
    pub clamp_max: f64,
    #[arg(long, default_value_t = 4096)]
    pub batch_size: usize,
    #[arg(long)]
    pub max_guesses: Option<u64>,
    /// Count repeated hits on the same target.
    #[arg(long)]
    pub keep_targets: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Report directories (or `report.json` files).
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Guess budget for the success rate; defaults to each run's total guesses.
    #[arg(long)]
    pub beta_g: Option<u64>,
    /// Write an aligned comparison of all runs to this CSV.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Write per-run hit and selection histograms into this directory.
    #[arg(long)]
    pub histograms: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "standard,adaptive")]
    pub modes: Vec<AttackMode>,
    #[arg(long, default_value_t = 10.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 0.6)]
    pub beta: f64,
    #[arg(long, default_value_t = 4096)]
    pub batch_size: usize,
    /// Also write the measurements as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dict: PathBuf,
    /// Rule file to check the model against.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// CSV path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
