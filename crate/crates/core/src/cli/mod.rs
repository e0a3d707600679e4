//! The `spatial-templates` command line.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config_text, Layers, List, ENV_PREFIX};

#[derive(Debug, Parser)]
#[command(
    name = "spatial-templates",
    version,
    about = "Predict where an object sits relative to a subject from a (subject, relation, object) triplet"
)]
pub struct Cli {
    /// Config file with defaults for any option (JSON object or `key = value` lines).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, filter, normalize and mirror an annotation file into a corpus.
    Ingest(IngestArgs),
    /// Build cross-validation or generalization splits of a corpus.
    Split(SplitArgs),
    /// Generate a synthetic corpus from template rules.
    Synth(SynthArgs),
    /// Train REG or PIX models, one per fold.
    Train(TrainArgs),
    /// Score a checkpoint, or the random control, on the test folds.
    Eval(EvalArgs),
    /// Predict the object placement for queries.
    Predict(PredictArgs),
    /// Draw predictions as SVG figures.
    Render(RenderArgs),
    /// Fit the linear interpreter and rank word weights.
    Weights(WeightsArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Annotation file (`.gz` accepted).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `vg_relationships` or `canonical_jsonl` [default: canonical_jsonl].
    #[arg(long)]
    pub format: Option<String>,
    /// Image metadata file giving image sizes (Visual Genome format only).
    #[arg(long)]
    pub image_data: Option<PathBuf>,
    /// Explicit-preposition list, one word per line [default: built-in list].
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
    /// Abort on the first malformed record instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    /// `implicit`, `explicit` or `all` [default: implicit].
    #[arg(long)]
    pub partition: Option<String>,
    /// Keep only instances whose three words have a vector in this file.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Vector dimension of `--vectors` [default: 300].
    #[arg(long)]
    pub emb_dim: Option<usize>,
    /// Output corpus (JSONL).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// `cv`, `gen-triplets` or `gen-words` [default: cv].
    #[arg(long)]
    pub mode: Option<String>,
    /// Number of folds [default: 10].
    #[arg(long)]
    pub k: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Held-out words, one per line [default: built-in list].
    #[arg(long)]
    pub words_file: Option<PathBuf>,
    /// Explicit held-out triplets, `s,r,o;s,r,o`. Overrides random picking.
    #[arg(long)]
    pub held_out: Option<String>,
    /// Triplets to hold out when picking at random [default: 100].
    #[arg(long)]
    pub n_pick: Option<usize>,
    /// Pick among this many most frequent triplets [default: 1000].
    #[arg(long)]
    pub top_m: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `default8` or a JSON file of rules [default: default8].
    #[arg(long)]
    pub rules: Option<String>,
    /// Number of instances [default: 20000].
    #[arg(long)]
    pub n: Option<usize>,
    /// Per-axis Gaussian noise on object centers [default: 0.02].
    #[arg(long)]
    pub noise: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Split plan; without one a single model is trained on the whole corpus.
    #[arg(long)]
    pub split_plan: Option<PathBuf>,
    /// Train only this fold [default: every fold].
    #[arg(long)]
    pub fold: Option<usize>,
    /// `reg` or `pix` [default: reg].
    #[arg(long)]
    pub head: Option<String>,
    /// `emb`, `rnd` or `1h` [default: emb].
    #[arg(long)]
    pub emb: Option<String>,
    /// Pretrained vectors in text format (`emb` and `rnd`).
    #[arg(long)]
    pub emb_file: Option<PathBuf>,
    /// [default: 300]
    #[arg(long)]
    pub emb_dim: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 64]
    #[arg(long)]
    pub batch: Option<usize>,
    /// [default: 0.0001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden layer widths [default: 100,100].
    #[arg(long)]
    pub hidden: Option<List<usize>>,
    /// [default: 15]
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Folds trained in parallel [default: 1].
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Zero the subject-size inputs.
    #[arg(long)]
    pub drop_subject_size: bool,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also evaluate each fold and write the report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint from `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Score the random control instead of a model.
    #[arg(long)]
    pub ctrl: bool,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub split_plan: Option<PathBuf>,
    /// Score only this fold [default: every fold].
    #[arg(long)]
    pub fold: Option<usize>,
    /// Control head, `reg` or `pix` [default: reg].
    #[arg(long)]
    pub head: Option<String>,
    /// Control grid size [default: 15].
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Control seed; fold `k` uses `seed + k` [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// `uniform` or `variance` [default: uniform].
    #[arg(long)]
    pub r2_weighting: Option<String>,
    /// `mean_recall` or `plain` [default: mean_recall].
    #[arg(long)]
    pub macro_accuracy: Option<String>,
    /// [default: 1]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON report to write; the table always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Fold model to use when the checkpoint holds several.
    #[arg(long)]
    pub fold: Option<usize>,
    /// `s,r,o`
    #[arg(long)]
    pub query: Option<String>,
    /// Subject box `x,y,hx,hy` (center and half-extents, normalized).
    #[arg(long)]
    pub subject_box: Option<List<f64>>,
    /// JSONL of queries, one `{subject_word, relation_word, object_word, subject_box}` per line.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Refuse to predict unless the checkpoint matches this corpus's preprocessing.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Refuse to predict unless the checkpoint was built with this stoplist.
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
    /// Output JSONL [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub prediction_file: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// [default: 512]
    #[arg(long)]
    pub canvas: Option<u32>,
    /// Draw the horizontal reflection in a second panel.
    #[arg(long)]
    pub mirrored_view: bool,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Fit on this plan's training part of `--fold` instead of the whole corpus.
    #[arg(long)]
    pub split_plan: Option<PathBuf>,
    /// [default: 0]
    #[arg(long)]
    pub fold: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 64]
    #[arg(long)]
    pub batch: Option<usize>,
    /// [default: 0.0001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Words listed per ranking [default: 10].
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Keep raw weights instead of centering each word group.
    #[arg(long)]
    pub no_center: bool,
    /// Per-token |weight| dump.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON rankings.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_logging(level: &str) {
    let filter = level.parse().unwrap_or(log::LevelFilter::Warn);
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .try_init();
}

/// Runs one command. Returns the process exit code: 0 on success, 2 for
/// usage errors, 1 for anything else.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(&cli.log_level);
    let result = config::Layers::load(cli.config.as_deref()).and_then(|layers| commands::dispatch(cli.command, layers));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
