//! `ticl`: synthetic suites, training, evaluation, retrieval and curation
//! over feature/metadata file pairs.
//!
//! Exit status is 0 on success, 2 when an input or flag fails validation
//! and 1 on I/O failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ticl", version, about = "Time-image contrastive learning over precomputed image features")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

/// A feature file (`TICF` binary) and its line-aligned metadata (JSON lines).
#[derive(Args, Debug, Clone)]
struct DataArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    meta: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct GalleryArgs {
    #[arg(long)]
    gallery_features: Option<PathBuf>,
    #[arg(long)]
    gallery_meta: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SpaceArgs {
    /// Time-of-day classes; must divide 1440.
    #[arg(long)]
    classes: Option<usize>,
    /// Cross the label space with the month of each record's date.
    #[arg(long)]
    month_factor: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic suite as a feature/metadata pair.
    Synth(SynthCmd),
    /// Train a model; optionally write the loss trace.
    Train(TrainCmd),
    /// Score predictions on a labelled set.
    Eval(EvalCmd),
    /// Fit a least-squares time regressor on one set and score it on another.
    Baseline(BaselineCmd),
    /// Image-to-image retrieval: recall curve and error histograms.
    Retrieve(RetrieveCmd),
    /// Dataset curation tools.
    #[command(subcommand)]
    Curate(CurateCmd),
    /// Cosine-distance guidance loss of each record toward a target class.
    Guidance(GuidanceCmd),
    /// Class probabilities for external embeddings.
    Affinity(AffinityCmd),
    /// Check that a feature/metadata pair loads.
    Validate(DataArgs),
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long, value_enum)]
    suite: Suite,
    #[command(flatten)]
    out: DataArgs,
    /// Overrides the suite's fixed seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    /// Fraction of feature dims that only carry the mirror-symmetric signal.
    #[arg(long)]
    confuser: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Suite {
    Separable,
    Confuser,
    Skewed,
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Output model (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Per-epoch trace, columns `epoch,lr,mean_loss`.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    /// JSON run configuration: `{"classes", "month_factor", "model": {...}, "train": {...}}`.
    /// Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Comma-separated hidden widths of the time encoder.
    #[arg(long, value_delimiter = ',')]
    time_hidden: Option<Vec<usize>>,
    /// Comma-separated hidden widths of the image adaptor.
    #[arg(long, value_delimiter = ',')]
    adaptor_hidden: Option<Vec<usize>>,
    /// relu or gelu-approx.
    #[arg(long)]
    activation: Option<String>,
    #[arg(long, value_enum)]
    time_input: Option<TimeInputArg>,
    /// Width of the RFF or Time2Vec input.
    #[arg(long, default_value_t = 64)]
    time_input_dim: usize,
    /// RFF frequency scale.
    #[arg(long, default_value_t = 1.0)]
    rff_sigma: f64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Halve the learning rate every this many epochs.
    #[arg(long)]
    halve_every: Option<usize>,
    /// class (negatives are all classes) or batch (in-batch negatives).
    #[arg(long)]
    loss_mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TimeInputArg {
    Onehot,
    Rff,
    Time2vec,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum EvalMode {
    Classify,
    Knn,
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "classify")]
    mode: EvalMode,
    /// Defaults to the model's class count (classify) or 24 (knn).
    #[command(flatten)]
    space: SpaceArgs,
    /// Labelled gallery searched in knn mode.
    #[command(flatten)]
    gallery: GalleryArgs,
    /// Classes kept per prediction.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Report, columns `metric,value`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Confusion matrix, header `truth,0,...,C-1`, one row per true class.
    #[arg(long)]
    confusion: Option<PathBuf>,
    /// Per-record rows `id,time,true_class,pred_time,pred_classes`
    /// (pred_classes space-separated, best first).
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BaselineKind {
    Scalar,
    Cyclic,
}

#[derive(Args)]
struct BaselineCmd {
    #[arg(long, value_enum)]
    kind: BaselineKind,
    #[arg(long)]
    train_features: PathBuf,
    #[arg(long)]
    train_meta: PathBuf,
    #[arg(long)]
    test_features: PathBuf,
    #[arg(long)]
    test_meta: PathBuf,
    /// Report, columns `metric,value` (samples, time_mae_minutes, hour_accuracy).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RetrieveCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    gallery_features: PathBuf,
    #[arg(long)]
    gallery_meta: PathBuf,
    #[arg(long)]
    query_features: PathBuf,
    #[arg(long)]
    query_meta: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,50,100")]
    ks: Vec<usize>,
    /// Results per query counted in the histograms.
    #[arg(long, default_value_t = 1)]
    top_n: usize,
    /// Skip gallery items whose id equals the query id.
    #[arg(long)]
    exclude_self: bool,
    /// Columns `k,recall`.
    #[arg(long)]
    recall: Option<PathBuf>,
    /// Columns `bin_start_minutes,bin_end_minutes,count`.
    #[arg(long)]
    time_hist: Option<PathBuf>,
    /// Columns `bin_start_degrees,bin_end_degrees,count`, then an `excluded` row.
    #[arg(long)]
    geo_hist: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CurateCmd {
    /// Block-variance SNR of PGM images.
    /// Columns `path,status,snr_db,noise_var,signal_var,total_var,blocks_used,discard`.
    Snr {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flag bright images taken at night. Columns `id,time,brightness,lat,flag`
    /// with flag keep, review or unknown (no brightness).
    Night {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated local hours counted as night.
        #[arg(long, value_delimiter = ',')]
        hours: Option<Vec<u16>>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write records not flagged for review to this pair.
        #[arg(long, requires = "keep_meta")]
        keep_features: Option<PathBuf>,
        #[arg(long, requires = "keep_features")]
        keep_meta: Option<PathBuf>,
    },
    /// Per-hour DBSCAN on features. Columns `id,hour,flag` with flag majority or outlier.
    Outliers {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 10.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 100)]
        min_pts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write majority records to this pair.
        #[arg(long, requires = "keep_meta")]
        keep_features: Option<PathBuf>,
        #[arg(long, requires = "keep_features")]
        keep_meta: Option<PathBuf>,
    },
    /// Stratified train/test split by time class.
    Split {
        #[command(flatten)]
        data: DataArgs,
        /// TRAIN:TEST, e.g. 9:1.
        #[arg(long, default_value = "9:1")]
        ratio: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        train_features: PathBuf,
        #[arg(long)]
        train_meta: PathBuf,
        #[arg(long)]
        test_features: PathBuf,
        #[arg(long)]
        test_meta: PathBuf,
    },
    /// Brightness statistics per local hour. Columns `hour,count,mean,std`
    /// (population std; empty when the hour has no brightness values).
    BrightnessByHour {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rewrite UTC times as local times shifted by round(lon / 15) hours.
    UtcApprox {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out_features: PathBuf,
        #[arg(long)]
        out_meta: PathBuf,
    },
}

#[derive(Args)]
struct GuidanceCmd {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Target class index.
    #[arg(long)]
    target: usize,
    /// Columns `id,loss`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AffinityCmd {
    #[arg(long)]
    model: PathBuf,
    /// Feature file whose rows are embeddings of the model's joint space.
    #[arg(long)]
    embeddings: PathBuf,
    /// Columns `row,p_0,...,p_{C-1}`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
