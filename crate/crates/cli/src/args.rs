use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "alphareg", version, about = "α-k-NN and α-kernel regression for compositional responses")]
pub struct Cli {
    /// Worker threads; defaults to the available CPUs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-validated grid search over (alpha, k) or (alpha, h).
    Tune(TuneArgs),
    /// Fit a model and write its description as JSON.
    Fit(FitArgs),
    /// Fit a model and write predictions as CSV.
    Predict(PredictArgs),
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Fréchet mean of a set of compositions over a grid of alpha values.
    FrechetPath(PathArgs),
    /// Time alpha-k-NN, KLD and OLS across sample sizes and dimensions.
    Bench(BenchArgs),
    /// Check a dataset and report its zero pattern.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Aknn,
    Akernel,
    Kld,
    Ols,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Exponential,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Kl,
    Js,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LinkArg {
    Polynomial,
    Segmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogRatioArg {
    Alr,
    Ilr,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Delimited input file with a header row.
    #[arg(long)]
    pub input: PathBuf,

    /// Comma-separated response column names.
    #[arg(long = "response-cols", value_delimiter = ',', required = true)]
    pub response_cols: Vec<String>,

    /// Comma-separated predictor column names.
    #[arg(long = "predictor-cols", value_delimiter = ',')]
    pub predictor_cols: Vec<String>,

    /// Latitude and longitude columns (degrees), converted to 3-D unit vectors.
    #[arg(long = "geo-cols", value_delimiter = ',')]
    pub geo_cols: Vec<String>,

    /// Scale predictors to zero mean and unit sample variance.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, value_enum)]
    pub model: ModelKind,

    /// Comma list or `start:stop:step`.
    #[arg(long = "alpha-grid", allow_hyphen_values = true)]
    pub alpha_grid: Option<String>,

    #[arg(long = "k-grid")]
    pub k_grid: Option<String>,

    #[arg(long = "h-grid")]
    pub h_grid: Option<String>,

    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,

    #[arg(long, default_value_t = 10)]
    pub folds: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, value_enum, default_value = "kl")]
    pub metric: MetricArg,

    /// Floor applied to predictions inside KL; 0 disables it.
    #[arg(long, default_value_t = 1e-12)]
    pub clamp: f64,

    /// Report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,

    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,

    #[arg(long)]
    pub k: Option<usize>,

    #[arg(long)]
    pub h: Option<f64>,

    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,

    /// Log-ratio space for `--model ols`.
    #[arg(long = "log-ratio", value_enum, default_value = "alr")]
    pub log_ratio: LogRatioArg,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Query file with the predictor columns; the training input when
    /// omitted. If it also holds the response columns, per-row KL and JS
    /// columns are added.
    #[arg(long)]
    pub queries: Option<PathBuf>,

    #[arg(long, default_value_t = 1e-12)]
    pub clamp: f64,

    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    pub n: usize,

    #[arg(long = "D", default_value_t = 5)]
    pub d: usize,

    #[arg(long, default_value_t = 1)]
    pub predictors: usize,

    #[arg(long, value_enum, default_value = "polynomial")]
    pub link: LinkArg,

    #[arg(long, default_value_t = 1)]
    pub degree: u32,

    #[arg(long = "zero-fraction", default_value_t = 0.0)]
    pub zero_fraction: f64,

    /// Standard deviation of the link noise.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Dataset CSV; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Generating coefficients as JSON; defaults to `<output>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long = "response-cols", value_delimiter = ',', required = true)]
    pub response_cols: Vec<String>,

    #[arg(long = "alpha-grid", default_value = "-1:1:0.1", allow_hyphen_values = true)]
    pub alpha_grid: String,

    /// 0-based data rows forming the set; all rows when omitted.
    #[arg(long, value_delimiter = ',')]
    pub rows: Vec<usize>,

    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100000,200000,400000,800000")]
    pub n: Vec<usize>,

    #[arg(long = "D", value_delimiter = ',', default_value = "3,5,7,10")]
    pub d: Vec<usize>,

    #[arg(long, default_value_t = 1)]
    pub predictors: usize,

    #[arg(long = "query-rows", default_value_t = 1000)]
    pub query_rows: usize,

    #[arg(long, default_value_t = 3)]
    pub repeats: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long = "response-cols", value_delimiter = ',', required = true)]
    pub response_cols: Vec<String>,

    #[arg(long = "predictor-cols", value_delimiter = ',')]
    pub predictor_cols: Vec<String>,
}
