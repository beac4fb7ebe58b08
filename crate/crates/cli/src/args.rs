use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mekrr_core::{DescriptorParams, NormalizationMode, SpeciesNorm, TransformKind};

#[derive(Debug, Parser)]
#[command(
    name = "mekrr",
    version,
    about = "Mean-embedding kernel ridge regression for atomistic energies"
)]
pub struct Cli {
    /// JSON object of flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for data splits and median-heuristic subsampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute built-in descriptors for an extxyz file and write a FEAT1 bundle.
    Featurize(FeaturizeArgs),
    /// Fit a model and write a model bundle.
    Fit(FitArgs),
    /// Predict energies with a model bundle (CSV: frame,energy).
    Predict(PredictArgs),
    /// Select λ then α on a validation split and emit the curves as CSV.
    Cv(CvArgs),
    /// Score a species-baseline model zero-shot on a target dataset (JSON report).
    TransferEval(TransferArgs),
    /// Two-class spectral clustering of frames (CSV: frame,label).
    Cluster(ClusterArgs),
    /// Print bundle metadata.
    Inspect(InspectArgs),
}

pub const SUBCOMMANDS: [&str; 7] = [
    "featurize",
    "fit",
    "predict",
    "cv",
    "transfer-eval",
    "cluster",
    "inspect",
];

/// Inputs: extxyz configurations, FEAT1 features, or both.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Extended XYZ file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// FEAT1 bundle directory; attached to `--data` when both are given.
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DescriptorArgs {
    /// Radial cutoff in Å.
    #[arg(long, default_value_t = 6.0)]
    pub cutoff: f64,
    /// Number of radial centers.
    #[arg(long, default_value_t = 16)]
    pub centers: usize,
    /// Position of the first center in Å.
    #[arg(long, default_value_t = 0.5)]
    pub first_center: f64,
    /// Gaussian width of each radial function in Å.
    #[arg(long, default_value_t = 0.35)]
    pub width: f64,
    /// Species order, e.g. `Fe,N`; defaults to sorted symbols.
    #[arg(long, value_delimiter = ',')]
    pub species: Option<Vec<String>>,
}

impl DescriptorArgs {
    pub fn params(&self) -> DescriptorParams {
        DescriptorParams::uniform(self.cutoff, self.first_center, self.centers, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelChoice {
    Gaussian,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    Extensive,
    Intensive,
}

impl From<ModeChoice> for NormalizationMode {
    fn from(m: ModeChoice) -> Self {
        match m {
            ModeChoice::Extensive => NormalizationMode::Extensive,
            ModeChoice::Intensive => NormalizationMode::Intensive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpeciesNormChoice {
    Subset,
    Global,
}

impl From<SpeciesNormChoice> for SpeciesNorm {
    fn from(m: SpeciesNormChoice) -> Self {
        match m {
            SpeciesNormChoice::Subset => SpeciesNorm::Subset,
            SpeciesNormChoice::Global => SpeciesNorm::Global,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformChoice {
    Identity,
    Standardize,
    SpeciesBaseline,
}

impl From<TransformChoice> for TransformKind {
    fn from(t: TransformChoice) -> Self {
        match t {
            TransformChoice::Identity => TransformKind::Identity,
            TransformChoice::Standardize => TransformKind::Standardize,
            TransformChoice::SpeciesBaseline => TransformKind::SpeciesBaseline,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = KernelChoice::Gaussian)]
    pub kernel: KernelChoice,
    /// Gaussian length scale; the median heuristic is used when absent.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Rows drawn for the median heuristic.
    #[arg(long, default_value_t = mekrr_core::DEFAULT_MEDIAN_SAMPLES)]
    pub median_samples: usize,
    #[arg(long, value_enum, default_value_t = ModeChoice::Extensive)]
    pub normalization: ModeChoice,
    #[arg(long, value_enum, default_value_t = SpeciesNormChoice::Subset)]
    pub species_norm: SpeciesNormChoice,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long, required = true)]
    pub data: PathBuf,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    /// Output FEAT1 directory.
    #[arg(long, required = true)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Weight of the per-species kernels, in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = TransformChoice::Standardize)]
    pub transform: TransformChoice,
    /// Permit `--lambda 0`.
    #[arg(long)]
    pub allow_unregularized: bool,
    /// Output model bundle directory.
    #[arg(long, required = true)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, required = true)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: DataArgs,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_enum, default_value_t = TransformChoice::Standardize)]
    pub transform: TransformChoice,
    /// Train/validation/test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.6, 0.2, 0.2])]
    pub split: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = mekrr_core::DEFAULT_LAMBDA_GRID)]
    pub lambda_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = mekrr_core::DEFAULT_ALPHA_GRID)]
    pub alpha_grid: Vec<f64>,
    #[arg(long)]
    pub allow_unregularized: bool,
    /// Curve CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the selection and the test-split report as JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Save the model refit on the training split at the selected point.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Model bundle fit on the source dataset with the species-baseline transform.
    #[arg(long, required = true)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: DataArgs,
    /// JSON destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Take the kernel and descriptor from a model bundle instead.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Labels CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the normalized kernel heatmap here.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    /// Write the heatmap as a grayscale PNG instead of CSV.
    #[arg(long, requires = "heatmap")]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long, required = true)]
    pub model: PathBuf,
}
