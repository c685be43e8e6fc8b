use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dplbfgs", version, about = "Distributed proximal L-BFGS over a simulated cluster")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a solver and write its CSV trace.
    Run(RunArgs),
    /// Compute a reference optimum with long proximal-gradient runs.
    Reference(ReferenceArgs),
    /// Write a seeded synthetic dataset in LIBSVM format.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    /// ℓ1-regularized logistic regression, split by features.
    PrimalL1Logistic,
    /// Dual of the ℓ2-regularized squared-hinge SVM, split by instances.
    DualSqhingeSvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    /// DPLBFGS; the globalization comes from `--variant`.
    Dplbfgs,
    DplbfgsLs,
    DplbfgsTr,
    SparsaDirect,
    Bda,
    BdaCatalyst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Ls,
    Tr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    News,
    Epsilon,
    Webspam,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemKind,
    /// LIBSVM file.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of simulated machines K.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Loss weight C.
    #[arg(long = "c-param", default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "dplbfgs-ls")]
    pub algorithm: Algorithm,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// L-BFGS memory m.
    #[arg(long, default_value_t = 10)]
    pub memory: usize,
    /// SpaRSA stops once a step is below ε₁ times the first one.
    #[arg(long, default_value_t = 1e-2)]
    pub eps1: f64,
    #[arg(long = "max-sparsa", default_value_t = 100)]
    pub max_sparsa: usize,
    #[arg(long = "max-iter", default_value_t = 1000)]
    pub max_iter: usize,
    /// Stop at this relative objective error; needs `--ref-obj`.
    #[arg(long)]
    pub target: Option<f64>,
    /// File written by `dplbfgs reference`, or a literal value.
    #[arg(long = "ref-obj")]
    pub ref_obj: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Catalyst proximal weight κ.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Catalyst settings tuned for a benchmark dataset.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Plain BDA steps before Catalyst starts.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Catalyst inner steps per outer iteration (default K).
    #[arg(long)]
    pub inner: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = dplbfgs::solver::REFERENCE_ITERATIONS)]
    pub iterations: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenerateKind {
    Logistic,
    Correlated,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "logistic")]
    pub kind: GenerateKind,
    #[arg(long)]
    pub instances: usize,
    #[arg(long)]
    pub features: usize,
    /// Nonzero probability per entry (logistic).
    #[arg(long, default_value_t = 0.1)]
    pub density: f64,
    /// Latent directions (correlated).
    #[arg(long, default_value_t = 3)]
    pub factors: usize,
    /// Weight of the shared directions (correlated).
    #[arg(long, default_value_t = 1.0)]
    pub strength: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
