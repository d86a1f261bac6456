use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "decme",
    version,
    about = "Benchmarks for EM accelerators (SOR, SORF, DECME)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate datasets (or surrogate problems) from a simulation design
    Simulate(SimulateArgs),
    /// Compute the maximal log-likelihood with a stringent EM run
    Lmax(FitArgs),
    /// Run several accelerators from a common start and compare them
    Race(RaceArgs),
    /// Estimate the EM rate matrix at the MLE and report its eigenpairs
    Spectral(SpectralArgs),
    /// Run the randomized convergence checks on quadratic surrogates
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelArg {
    Gmm,
    Mvt,
    Surrogate,
}

impl ModelArg {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelArg::Gmm => "gmm",
            ModelArg::Mvt => "mvt",
            ModelArg::Surrogate => "surrogate",
        }
    }
}

impl std::str::FromStr for ModelArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <ModelArg as ValueEnum>::from_str(s, true)
    }
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// key=value file; command-line flags take precedence over it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master random seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

/// Model and data selection.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelSel {
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Dataset CSV (gmm, mvt) or surrogate text file
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Mixture components
    #[arg(long)]
    pub k: Option<usize>,
    /// Mean separation of the two-component design; selects its starting point
    #[arg(long)]
    pub sep: Option<f64>,
    /// Comma-separated starting point, overriding the model default
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
    /// Comma-separated coordinates maximized exactly by a surrogate's ML-step
    #[arg(long)]
    pub ml_block: Option<String>,
    /// Iteration cap for every run
    #[arg(long)]
    pub safety_cap: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub sep: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Observations per dataset
    #[arg(long)]
    pub n: Option<usize>,
    /// Degrees of freedom of the simulated t data
    #[arg(long)]
    pub nu: Option<f64>,
    /// Surrogate dimension
    #[arg(long)]
    pub p: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelSel,
}

#[derive(Args, Debug)]
pub struct RaceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelSel,
    /// target:EPS (stop at l_max - EPS), l1:EPS or iter:N
    #[arg(long)]
    pub stop: Option<String>,
    /// Known l_max for target stopping; computed by a pre-run when absent
    #[arg(long, allow_hyphen_values = true)]
    pub lmax: Option<f64>,
    /// Line-search tolerance
    #[arg(long)]
    pub ls_tol: Option<f64>,
    /// Comma-separated variants (em, sor, sorf, decme_v1, decme_v2,
    /// decme_v3, ecme, ecme_decme_v1)
    #[arg(long)]
    pub variants: Option<String>,
    /// Fixed relaxation factor for SORF
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Timed runs per variant; the summary reports min and median
    #[arg(long)]
    pub repeat: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SpectralArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelSel,
    /// Comma-separated fitted parameter; a stringent EM run is used when absent
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Relative finite-difference step
    #[arg(long)]
    pub hstep: Option<f64>,
    /// Probe the ECME map instead of EM (needs an ML-step)
    #[arg(long)]
    pub ecme: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trials per check (per dimension for DECME_v1)
    #[arg(long)]
    pub trials: Option<usize>,
    /// Restrict to one dimension; 2 runs only the two-dimensional SOR checks
    #[arg(long)]
    pub p: Option<usize>,
}
