//! `lul`: trade-off frontiers, simulations and verification suites for local
//! update methods on quadratic models.
//!
//! Exit codes: 0 success, 2 flag or parse error, 3 precondition error,
//! 4 verification failure.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lul_core::OptimizerKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lul_core::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use lul_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Read { .. } => 2,
            CliError::Core(E::Parse { .. } | E::InvalidInput(_) | E::DimensionMismatch { .. }) => 2,
            CliError::Core(_) | CliError::Write { .. } => 3,
            CliError::Verification(_) => 4,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "lul",
    version,
    about = "Convergence/accuracy trade-offs of local update methods (FedAvg, Reptile, MAML and proximal variants) on quadratic models",
    after_help = "Symbols: --alpha is the proximal strength, --gamma the client learning rate, --theta the \
                  local step weighting (one = single step, first-k = average over the first K steps, \
                  k-only = K-th step only, maml2k1 = the K-step MAML equivalent) and --k the number of local steps."
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, env = "LUL_SEED", default_value_t = 0, global = true)]
    seed: u64,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form or spectral (rho, Delta) frontier over K, gamma or alpha.
    Frontier(FrontierArgs),
    /// K-only frontier on random matrices with spectrum spanning [mu, L].
    MamlSim(MamlSimArgs),
    /// Run the local update procedure and report the trajectory.
    Simulate(SimulateArgs),
    /// Randomized checks of the identities and bounds; exit 4 on failure.
    Verify(VerifyArgs),
    /// Mean-absolute-deviation bound sweep (scalar and matrix-weighted).
    MadCheck(MadCheckArgs),
    /// Tightness constructions for the distance and condition number bounds.
    Tightness(TightnessArgs),
}

/// Client learning rate: a number, `half-inv` for 1/(2(L + alpha)) or
/// `half-inv-k` for 1/(2(K L + alpha)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaArg {
    Value(f64),
    HalfInv,
    HalfInvK,
}

impl FromStr for GammaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "half-inv" => Ok(GammaArg::HalfInv),
            "half-inv-k" => Ok(GammaArg::HalfInvK),
            _ => match s.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(GammaArg::Value(v)),
                _ => Err(format!("expected a nonnegative number, `half-inv` or `half-inv-k`, got `{s}`")),
            },
        }
    }
}

impl GammaArg {
    pub fn resolve(self, ell: f64, alpha: f64, k: u64) -> f64 {
        match self {
            GammaArg::Value(v) => v,
            GammaArg::HalfInv => 0.5 / (ell + alpha),
            GammaArg::HalfInvK => 0.5 / (k as f64 * ell + alpha),
        }
    }

    pub fn rule(self) -> lul_core::frontier::GammaRule {
        use lul_core::frontier::GammaRule;
        match self {
            GammaArg::Value(v) => GammaRule::Fixed(v),
            GammaArg::HalfInv => GammaRule::InverseOf { scale: 0.5, k_scaled: false },
            GammaArg::HalfInvK => GammaRule::InverseOf { scale: 0.5, k_scaled: true },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThetaArg {
    One,
    FirstK,
    KOnly,
    Maml2k1,
}

impl ThetaArg {
    pub fn scheme(self, k: u64) -> lul_core::Result<lul_core::WeightScheme> {
        use lul_core::WeightScheme;
        match self {
            ThetaArg::One => Ok(WeightScheme::one()),
            ThetaArg::FirstK => WeightScheme::first_k(k),
            ThetaArg::KOnly => WeightScheme::k_only(k),
            ThetaArg::Maml2k1 => WeightScheme::maml(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptArg {
    Plain,
    Nesterov,
    #[value(name = "heavy_ball", alias = "heavy-ball")]
    HeavyBall,
}

impl From<OptArg> for OptimizerKind {
    fn from(o: OptArg) -> Self {
        match o {
            OptArg::Plain => OptimizerKind::Plain,
            OptArg::Nesterov => OptimizerKind::Nesterov,
            OptArg::HeavyBall => OptimizerKind::HeavyBall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Vary {
    #[value(name = "K", alias = "k")]
    K,
    Gamma,
    Alpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KappaSourceArg {
    ClosedForm,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TightnessFamily {
    /// Two scalar clients; distance approaches the 2C bound.
    B2,
    /// Single client diag(L, mu); condition number equals the closed form.
    B3,
}

#[derive(Args, Debug)]
pub struct FrontierArgs {
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 10.0)]
    pub ell: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Client learning rate when it is not the swept axis.
    #[arg(long, default_value = "half-inv")]
    pub gamma: GammaArg,
    /// `first-k` (FedAvg/Reptile family) or `k-only` (first-order MAML family).
    #[arg(long, value_enum, default_value_t = ThetaArg::FirstK)]
    pub theta: ThetaArg,
    #[arg(long, value_enum, default_value_t = Vary::K)]
    pub vary: Vary,
    /// Largest K of the logarithmic K grid.
    #[arg(long, default_value_t = 1_000_000)]
    pub k_max: u64,
    /// Approximate number of grid points.
    #[arg(long, default_value_t = 60)]
    pub points: usize,
    /// K when sweeping gamma or alpha.
    #[arg(long, default_value_t = 10)]
    pub k: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub gamma_min: f64,
    /// Defaults to 0.999/(L + alpha).
    #[arg(long)]
    pub gamma_max: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub alpha_max: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "plain")]
    pub optimizers: Vec<OptArg>,
    #[arg(long, value_enum, default_value_t = KappaSourceArg::ClosedForm)]
    pub kappa_source: KappaSourceArg,
    /// Population file for `--kappa-source exact`; diag(L, mu) when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MamlSimArgs {
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 10.0)]
    pub ell: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value = "0.001")]
    pub gamma: GammaArg,
    #[arg(long, default_value_t = 10_000)]
    pub k_max: u64,
    #[arg(long, default_value_t = 60)]
    pub points: usize,
    /// Number of independent matrix draws, seeds `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "plain")]
    pub optimizers: Vec<OptArg>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Population file; a random population is drawn when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Write the population used to this file.
    #[arg(long)]
    pub save_population: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = 4)]
    pub clients: usize,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 10.0)]
    pub ell: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_radius: f64,
    /// Back each random client with this many examples.
    #[arg(long)]
    pub examples_per_client: Option<usize>,
    #[arg(long)]
    pub uniform_weights: bool,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value = "half-inv")]
    pub gamma: GammaArg,
    #[arg(long, value_enum, default_value_t = ThetaArg::FirstK)]
    pub theta: ThetaArg,
    #[arg(long, default_value_t = 10)]
    pub k: u64,
    #[arg(long, value_enum, default_value_t = OptArg::Plain)]
    pub optimizer: OptArg,
    /// Server step; auto-tuned from the surrogate spectrum when absent.
    #[arg(long)]
    pub step: Option<f64>,
    /// Server momentum; auto-tuned when absent.
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Rounds; enough for a 1e-12 contraction at the predicted rate when absent.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Deterministic)]
    pub mode: ModeArg,
    /// Clients sampled per round in stochastic mode; all when absent.
    #[arg(long)]
    pub clients_per_round: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Comma-separated suite names; all suites when absent.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Check a given population instead of random instances.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value = "half-inv")]
    pub gamma: GammaArg,
    #[arg(long, value_enum, default_value_t = ThetaArg::FirstK)]
    pub theta: ThetaArg,
    #[arg(long, default_value_t = 10)]
    pub k: u64,
}

#[derive(Args, Debug)]
pub struct MadCheckArgs {
    /// Random discrete distributions.
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Random commuting matrix families.
    #[arg(long, default_value_t = 1_000)]
    pub matrix_trials: usize,
}

#[derive(Args, Debug)]
pub struct TightnessArgs {
    #[arg(long, value_enum)]
    pub family: TightnessFamily,
    /// One or more K values, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "200")]
    pub k: Vec<u64>,
    /// Weight of the first client (b2).
    #[arg(long, default_value_t = 0.999)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 10.0)]
    pub ell: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Client learning rate (b3).
    #[arg(long, default_value = "half-inv-k")]
    pub gamma: GammaArg,
    /// `first-k` or `k-only` (b3).
    #[arg(long, value_enum, default_value_t = ThetaArg::FirstK)]
    pub theta: ThetaArg,
}

/// Where and how a command writes its result.
pub struct Output {
    pub format: Format,
    pub path: Option<PathBuf>,
}

impl Output {
    pub fn emit(&self, text: &str) -> Result<(), CliError> {
        use std::io::Write as _;
        match &self.path {
            Some(path) => std::fs::write(path, text).map_err(|source| CliError::Write { path: path.clone(), source }),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Output { format: cli.format, path: cli.output };
    let result = match cli.command {
        Command::Frontier(a) => commands::frontier(&a, &out),
        Command::MamlSim(a) => commands::maml_sim(&a, cli.seed, &out),
        Command::Simulate(a) => commands::simulate(&a, cli.seed, &out),
        Command::Verify(a) => commands::verify(&a, cli.seed, &out),
        Command::MadCheck(a) => commands::mad_check(&a, cli.seed, &out),
        Command::Tightness(a) => commands::tightness(&a, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
