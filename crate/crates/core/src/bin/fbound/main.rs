//! `fbound`: early-exercise boundaries, prices and studies from the command line.
//!
//! Exit codes: 0 on success, 1 when a solver fails, 2 on usage or validation errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fbound::MarketParams;

#[derive(Parser, Debug)]
#[command(name = "fbound", version, about = "Early-exercise boundary and pricing solvers")]
pub struct Cli {
    /// Worker threads for parallel studies (overrides FBOUND_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Flat TOML file of `flag = value` entries; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Contract parameters. Each subcommand fills the unset ones from its own preset.
#[derive(Args, Debug, Clone, Default)]
pub struct MarketArgs {
    /// Strike E.
    #[arg(long = "E")]
    pub strike: Option<f64>,
    /// Expiry T (years).
    #[arg(long = "T")]
    pub expiry: Option<f64>,
    /// Risk-free rate r.
    #[arg(long = "r")]
    pub rate: Option<f64>,
    /// Dividend yield q.
    #[arg(long = "q")]
    pub dividend: Option<f64>,
    /// Base volatility.
    #[arg(long)]
    pub sigma: Option<f64>,
}

impl MarketArgs {
    pub fn resolve(&self, preset: MarketParams) -> MarketParams {
        MarketParams {
            rate: self.rate.unwrap_or(preset.rate),
            dividend: self.dividend.unwrap_or(preset.dividend),
            strike: self.strike.unwrap_or(preset.strike),
            expiry: self.expiry.unwrap_or(preset.expiry),
            sigma: self.sigma.unwrap_or(preset.sigma),
        }
    }
}

/// Nonlinear volatility model selection.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Model::Constant)]
    pub model: Model,
    /// Leland number.
    #[arg(long)]
    pub le: Option<f64>,
    /// Transaction cost C (RAPM).
    #[arg(long = "C")]
    pub cost: Option<f64>,
    /// Risk premium coefficient R (RAPM).
    #[arg(long = "R")]
    pub risk_premium: Option<f64>,
    /// RAPM μ directly, instead of C and R.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Barles-Soner a.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub sigma1: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Frey-Stremme feedback ρ.
    #[arg(long)]
    pub feedback: Option<f64>,
    /// Frey-Stremme liquidity factor λ.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Constant,
    Leland,
    Rapm,
    BarlesSoner,
    Avellaneda,
    FreyStremme,
}

#[derive(Args, Debug, Clone)]
pub struct PdeArgs {
    /// Spatial intervals.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Time steps.
    #[arg(long, default_value_t = 20_000)]
    pub m: usize,
    /// Domain length L.
    #[arg(long, default_value_t = 3.0)]
    pub length: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub micro_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub micro_max: usize,
    /// Plain substitution for the boundary micro-iteration instead of the secant update.
    #[arg(long)]
    pub plain: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceMethod {
    SemiExplicit,
    Pde,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Binomial,
    Psor,
    Baw,
    Bs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Call,
    Put,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    American,
    European,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    Integral,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepModel {
    Rapm,
    BarlesSoner,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Constant-volatility call boundary from the integral equation.
    SolveLinear {
        #[command(flatten)]
        market: MarketArgs,
        /// ξ intervals on [0, sqrt(T)].
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 20)]
        max_iters: usize,
        /// CSV `tau,rho`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// American call prices at expiry-distance T.
    Price {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, value_enum, default_value_t = PriceMethod::SemiExplicit)]
        method: PriceMethod,
        #[arg(long, value_delimiter = ',', default_values_t = [15.0, 18.0, 20.0, 21.0])]
        spots: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        #[command(flatten)]
        pde: PdeArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// CSV `S,price,region`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Call boundary from the operator-splitting scheme for any volatility model.
    SolvePde {
        #[command(flatten)]
        market: MarketArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        pde: PdeArgs,
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
        /// CSV `tau,rho`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV `tau,x,pi` for the stored levels.
        #[arg(long)]
        surface_out: Option<PathBuf>,
    },
    /// Floating-strike Asian call boundary.
    SolveAsian {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        m: usize,
        #[arg(long, default_value_t = 3.0)]
        length: f64,
        #[arg(long, default_value_t = 1e-7)]
        micro_tol: f64,
        /// CSV `tau,rho`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV `t,inv_xf`.
        #[arg(long)]
        inv_out: Option<PathBuf>,
    },
    /// Γ-equation for the risk-adjusted model from a Gaussian bump.
    GammaSolve {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long = "C", default_value_t = 0.01)]
        cost: f64,
        #[arg(long = "R", default_value_t = 5.0)]
        risk_premium: f64,
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        m: usize,
        #[arg(long, default_value_t = 0.005)]
        tau_star: f64,
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
        /// CSV `tau,x,gamma`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// European call bid, mid and ask under the risk-adjusted model.
    RapmPrice {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long = "C", default_value_t = 0.01)]
        cost: f64,
        #[arg(long = "R", default_value_t = 5.0)]
        risk_premium: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [25.0])]
        spots: Vec<f64>,
        /// Calendar time t in [0, T).
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 800)]
        n: usize,
        #[arg(long, default_value_t = 400)]
        m: usize,
        /// CSV `S,bid,mid,ask`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits (σ, R) to bid/ask quotes row by row.
    RapmCalibrate {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long = "C", default_value_t = 0.01)]
        cost: f64,
        /// CSV `timestamp,S,E,T,V_bid,V_ask` (T is the time to expiry).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 800)]
        n: usize,
        #[arg(long, default_value_t = 400)]
        m: usize,
        /// CSV `timestamp,sigma_rapm,R,resid`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference pricers.
    Oracle {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, value_enum, default_value_t = OracleMethod::Binomial)]
        method: OracleMethod,
        #[arg(long, value_enum, default_value_t = Kind::Call)]
        kind: Kind,
        #[arg(long, value_enum, default_value_t = Style::American)]
        style: Style,
        #[arg(long, value_delimiter = ',', default_values_t = [15.0, 18.0, 20.0, 21.0])]
        spots: Vec<f64>,
        /// Lattice depth.
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 800)]
        space_steps: usize,
        #[arg(long, default_value_t = 800)]
        time_steps: usize,
        /// CSV `S,price`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mesh-refinement study of the constant-volatility PDE boundary.
    Eoc {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long = "ref", value_enum, default_value_t = Reference::Integral)]
        reference: Reference,
        #[arg(long, value_delimiter = ',', default_values_t = [0.03, 0.012, 0.006])]
        meshes: Vec<f64>,
        /// Nodes of the integral-equation reference.
        #[arg(long, default_value_t = 100)]
        ref_nodes: usize,
        /// CSV `h,err_linf,eoc_linf,err_l2,eoc_l2`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance of nonlinear boundaries from the constant-volatility one over a parameter grid.
    Sweep {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, value_enum)]
        model: SweepModel,
        /// R values (rapm) or a values (barles-soner).
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long = "C", default_value_t = 0.01)]
        cost: f64,
        #[command(flatten)]
        pde: PdeArgs,
        /// Fit the exponent only over values up to this bound.
        #[arg(long)]
        fit_max: Option<f64>,
        /// CSV `param,dist_linf,rho_T`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for one `tau,rho` file per run.
        #[arg(long)]
        boundaries_dir: Option<PathBuf>,
    },
    /// Near-expiry put boundary against the lattice.
    PutAsymptotic {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.001])]
        taus: Vec<f64>,
        /// Lattice depth; 0 skips the lattice column.
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        /// CSV `tau,rho_asym,rho_binomial`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(fbound::Error),
    Io(String),
}

impl From<fbound::Error> for CliError {
    fn from(e: fbound::Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(e) => match e.root() {
                fbound::Error::InvalidParams(_) => 2,
                _ => 1,
            },
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Solver(e) => write!(f, "{e}"),
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("FBOUND_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("FBOUND_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let argv = config::expand(argv).map_err(CliError::Usage)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string().trim_end().to_string())),
    };
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            return Err(CliError::Usage("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    commands::dispatch(cli.command)
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fbound: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
