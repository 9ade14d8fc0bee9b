use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use locmin::{FunctionSpec, Interval};

#[derive(Debug, Parser)]
#[command(
    name = "locmin",
    version,
    about = "Stochastic one-dimensional convex optimization experiments"
)]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment from a TOML config or a previous manifest.json.
    Run {
        config: PathBuf,
        /// Output directory (default: [run] output_dir, then $LOCMIN_OUT_DIR, then ./locmin-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the modulus of continuity over an epsilon grid as CSV.
    Modulus(ModulusArgs),
    /// Run the six rate panels (three symmetric, three asymmetric powers).
    #[command(name = "reproduce-fig2")]
    ReproduceFig2 {
        #[arg(long, default_value_t = 1000)]
        replicates: u64,
        /// Output directory (default: $LOCMIN_OUT_DIR, then ./fig2).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Risk of an estimator at a function and at its two tilted alternatives.
    Superefficiency(SuperefficiencyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FnKind {
    SymPower,
    AsymPower,
    Absolute,
    PiecewiseLinear,
}

#[derive(Debug, Clone, Args)]
pub struct FnArgs {
    #[arg(long = "fn", value_enum)]
    pub kind: FnKind,
    /// Exponent of sym-power.
    #[arg(long)]
    pub k: Option<f64>,
    /// Left exponent of asym-power.
    #[arg(long)]
    pub kl: Option<f64>,
    /// Right exponent of asym-power.
    #[arg(long)]
    pub kr: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x_star: f64,
    /// Add `eps * x` to the function.
    #[arg(long, allow_hyphen_values = true)]
    pub tilt: Option<f64>,
    /// Comma-separated breakpoints of piecewise-linear.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub breakpoints: Vec<f64>,
    /// Comma-separated slopes of piecewise-linear (one more than breakpoints).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub slopes: Vec<f64>,
    /// Domain as lo:hi.
    #[arg(long, default_value = "-2:2", allow_hyphen_values = true)]
    pub domain: String,
}

impl FnArgs {
    pub fn spec(&self) -> anyhow::Result<FunctionSpec> {
        let need = |v: Option<f64>, flag: &str| v.with_context(|| format!("--fn needs {flag}"));
        let base = match self.kind {
            FnKind::SymPower => FunctionSpec::SymmetricPower {
                k: need(self.k, "--k")?,
                x_star: self.x_star,
            },
            FnKind::AsymPower => FunctionSpec::AsymmetricPower {
                k_l: need(self.kl, "--kl")?,
                k_r: need(self.kr, "--kr")?,
                x_star: self.x_star,
            },
            FnKind::Absolute => FunctionSpec::Absolute {
                x_star: self.x_star,
            },
            FnKind::PiecewiseLinear => FunctionSpec::PiecewiseLinear {
                breakpoints: self.breakpoints.clone(),
                slopes: self.slopes.clone(),
            },
        };
        let spec = match self.tilt {
            Some(eps) => base.tilt(eps),
            None => base,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn domain(&self) -> anyhow::Result<Interval> {
        let (lo, hi) = self
            .domain
            .split_once(':')
            .context("--domain expects lo:hi")?;
        let lo: f64 = lo.trim().parse().context("--domain lower end")?;
        let hi: f64 = hi.trim().parse().context("--domain upper end")?;
        if !(lo < hi) {
            bail!("--domain needs lo < hi, got {lo}:{hi}");
        }
        Ok(Interval::new(lo, hi)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModulusArgs {
    #[command(flatten)]
    pub function: FnArgs,
    /// Log-spaced epsilon grid as lo:hi:n.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: String,
    /// Bisection tolerance.
    #[arg(long, default_value_t = locmin::modulus::DEFAULT_TOL)]
    pub tol: f64,
}

/// Parse `lo:hi:n` with `0 < lo <= hi` and `n >= 1`.
pub fn parse_eps_range(s: &str) -> anyhow::Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        bail!("--eps expects lo:hi:n, got {s:?}");
    };
    let lo: f64 = lo.trim().parse().context("--eps lower end")?;
    let hi: f64 = hi.trim().parse().context("--eps upper end")?;
    let n: usize = n.trim().parse().context("--eps point count")?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        bail!("--eps needs 0 < lo <= hi and n >= 1, got {s:?}");
    }
    Ok((lo, hi, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    /// Always report the minimizer of the target function.
    Constant,
    BinarySearch,
    SgdInverseT,
    SgdInverseSqrtT,
}

#[derive(Debug, Clone, Args)]
pub struct SuperefficiencyArgs {
    #[command(flatten)]
    pub function: FnArgs,
    #[arg(long)]
    pub delta: f64,
    #[arg(long = "T", default_value_t = 10_000)]
    pub t: u64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1000)]
    pub replicates: u64,
    #[arg(long, value_enum, default_value_t = EstimatorKind::Constant)]
    pub estimator: EstimatorKind,
    /// Binary-search rate; defaults to one round per doubling of T.
    #[arg(long)]
    pub r: Option<f64>,
    /// Value reported by the constant estimator (default: the minimizer).
    #[arg(long, allow_hyphen_values = true)]
    pub value: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory for superefficiency.csv and manifest.json (default: $LOCMIN_OUT_DIR; stdout only when unset).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
