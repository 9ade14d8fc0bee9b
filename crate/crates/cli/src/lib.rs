//! Library side of the `locmin` binary: config files, artifacts and the
//! subcommand implementations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod artifacts;
pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use locmin::algorithms::{AlgorithmSpec, StepSchedule};
use locmin::experiments::{
    benchmark_panels, benchmark_rate, slopes_to_csv, superefficiency_delta_limit,
    superefficiency_experiment, ExperimentConfig, SuperefficiencyParams,
};
use locmin::modulus::{modulus_analytic, ModulusCurve};
use locmin::stats::log_grid;
use locmin::{ConvexFunction1D, FunctionSpec, Interval};
use serde::Serialize;

use crate::args::{parse_eps_range, Cli, Command, EstimatorKind, ModulusArgs, SuperefficiencyArgs};
use crate::artifacts::{run_to_dir, sha256_hex, write_file, Manifest};
use crate::config::ConfigFile;

pub const OUT_DIR_ENV: &str = "LOCMIN_OUT_DIR";

/// Failure split by exit status: 2 for usage and config errors, 1 for
/// runtime and data errors.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

fn usage<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn runtime<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

fn resolve_out(flag: Option<PathBuf>, configured: Option<PathBuf>, default: &str) -> PathBuf {
    flag.or(configured)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(default))
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Usage(anyhow::anyhow!("--jobs must be at least 1")));
        }
        // Fails only if the pool was already initialized, in which case the
        // existing pool is used.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Modulus(a) => cmd_modulus(&a),
        Command::ReproduceFig2 {
            replicates,
            out,
            seed,
        } => cmd_reproduce_fig2(replicates, out, seed),
        Command::Superefficiency(a) => cmd_superefficiency(&a),
    }
}

/// Load a TOML config or a manifest written by a previous run.
pub fn load_experiment(path: &Path) -> Result<(ExperimentConfig, Option<PathBuf>), Failure> {
    let text =
        usage(fs::read_to_string(path).with_context(|| format!("reading {}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: Manifest = usage(
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())),
        )?;
        if manifest.command != "run" {
            return Err(Failure::Usage(anyhow::anyhow!(
                "{} records a `{}` command, not a run",
                path.display(),
                manifest.command
            )));
        }
        let cfg = usage(manifest.experiment())?;
        usage(cfg.validate().map_err(anyhow::Error::from))?;
        return Ok((cfg, None));
    }
    let file = usage(ConfigFile::parse(&text).with_context(|| format!("in {}", path.display())))?;
    let cfg = usage(
        file.to_experiment()
            .with_context(|| format!("in {}", path.display())),
    )?;
    Ok((cfg, file.run.output_dir))
}

fn cmd_run(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let (cfg, configured) = load_experiment(path)?;
    let dir = resolve_out(out, configured, "locmin-out");
    let res = runtime(run_to_dir(&cfg, &dir))?;
    print!(
        "{}",
        runtime(slopes_to_csv(&res.slopes).map_err(Into::into))?
    );
    if !res.manifest.complete {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{} cells failed (see {}); partial results written",
            res.manifest.missing_cells.len(),
            dir.join("manifest.json").display()
        )));
    }
    Ok(())
}

fn build_function(a: &args::FnArgs) -> Result<ConvexFunction1D, Failure> {
    let spec = usage(a.spec())?;
    let domain = usage(a.domain())?;
    usage(ConvexFunction1D::new(spec, domain).map_err(Into::into))
}

/// CSV with columns `epsilon,omega,omega_analytic,method,alpha_hat`. `omega`
/// is the numeric value; `omega_analytic` is empty where no closed form
/// exists; `alpha_hat` repeats the growth exponent fitted to the whole curve.
pub fn modulus_csv(a: &ModulusArgs) -> Result<String, Failure> {
    let f = build_function(&a.function)?;
    let (lo, hi, n) = usage(parse_eps_range(&a.eps))?;
    if !(a.tol > 0.0) {
        return Err(Failure::Usage(anyhow::anyhow!("--tol must be positive")));
    }
    let grid = usage(log_grid(lo, hi, n).map_err(Into::into))?;
    let curve = runtime(ModulusCurve::numeric(&f, &grid, a.tol).map_err(anyhow::Error::from))?;
    let alpha = curve.clone().fit().ok().and_then(|c| c.fitted_alpha);
    let mut out = String::from("epsilon,omega,omega_analytic,method,alpha_hat\n");
    for s in &curve.samples {
        let analytic = modulus_analytic(&f, s.epsilon)
            .map(|v| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.epsilon,
            s.omega,
            analytic,
            s.method.as_str(),
            alpha.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    Ok(out)
}

fn cmd_modulus(a: &ModulusArgs) -> Result<(), Failure> {
    let text = modulus_csv(a)?;
    let mut stdout = std::io::stdout().lock();
    runtime(stdout.write_all(text.as_bytes()).map_err(Into::into))
}

fn cmd_reproduce_fig2(replicates: u64, out: Option<PathBuf>, seed: u64) -> Result<(), Failure> {
    if replicates == 0 {
        return Err(Failure::Usage(anyhow::anyhow!(
            "--replicates must be at least 1"
        )));
    }
    let dir = resolve_out(out, None, "fig2");
    runtime(fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())))?;
    let mut summary = String::from("panel,");
    summary.push_str(&locmin::experiments::SLOPES_CSV_HEADER.join(","));
    summary.push('\n');
    #[derive(Serialize)]
    struct Fig2Config {
        replicates: u64,
        seed: u64,
    }
    let mut top = runtime(Manifest::new(
        "reproduce-fig2",
        seed,
        &Fig2Config { replicates, seed },
    ))?;
    for panel in benchmark_panels(replicates, seed) {
        let sub = dir.join(&panel.name);
        let res = runtime(run_to_dir(&panel.config, &sub))?;
        let csv = runtime(slopes_to_csv(&res.slopes).map_err(Into::into))?;
        for line in csv.lines().skip(1) {
            let _ = writeln!(summary, "{},{line}", panel.name);
        }
        let manifest_text = runtime(
            fs::read_to_string(sub.join("manifest.json")).context("reading panel manifest"),
        )?;
        top.files.insert(
            format!("{}/manifest.json", panel.name),
            sha256_hex(manifest_text.as_bytes()),
        );
        top.complete &= res.manifest.complete;
    }
    runtime(write_file(&dir, "slopes.csv", &summary))?;
    top.files
        .insert("slopes.csv".into(), sha256_hex(summary.as_bytes()));
    runtime(top.write(&dir))?;
    print!("{summary}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct SuperefficiencyConfig {
    function: FunctionSpec,
    domain: Interval,
    estimator: AlgorithmSpec,
    delta: f64,
    #[serde(rename = "T")]
    t: u64,
    sigma: f64,
    replicates: u64,
    seed: u64,
    initial_interval: Interval,
}

fn cmd_superefficiency(a: &SuperefficiencyArgs) -> Result<(), Failure> {
    if !(a.delta > 0.0 && a.delta < superefficiency_delta_limit()) {
        return Err(Failure::Usage(anyhow::anyhow!(
            "--delta must lie in (0, {:.6}), got {}",
            superefficiency_delta_limit(),
            a.delta
        )));
    }
    if a.t == 0 || a.replicates == 0 {
        return Err(Failure::Usage(anyhow::anyhow!(
            "--T and --replicates must be at least 1"
        )));
    }
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(Failure::Usage(anyhow::anyhow!("--sigma must be >= 0")));
    }
    let f = build_function(&a.function)?;
    let estimator = match a.estimator {
        EstimatorKind::Constant => AlgorithmSpec::Constant {
            value: a.value.unwrap_or_else(|| f.minimizer_set().midpoint()),
        },
        EstimatorKind::BinarySearch => {
            AlgorithmSpec::binary_search(a.r.unwrap_or_else(benchmark_rate))
        }
        EstimatorKind::SgdInverseT => AlgorithmSpec::sgd(StepSchedule::InverseT),
        EstimatorKind::SgdInverseSqrtT => AlgorithmSpec::sgd(StepSchedule::InverseSqrtT),
    };
    usage(estimator.validate().map_err(Into::into))?;
    let params = SuperefficiencyParams {
        delta: a.delta,
        t: a.t,
        sigma: a.sigma,
        replicates: a.replicates,
        seed: a.seed,
        initial_interval: f.domain(),
    };
    let rep = runtime(superefficiency_experiment(&f, &estimator, &params).map_err(Into::into))?;
    let csv = runtime(rep.to_csv().map_err(Into::into))?;
    let out = a
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from));
    if let Some(dir) = out {
        runtime(fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())))?;
        runtime(write_file(&dir, "superefficiency.csv", &csv))?;
        let config = SuperefficiencyConfig {
            function: f.spec().clone(),
            domain: f.domain(),
            estimator: estimator.clone(),
            delta: a.delta,
            t: a.t,
            sigma: a.sigma,
            replicates: a.replicates,
            seed: a.seed,
            initial_interval: params.initial_interval,
        };
        let mut m = runtime(Manifest::new("superefficiency", a.seed, &config))?;
        m.files
            .insert("superefficiency.csv".into(), sha256_hex(csv.as_bytes()));
        m.results = Some(serde_json::json!({
            "epsilon_T": rep.epsilon_t,
            "risk_f": { "mean": rep.risk_f.mean, "stderr": rep.risk_f.stderr, "rms": rep.risk_f.rms },
            "risk_g_plus": { "mean": rep.risk_g_plus.mean, "stderr": rep.risk_g_plus.stderr },
            "risk_g_minus": { "mean": rep.risk_g_minus.mean, "stderr": rep.risk_g_minus.stderr },
            "d_f_g_plus": rep.d_f_g_plus,
            "d_f_g_minus": rep.d_f_g_minus,
            "omega_g_plus": rep.omega_g_plus,
            "omega_g_minus": rep.omega_g_minus,
            "omega_f_benchmark": rep.omega_f_benchmark,
            "H_epsilon_T": rep.h_epsilon,
            "proposition_reference": rep.proposition_reference,
            "superefficient_at_f": rep.superefficient_at_f,
        }));
        runtime(m.write(&dir))?;
    }
    print!("{csv}");
    eprintln!(
        "epsilon_T = {}, max alternative risk = {}, (4 - sqrt 2)/4 * H(epsilon_T) = {}",
        rep.epsilon_t,
        rep.max_alternative_risk(),
        rep.proposition_reference
    );
    Ok(())
}
