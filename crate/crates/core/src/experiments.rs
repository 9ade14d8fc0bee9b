//! Monte-Carlo risk estimation, log-log rate fits, two-point floors and the
//! superefficiency experiment.
//!
//! Every run is seeded by a pure function of the master seed and its position
//! in the experiment, runs execute on the rayon pool, and results are reduced
//! in a fixed order. Output is therefore bitwise identical for any number of
//! worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::AlgorithmSpec;
use crate::convex_fn::{err, pair_distance_d, ConvexFunction1D, FunctionSpec, Interval};
use crate::error::{Error, Result};
use crate::modulus::{big_h, modulus_numeric, DEFAULT_TOL};
use crate::oracle::{derive_seed, OracleConfig, OracleSession};
use crate::stats::{ols, RunningMoments};

const XSTAR_TAG: u64 = 0x0058_5354_4152;
const ORACLE_TAG: u64 = 0x4f52_4143_4c45;

pub const RISK_CSV_HEADER: [&str; 6] = ["function", "algorithm", "T", "mean_err", "stderr", "n"];
pub const SLOPES_CSV_HEADER: [&str; 9] = [
    "function",
    "algorithm",
    "slope",
    "intercept",
    "stderr_slope",
    "T_min",
    "T_max",
    "n_points",
    "reference_slope",
];
pub const SUPEREFFICIENCY_CSV_HEADER: [&str; 7] = [
    "target",
    "epsilon_T",
    "risk_f",
    "risk_g_plus",
    "risk_g_minus",
    "d_fg",
    "omega_ref",
];

/// Seven log-spaced budgets from 100 to 10000.
pub fn default_t_grid() -> Vec<u64> {
    (0..7)
        .map(|i| (10f64.powf(2.0 + i as f64 / 3.0) + 1e-9).floor() as u64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: FunctionSpec,
    pub domain: Interval,
    /// When present, every run re-centres the function at a fresh
    /// `x* ~ Uniform(lo, hi)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star_uniform: Option<Interval>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub t_grid: Vec<u64>,
    pub replicates: u64,
    pub sigma: f64,
    pub master_seed: u64,
    pub initial_interval: Interval,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.function.validate()?;
        if !(self.domain.lo < self.domain.hi) {
            return cfg(format!("domain {} must have positive width", self.domain));
        }
        if !self.domain.contains_interval(&self.initial_interval)
            || !(self.initial_interval.lo < self.initial_interval.hi)
        {
            return cfg(format!(
                "initial interval {} must be a nondegenerate subinterval of the domain {}",
                self.initial_interval, self.domain
            ));
        }
        if let Some(u) = self.x_star_uniform {
            if !self.domain.contains_interval(&u) {
                return cfg(format!(
                    "x* distribution {u} leaves the domain {}",
                    self.domain
                ));
            }
            self.function.with_x_star(u.lo)?;
        }
        if self.algorithms.is_empty() {
            return cfg("at least one algorithm is required".into());
        }
        for a in &self.algorithms {
            a.validate()?;
        }
        if self.t_grid.is_empty() {
            return cfg("the T grid is empty".into());
        }
        if self.t_grid[0] == 0 {
            return cfg("budgets must be at least 1".into());
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return cfg(format!(
                "T grid must be strictly increasing, got {:?}",
                self.t_grid
            ));
        }
        if self.replicates == 0 {
            return cfg("replicates must be at least 1".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return cfg(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        Ok(())
    }

    pub fn function_id(&self) -> String {
        self.function.label()
    }

    /// The function used by replicate `rep` of the `ti`-th budget.
    fn instance(&self, ti: usize, rep: u64) -> Result<ConvexFunction1D> {
        let spec = match self.x_star_uniform {
            None => self.function.clone(),
            Some(u) => {
                let x = if u.lo < u.hi {
                    let seed = derive_seed(self.master_seed, &[XSTAR_TAG, ti as u64, rep]);
                    ChaCha8Rng::seed_from_u64(seed).random_range(u.lo..u.hi)
                } else {
                    u.lo
                };
                self.function.with_x_star(x)?
            }
        };
        ConvexFunction1D::new(spec, self.domain)
    }
}

/// Bisection rate of the benchmark panels: `E = floor(log2 T)` rounds.
pub fn benchmark_rate() -> f64 {
    1.0 / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub name: String,
    pub config: ExperimentConfig,
}

/// The six rate panels: symmetric powers `k = 1.5, 2, 3` and asymmetric
/// pairs `(1.5, 2), (1.5, 3), (2, 3)`, each with `sigma = 0.1`,
/// `x* ~ Uniform(-1, 1)`, domain and bracket `[-2, 2]`, the default budget
/// grid, binary search and both SGD schedules.
pub fn benchmark_panels(replicates: u64, master_seed: u64) -> Vec<Panel> {
    let sym = |k| FunctionSpec::SymmetricPower { k, x_star: 0.0 };
    let asym = |k_l, k_r| FunctionSpec::AsymmetricPower {
        k_l,
        k_r,
        x_star: 0.0,
    };
    let specs = [
        ("sym-k1.5", sym(1.5)),
        ("sym-k2", sym(2.0)),
        ("sym-k3", sym(3.0)),
        ("asym-k1.5-2", asym(1.5, 2.0)),
        ("asym-k1.5-3", asym(1.5, 3.0)),
        ("asym-k2-3", asym(2.0, 3.0)),
    ];
    let box2 = Interval { lo: -2.0, hi: 2.0 };
    specs
        .into_iter()
        .enumerate()
        .map(|(i, (name, function))| Panel {
            name: name.to_string(),
            config: ExperimentConfig {
                function,
                domain: box2,
                x_star_uniform: Some(Interval { lo: -1.0, hi: 1.0 }),
                algorithms: vec![
                    AlgorithmSpec::binary_search(benchmark_rate()),
                    AlgorithmSpec::sgd(crate::algorithms::StepSchedule::InverseT),
                    AlgorithmSpec::sgd(crate::algorithms::StepSchedule::InverseSqrtT),
                ],
                t_grid: default_t_grid(),
                replicates,
                sigma: 0.1,
                master_seed: derive_seed(master_seed, &[i as u64]),
                initial_interval: box2,
            },
        })
        .collect()
}

/// One run of `alg` against a fresh oracle session; returns the error of its
/// estimate.
pub fn run_once(
    f: &ConvexFunction1D,
    alg: &AlgorithmSpec,
    t: u64,
    sigma: f64,
    seed: u64,
    interval: Interval,
) -> Result<f64> {
    let mut oracle = OracleSession::new(OracleConfig::new(sigma, t, seed)?, f);
    let run = alg.run(&mut oracle, interval)?;
    Ok(err(run.estimate, f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub function: String,
    pub algorithm: String,
    pub t: u64,
    /// `None` when the cell failed, e.g. a schedule error at a small budget.
    pub mean_err: Option<f64>,
    pub stderr: Option<f64>,
    pub n: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskTable {
    pub rows: Vec<RiskRow>,
}

impl RiskTable {
    pub fn get(&self, function: &str, algorithm: &str, t: u64) -> Option<&RiskRow> {
        self.rows
            .iter()
            .find(|r| r.function == function && r.algorithm == algorithm && r.t == t)
    }

    pub fn missing(&self) -> impl Iterator<Item = &RiskRow> {
        self.rows.iter().filter(|r| r.mean_err.is_none())
    }

    /// CSV text with header `function,algorithm,T,mean_err,stderr,n`. Missing
    /// cells leave `mean_err` and `stderr` empty and report `n = 0`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
        w.write_record(RISK_CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.function.clone(),
                r.algorithm.clone(),
                r.t.to_string(),
                r.mean_err.map(|v| v.to_string()).unwrap_or_default(),
                r.stderr.map(|v| v.to_string()).unwrap_or_default(),
                r.n.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }

    /// Parse text produced by [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let data = |m: String| Error::Data(m);
        let header = rd.headers().map_err(|e| data(format!("csv: {e}")))?.clone();
        if header.iter().ne(RISK_CSV_HEADER) {
            return Err(data(format!("unexpected risk table header {header:?}")));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| data(format!("bad number {s:?}")))
            }
        };
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| data(format!("csv: {e}")))?;
            let mean_err = num(&rec[3])?;
            rows.push(RiskRow {
                function: rec[0].to_string(),
                algorithm: rec[1].to_string(),
                t: rec[2]
                    .parse()
                    .map_err(|_| data(format!("bad budget {:?}", &rec[2])))?,
                mean_err,
                stderr: num(&rec[4])?,
                n: rec[5]
                    .parse()
                    .map_err(|_| data(format!("bad count {:?}", &rec[5])))?,
                error: mean_err.is_none().then(|| "missing".to_string()),
            });
        }
        Ok(RiskTable { rows })
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Data(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// [`estimate_risk_with_jobs`] on the global rayon pool.
pub fn estimate_risk(config: &ExperimentConfig) -> Result<RiskTable> {
    config.validate()?;
    Ok(estimate_risk_inner(config))
}

/// Monte-Carlo risk table on a dedicated pool of `jobs` threads.
pub fn estimate_risk_with_jobs(config: &ExperimentConfig, jobs: usize) -> Result<RiskTable> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| estimate_risk_inner(config)))
}

fn estimate_risk_inner(config: &ExperimentConfig) -> RiskTable {
    let n_alg = config.algorithms.len();
    let n_t = config.t_grid.len();
    let reps = config.replicates;
    let tasks: Vec<(usize, usize, u64)> = (0..n_alg)
        .flat_map(|ai| (0..n_t).flat_map(move |ti| (0..reps).map(move |rep| (ai, ti, rep))))
        .collect();
    let errs: Vec<Result<f64>> = tasks
        .par_iter()
        .map(|&(ai, ti, rep)| {
            let f = config.instance(ti, rep)?;
            let seed = derive_seed(config.master_seed, &[ORACLE_TAG, ai as u64, ti as u64, rep]);
            run_once(
                &f,
                &config.algorithms[ai],
                config.t_grid[ti],
                config.sigma,
                seed,
                config.initial_interval,
            )
        })
        .collect();

    let function = config.function_id();
    let mut rows = Vec::with_capacity(n_alg * n_t);
    for (cell, chunk) in errs.chunks(reps as usize).enumerate() {
        let (ai, ti) = (cell / n_t, cell % n_t);
        let mut m = RunningMoments::default();
        let mut failure = None;
        for e in chunk {
            match e {
                Ok(v) => m.push(*v),
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            }
        }
        rows.push(RiskRow {
            function: function.clone(),
            algorithm: config.algorithms[ai].id(),
            t: config.t_grid[ti],
            mean_err: failure.is_none().then(|| m.mean()),
            stderr: failure.is_none().then(|| m.stderr()),
            n: if failure.is_none() { m.count() } else { 0 },
            error: failure,
        });
    }
    RiskTable { rows }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Root mean squared error.
    pub rms: f64,
    pub n: u64,
}

/// Risk of `alg` on a fixed function over `replicates` independent oracle
/// sessions seeded by `derive_seed(seed, [rep])`.
pub fn measure_risk(
    f: &ConvexFunction1D,
    alg: &AlgorithmSpec,
    t: u64,
    sigma: f64,
    replicates: u64,
    seed: u64,
    interval: Interval,
) -> Result<RiskEstimate> {
    if replicates == 0 {
        return Err(Error::Argument("replicates must be at least 1".into()));
    }
    let errs: Vec<Result<f64>> = (0..replicates)
        .into_par_iter()
        .map(|rep| run_once(f, alg, t, sigma, derive_seed(seed, &[rep]), interval))
        .collect();
    let mut m = RunningMoments::default();
    let mut sq = RunningMoments::default();
    for e in errs {
        let e = e?;
        m.push(e);
        sq.push(e * e);
    }
    Ok(RiskEstimate {
        mean: m.mean(),
        stderr: m.stderr(),
        rms: sq.mean().sqrt(),
        n: m.count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub t_min: u64,
    pub t_max: u64,
    pub n: usize,
}

/// OLS of `ln mean_err` on `ln T` over the cells of one curve with positive
/// risk.
pub fn fit_loglog_slope(table: &RiskTable, function: &str, algorithm: &str) -> Result<SlopeFit> {
    let pts: Vec<(u64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.function == function && r.algorithm == algorithm)
        .filter_map(|r| r.mean_err.filter(|&m| m > 0.0).map(|m| (r.t, m)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Data(format!(
            "slope fit for {algorithm} on {function} needs 3 positive cells, found {}",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let fit = ols(&xs, &ys)?;
    Ok(SlopeFit {
        slope: fit.slope,
        intercept: fit.intercept,
        stderr_slope: fit.stderr_slope,
        t_min: pts.iter().map(|p| p.0).min().unwrap_or(0),
        t_max: pts.iter().map(|p| p.0).max().unwrap_or(0),
        n: pts.len(),
    })
}

/// Optimal log-log slope `-1 / (2 (k - 1))` for power functions.
pub fn reference_slope(spec: &FunctionSpec) -> Option<f64> {
    spec.flatness_exponent().map(|k| -1.0 / (2.0 * (k - 1.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRow {
    pub function: String,
    pub algorithm: String,
    pub fit: std::result::Result<SlopeFit, String>,
    pub reference_slope: Option<f64>,
}

/// One slope fit per (function, algorithm) curve, in table order.
pub fn fit_all_slopes(table: &RiskTable, reference: Option<f64>) -> Vec<SlopeRow> {
    let mut seen: Vec<(String, String)> = Vec::new();
    for r in &table.rows {
        let key = (r.function.clone(), r.algorithm.clone());
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    seen.into_iter()
        .map(|(function, algorithm)| SlopeRow {
            fit: fit_loglog_slope(table, &function, &algorithm).map_err(|e| e.to_string()),
            function,
            algorithm,
            reference_slope: reference,
        })
        .collect()
}

/// CSV for [`fit_all_slopes`]; failed fits leave the numeric columns empty.
pub fn slopes_to_csv(rows: &[SlopeRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
    w.write_record(SLOPES_CSV_HEADER).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let fit = r.fit.as_ref().ok();
        w.write_record([
            r.function.clone(),
            r.algorithm.clone(),
            opt(fit.map(|f| f.slope)),
            opt(fit.map(|f| f.intercept)),
            opt(fit.map(|f| f.stderr_slope)),
            fit.map(|f| f.t_min.to_string()).unwrap_or_default(),
            fit.map(|f| f.t_max.to_string()).unwrap_or_default(),
            fit.map_or(0, |f| f.n).to_string(),
            opt(r.reference_slope),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

/// `(d / 4) exp(-T kappa^2 / (4 sigma^2))`, a lower bound on the pair-max
/// risk of any method that must tell two functions apart.
pub fn two_point_floor(d: f64, kappa: f64, t: u64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Argument(format!(
            "two-point floor needs sigma > 0, got {sigma}"
        )));
    }
    if !(d >= 0.0 && d.is_finite() && kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::Argument(format!(
            "d and kappa must be finite and >= 0, got d={d}, kappa={kappa}"
        )));
    }
    Ok(d / 4.0 * (-(t as f64) * kappa * kappa / (4.0 * sigma * sigma)).exp())
}

/// Reference band `[3/16, C] * omega_f(sigma / sqrt(T))` with
/// `C = max(1, (8 alpha)^(alpha / 2)) / 2`. Printed for comparison only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceBands {
    pub t: u64,
    pub omega: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn reference_bands(
    f: &ConvexFunction1D,
    t: u64,
    sigma: f64,
    alpha: f64,
) -> Result<ReferenceBands> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Argument(format!(
            "bands need sigma > 0, got {sigma}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Argument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if t == 0 {
        return Err(Error::Argument("bands need T >= 1".into()));
    }
    let omega = modulus_numeric(f, sigma / (t as f64).sqrt(), DEFAULT_TOL)?;
    let c_upper = 0.5 * 1f64.max((8.0 * alpha).powf(alpha / 2.0));
    Ok(ReferenceBands {
        t,
        omega,
        lower: 3.0 / 16.0 * omega,
        upper: c_upper * omega,
    })
}

/// Largest admissible `delta`, `sqrt(1 / (8e))`.
pub fn superefficiency_delta_limit() -> f64 {
    (1.0 / (8.0 * std::f64::consts::E)).sqrt()
}

/// `(4 - sqrt 2) / 4`.
pub fn superefficiency_constant() -> f64 {
    (4.0 - std::f64::consts::SQRT_2) / 4.0
}

/// `sqrt(sigma^2 ln(1 / (8 delta^2)) / T)`.
pub fn superefficiency_epsilon(delta: f64, t: u64, sigma: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < superefficiency_delta_limit()) {
        return Err(Error::Argument(format!(
            "delta must lie in (0, {:.6}), got {delta}",
            superefficiency_delta_limit()
        )));
    }
    if t == 0 {
        return Err(Error::Argument("T must be at least 1".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Argument(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    Ok((sigma * sigma * (1.0 / (8.0 * delta * delta)).ln() / t as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperefficiencyParams {
    pub delta: f64,
    pub t: u64,
    pub sigma: f64,
    pub replicates: u64,
    pub seed: u64,
    pub initial_interval: Interval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperefficiencyReport {
    pub target: String,
    pub estimator: String,
    pub epsilon_t: f64,
    pub risk_f: RiskEstimate,
    pub risk_g_plus: RiskEstimate,
    pub risk_g_minus: RiskEstimate,
    pub d_f_g_plus: f64,
    pub d_f_g_minus: f64,
    pub omega_g_plus: f64,
    pub omega_g_minus: f64,
    /// `omega_f(sigma / sqrt(T))`, the benchmark the estimator is compared to.
    pub omega_f_benchmark: f64,
    pub h_epsilon: f64,
    /// `(4 - sqrt 2) / 4 * H(epsilon_T)`.
    pub proposition_reference: f64,
    /// Whether the root mean squared error at `f` is at most
    /// `delta * omega_f(sigma / sqrt(T))`.
    pub superefficient_at_f: bool,
}

impl SuperefficiencyReport {
    pub fn max_alternative_risk(&self) -> f64 {
        self.risk_g_plus.mean.max(self.risk_g_minus.mean)
    }

    pub fn d_fg(&self) -> f64 {
        self.d_f_g_plus.max(self.d_f_g_minus)
    }

    pub fn omega_ref(&self) -> f64 {
        self.omega_g_plus.max(self.omega_g_minus)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
        w.write_record(SUPEREFFICIENCY_CSV_HEADER)
            .map_err(csv_err)?;
        w.write_record([
            self.target.clone(),
            self.epsilon_t.to_string(),
            self.risk_f.mean.to_string(),
            self.risk_g_plus.mean.to_string(),
            self.risk_g_minus.mean.to_string(),
            self.d_fg().to_string(),
            self.omega_ref().to_string(),
        ])
        .map_err(csv_err)?;
        finish_csv(w)
    }
}

/// Risk of `estimator` at `f` and at the tilted alternatives
/// `f +- epsilon_T x`, with modulus reference values.
pub fn superefficiency_experiment(
    f: &ConvexFunction1D,
    estimator: &AlgorithmSpec,
    params: &SuperefficiencyParams,
) -> Result<SuperefficiencyReport> {
    let eps = superefficiency_epsilon(params.delta, params.t, params.sigma)?;
    let g_plus = f.tilted(eps)?;
    let g_minus = f.tilted(-eps)?;
    let risk = |g: &ConvexFunction1D, which: u64| {
        measure_risk(
            g,
            estimator,
            params.t,
            params.sigma,
            params.replicates,
            derive_seed(params.seed, &[which]),
            params.initial_interval,
        )
    };
    let risk_f = risk(f, 0)?;
    let risk_g_plus = risk(&g_plus, 1)?;
    let risk_g_minus = risk(&g_minus, 2)?;
    let (omega_g_plus, omega_g_minus) = if eps > 0.0 {
        (
            modulus_numeric(&g_plus, eps, DEFAULT_TOL)?,
            modulus_numeric(&g_minus, eps, DEFAULT_TOL)?,
        )
    } else {
        (0.0, 0.0)
    };
    let omega_f_benchmark = if params.sigma > 0.0 {
        modulus_numeric(f, params.sigma / (params.t as f64).sqrt(), DEFAULT_TOL)?
    } else {
        0.0
    };
    let h_epsilon = if eps > 0.0 {
        big_h(f, eps, DEFAULT_TOL)?
    } else {
        0.0
    };
    Ok(SuperefficiencyReport {
        target: f.spec().label(),
        estimator: estimator.id(),
        epsilon_t: eps,
        risk_f,
        risk_g_plus,
        risk_g_minus,
        d_f_g_plus: pair_distance_d(f, &g_plus)?,
        d_f_g_minus: pair_distance_d(f, &g_minus)?,
        omega_g_plus,
        omega_g_minus,
        omega_f_benchmark,
        h_epsilon,
        proposition_reference: superefficiency_constant() * h_epsilon,
        superefficient_at_f: risk_f.rms <= params.delta * omega_f_benchmark,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::StepSchedule;

    fn dom() -> Interval {
        Interval::new(-2.0, 2.0).unwrap()
    }

    fn quad(x_star: f64) -> ConvexFunction1D {
        ConvexFunction1D::new(FunctionSpec::SymmetricPower { k: 2.0, x_star }, dom()).unwrap()
    }

    fn config(sigma: f64, replicates: u64) -> ExperimentConfig {
        ExperimentConfig {
            function: FunctionSpec::SymmetricPower {
                k: 2.0,
                x_star: 0.3,
            },
            domain: dom(),
            x_star_uniform: None,
            algorithms: vec![AlgorithmSpec::binary_search(0.5)],
            t_grid: vec![100, 1000],
            replicates,
            sigma,
            master_seed: 42,
            initial_interval: dom(),
        }
    }

    fn synthetic(f: impl Fn(f64) -> f64) -> RiskTable {
        RiskTable {
            rows: default_t_grid()
                .into_iter()
                .map(|t| RiskRow {
                    function: "f".into(),
                    algorithm: "a".into(),
                    t,
                    mean_err: Some(f(t as f64)),
                    stderr: Some(0.0),
                    n: 1,
                    error: None,
                })
                .collect(),
        }
    }

    #[test]
    fn default_grid_values() {
        assert_eq!(
            default_t_grid(),
            vec![100, 215, 464, 1000, 2154, 4641, 10000]
        );
    }

    #[test]
    fn noiseless_cell_is_deterministic() {
        let table = estimate_risk(&config(0.0, 10)).unwrap();
        for row in &table.rows {
            let (e, _) = crate::algorithms::epochs_schedule(row.t, 0.5).unwrap();
            assert!(row.mean_err.unwrap() <= 4.0 * 0.5f64.powi(e as i32));
            assert_eq!(row.stderr, Some(0.0));
            assert_eq!(row.n, 10);
        }
    }

    #[test]
    fn single_replicate_has_zero_stderr() {
        let table = estimate_risk(&config(0.1, 1)).unwrap();
        assert!(table.rows.iter().all(|r| r.stderr == Some(0.0) && r.n == 1));
    }

    #[test]
    fn schedule_failure_is_a_gap() {
        let mut c = config(0.1, 5);
        c.t_grid = vec![2, 100];
        let table = estimate_risk(&c).unwrap();
        assert_eq!(table.rows[0].mean_err, None);
        assert_eq!(table.rows[0].n, 0);
        assert!(table.rows[1].mean_err.is_some());
        let csv = table.to_csv().unwrap();
        assert!(csv.lines().nth(1).unwrap().ends_with(",2,,,0"));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut c = config(0.1, 20);
        c.x_star_uniform = Some(Interval::new(-1.0, 1.0).unwrap());
        c.algorithms
            .push(AlgorithmSpec::sgd(StepSchedule::InverseSqrtT));
        let a = estimate_risk_with_jobs(&c, 1).unwrap();
        let b = estimate_risk_with_jobs(&c, 8).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    }

    #[test]
    fn invalid_configs() {
        let mut c = config(0.1, 1);
        c.t_grid = vec![100, 100];
        assert!(matches!(estimate_risk(&c), Err(Error::Config(_))));
        let mut c = config(0.1, 0);
        c.replicates = 0;
        assert!(estimate_risk(&c).is_err());
        let mut c = config(0.1, 1);
        c.initial_interval = Interval::new(-3.0, 3.0).unwrap();
        assert!(estimate_risk(&c).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut c = config(0.1, 3);
        c.t_grid = vec![2, 100];
        let table = estimate_risk(&c).unwrap();
        let text = table.to_csv().unwrap();
        assert!(text.starts_with("function,algorithm,T,mean_err,stderr,n\n"));
        let back = RiskTable::from_csv(&text).unwrap();
        assert_eq!(back.to_csv().unwrap(), text);
        assert_eq!(back.rows[1].mean_err, table.rows[1].mean_err);
    }

    #[test]
    fn slope_of_exact_power_laws() {
        let fit = fit_loglog_slope(&synthetic(|t| t.powf(-0.5)), "f", "a").unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        let fit = fit_loglog_slope(&synthetic(|t| 3.0 / t), "f", "a").unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert_eq!((fit.t_min, fit.t_max, fit.n), (100, 10000, 7));
    }

    #[test]
    fn slope_needs_three_positive_cells() {
        let mut t = synthetic(|t| 1.0 / t);
        for r in t.rows.iter_mut().skip(2) {
            r.mean_err = Some(0.0);
        }
        assert!(matches!(
            fit_loglog_slope(&t, "f", "a"),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn slopes_csv_shape() {
        let rows = fit_all_slopes(&synthetic(|t| t.powf(-0.25)), Some(-0.25));
        let text = slopes_to_csv(&rows).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SLOPES_CSV_HEADER.join(","));
        assert!(lines.next().unwrap().ends_with(",100,10000,7,-0.25"));
    }

    #[test]
    fn reference_slopes() {
        let k = |k| FunctionSpec::SymmetricPower { k, x_star: 0.0 };
        assert_eq!(reference_slope(&k(1.5)), Some(-1.0));
        assert_eq!(reference_slope(&k(2.0)), Some(-0.5));
        assert_eq!(reference_slope(&k(3.0)), Some(-0.25));
        let a = FunctionSpec::AsymmetricPower {
            k_l: 2.0,
            k_r: 3.0,
            x_star: 0.0,
        };
        assert_eq!(reference_slope(&a), Some(-0.25));
    }

    #[test]
    fn two_point_floor_examples() {
        let v = two_point_floor(0.2, 0.05, 100, 0.1).unwrap();
        assert!((v - 0.05 * (-6.25f64).exp()).abs() < 1e-18);
        assert!((v - 9.65e-5).abs() < 1e-7);
        assert_eq!(two_point_floor(0.2, 0.0, 100, 0.1).unwrap(), 0.05);
        assert_eq!(two_point_floor(0.0, 0.3, 100, 0.1).unwrap(), 0.0);
        assert!(two_point_floor(0.2, 0.05, 100, 0.0).is_err());
    }

    #[test]
    fn reference_bands_for_quadratic() {
        let b = reference_bands(&quad(0.0), 10_000, 0.1, 1.0).unwrap();
        assert!((b.omega - 1e-3).abs() < 1e-11);
        assert!((b.lower - 3.0 / 16.0 * 1e-3).abs() < 1e-12);
        // (8)^(1/2) / 2
        assert!((b.upper - 8f64.sqrt() / 2.0 * 1e-3).abs() < 1e-11);
    }

    #[test]
    fn superefficiency_constant_estimator() {
        let f = quad(0.0);
        let p = SuperefficiencyParams {
            delta: 0.1,
            t: 1000,
            sigma: 0.1,
            replicates: 7,
            seed: 1,
            initial_interval: dom(),
        };
        let rep =
            superefficiency_experiment(&f, &AlgorithmSpec::Constant { value: 0.0 }, &p).unwrap();
        let eps = (0.01 * (1.0f64 / 0.08).ln() / 1000.0).sqrt();
        assert_eq!(rep.epsilon_t, eps);
        assert_eq!(rep.risk_f.mean, 0.0);
        assert_eq!(rep.risk_g_plus.mean, eps);
        assert_eq!(rep.risk_g_plus.mean, rep.d_f_g_plus);
        assert_eq!(rep.risk_g_minus.mean, rep.d_f_g_minus);
        assert!(rep.superefficient_at_f);
        assert!(rep.max_alternative_risk() >= rep.d_fg());
        let csv = rep.to_csv().unwrap();
        assert!(
            csv.starts_with("target,epsilon_T,risk_f,risk_g_plus,risk_g_minus,d_fg,omega_ref\n")
        );
    }

    #[test]
    fn superefficiency_delta_range() {
        assert!((superefficiency_delta_limit() - 0.21444).abs() < 1e-5);
        assert!(superefficiency_epsilon(0.25, 100, 0.1).is_err());
        assert!(superefficiency_epsilon(0.0, 100, 0.1).is_err());
        assert!(superefficiency_epsilon(0.2, 100, 0.1).is_ok());
    }

    #[test]
    fn superefficiency_binary_search_is_finite() {
        let p = SuperefficiencyParams {
            delta: 0.1,
            t: 1000,
            sigma: 0.1,
            replicates: 20,
            seed: 3,
            initial_interval: dom(),
        };
        let rep =
            superefficiency_experiment(&quad(0.2), &AlgorithmSpec::binary_search(0.5), &p).unwrap();
        for r in [rep.risk_f, rep.risk_g_plus, rep.risk_g_minus] {
            assert!(r.mean.is_finite() && r.mean >= 0.0);
        }
        assert!(rep.omega_ref() > 0.0);
    }
}
