//! Optimization algorithms driven by the stochastic oracle.
//!
//! [`sign_test_binary_search`] splits the budget `T` into
//! `E = floor(r ln T)` rounds of `T0 = floor(T / E)` queries. Each round
//! averages the oracle at the midpoint of the current interval and keeps the
//! left half when the average is positive, the right half otherwise (ties go
//! right). [`sgd`] is the projected stochastic gradient baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::convex_fn::{ConvexFunction1D, Interval};
use crate::error::{Error, Result};
use crate::modulus::{flat_set, DEFAULT_TOL};
use crate::oracle::OracleSession;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinarySearchParams {
    r: f64,
    initial_interval: Interval,
    delta: f64,
}

impl BinarySearchParams {
    pub fn new(r: f64, initial_interval: Interval, delta: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Argument(format!("r must be positive, got {r}")));
        }
        if !(initial_interval.lo < initial_interval.hi) {
            return Err(Error::Argument(format!(
                "initial interval {initial_interval} must have a0 < b0"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Argument(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self {
            r,
            initial_interval,
            delta,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn initial_interval(&self) -> Interval {
        self.initial_interval
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// One bisection round or one SGD step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub query_point: f64,
    pub mean_gradient: f64,
    /// Interval after the update (the projection interval for SGD).
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub estimate: f64,
    pub queries_used: u64,
    pub trace: Vec<RoundRecord>,
}

/// `(E, T0) = (floor(r ln T), floor(T / E))`.
pub fn epochs_schedule(t: u64, r: f64) -> Result<(u64, u64)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Argument(format!("r must be positive, got {r}")));
    }
    if t == 0 {
        return Err(Error::Schedule { t, r });
    }
    let e = (r * (t as f64).ln()).floor();
    if e < 1.0 {
        return Err(Error::Schedule { t, r });
    }
    let e = e as u64;
    let t0 = t / e;
    if t0 == 0 {
        return Err(Error::Schedule { t, r });
    }
    Ok((e, t0))
}

fn check_inside(f: &ConvexFunction1D, interval: Interval, what: &str) -> Result<()> {
    if f.domain().contains_interval(&interval) {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "{what} {interval} is not contained in the domain {}",
            f.domain()
        )))
    }
}

/// `rounds` bisection rounds of `per_round` queries each, starting from
/// `interval`. Returns the midpoint of the final interval.
pub fn bisection_rounds(
    oracle: &mut OracleSession<'_>,
    interval: Interval,
    rounds: u64,
    per_round: u64,
) -> Result<RunResult> {
    check_inside(oracle.function(), interval, "initial interval")?;
    let needed = rounds.checked_mul(per_round).ok_or(Error::Budget {
        budget: oracle.config().budget(),
    })?;
    if needed > oracle.remaining_budget() {
        return Err(Error::Budget {
            budget: oracle.config().budget(),
        });
    }
    let start = oracle.queries_used();
    let (mut a, mut b) = (interval.lo, interval.hi);
    let mut trace = Vec::with_capacity(rounds as usize);
    for e in 1..=rounds as usize {
        let x = 0.5 * (a + b);
        let z = oracle.query_mean(x, per_round)?;
        if z > 0.0 {
            b = x;
        } else {
            a = x;
        }
        trace.push(RoundRecord {
            round: e,
            query_point: x,
            mean_gradient: z,
            interval: Interval { lo: a, hi: b },
        });
    }
    Ok(RunResult {
        estimate: 0.5 * (a + b),
        queries_used: oracle.queries_used() - start,
        trace,
    })
}

/// Sign-testing binary search with `T` equal to the oracle's budget.
pub fn sign_test_binary_search(
    oracle: &mut OracleSession<'_>,
    params: &BinarySearchParams,
) -> Result<RunResult> {
    let (rounds, per_round) = epochs_schedule(oracle.config().budget(), params.r)?;
    bisection_rounds(oracle, params.initial_interval, rounds, per_round)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatSetDiagnostics {
    pub rounds: u64,
    pub per_round: u64,
    /// `sigma * sqrt(2 ln(E / delta))`.
    pub c_delta: f64,
    /// `c_delta / sqrt(T0)`.
    pub threshold: f64,
    /// Closure of `{y : |f'(y)| < threshold}`; the minimizer set when the
    /// threshold is zero, `None` when the set is empty.
    pub flat_set: Option<Interval>,
    /// `2^-E (b0 - a0)`.
    pub radius_bound: f64,
}

impl FlatSetDiagnostics {
    /// Whether `estimate` lies within `radius_bound` of the flat set.
    pub fn covers(&self, estimate: f64) -> bool {
        self.flat_set
            .is_some_and(|s| s.distance_to(estimate) <= self.radius_bound)
    }
}

/// Quantities behind the high-probability guarantee of the binary search:
/// after `E` rounds the output is within `2^-E (b0 - a0)` of the flat set at
/// level `C_delta / sqrt(T0)` with probability at least `1 - delta`.
pub fn flat_set_diagnostics(
    f: &ConvexFunction1D,
    t: u64,
    params: &BinarySearchParams,
    sigma: f64,
) -> Result<FlatSetDiagnostics> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Argument(format!("sigma must be >= 0, got {sigma}")));
    }
    let (rounds, per_round) = epochs_schedule(t, params.r)?;
    let c_delta = sigma * (2.0 * (rounds as f64 / params.delta).ln()).sqrt();
    let threshold = c_delta / (per_round as f64).sqrt();
    let flat = if threshold > 0.0 {
        flat_set(f, threshold, DEFAULT_TOL)?
    } else {
        Some(f.minimizer_set())
    };
    let radius_bound = params.initial_interval.width() * 0.5f64.powi(rounds as i32);
    Ok(FlatSetDiagnostics {
        rounds,
        per_round,
        c_delta,
        threshold,
        flat_set: flat,
        radius_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `eta(t) = c / t`.
    InverseT,
    /// `eta(t) = c / sqrt(t)`.
    InverseSqrtT,
}

impl StepSchedule {
    fn step(&self, scale: f64, t: u64) -> f64 {
        match self {
            StepSchedule::InverseT => scale / t as f64,
            StepSchedule::InverseSqrtT => scale / (t as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterateChoice {
    #[default]
    Last,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StartPoint {
    Fixed(f64),
    /// Uniform over the projection interval, drawn from the oracle's
    /// algorithm stream.
    #[default]
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdParams {
    pub schedule: StepSchedule,
    pub scale: f64,
    pub x0: StartPoint,
    pub projection_interval: Interval,
    pub iterate: IterateChoice,
    pub record_trace: bool,
}

impl SgdParams {
    pub fn new(schedule: StepSchedule, projection_interval: Interval) -> Self {
        Self {
            schedule,
            scale: 1.0,
            x0: StartPoint::UniformRandom,
            projection_interval,
            iterate: IterateChoice::Last,
            record_trace: false,
        }
    }
}

/// `T` projected steps `x_{t+1} = P(x_t - eta(t) g_t)` with `T` the oracle's
/// budget. The start point is projected before the first query.
pub fn sgd(oracle: &mut OracleSession<'_>, params: &SgdParams) -> Result<RunResult> {
    let proj = params.projection_interval;
    if !(params.scale > 0.0 && params.scale.is_finite()) {
        return Err(Error::Argument(format!(
            "step scale must be positive, got {}",
            params.scale
        )));
    }
    check_inside(oracle.function(), proj, "projection interval")?;
    let steps = oracle.remaining_budget();
    let start = oracle.queries_used();
    let mut x = match params.x0 {
        StartPoint::Fixed(v) => proj.clamp(v),
        StartPoint::UniformRandom if proj.lo < proj.hi => {
            let lo = proj.lo;
            let hi = proj.hi;
            oracle.algorithm_rng().random_range(lo..hi)
        }
        StartPoint::UniformRandom => proj.lo,
    };
    let mut trace = Vec::new();
    let mut avg = 0.0;
    for t in 1..=steps {
        let g = oracle.query(x)?;
        if params.iterate == IterateChoice::Average {
            avg += (x - avg) / t as f64;
        }
        let next = proj.clamp(x - params.schedule.step(params.scale, t) * g);
        if params.record_trace {
            trace.push(RoundRecord {
                round: t as usize,
                query_point: x,
                mean_gradient: g,
                interval: proj,
            });
        }
        x = next;
    }
    let estimate = match params.iterate {
        IterateChoice::Last => x,
        IterateChoice::Average if steps > 0 => avg,
        IterateChoice::Average => x,
    };
    Ok(RunResult {
        estimate,
        queries_used: oracle.queries_used() - start,
        trace,
    })
}

/// Algorithm selection as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum AlgorithmSpec {
    #[serde(rename = "binary-search")]
    BinarySearch {
        r: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    #[serde(rename = "sgd")]
    Sgd {
        schedule: StepSchedule,
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default)]
        iterate: IterateChoice,
        /// Fixed start; uniform over the projection interval when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<f64>,
    },
    /// Ignores the oracle and always reports `value`.
    #[serde(rename = "constant")]
    Constant { value: f64 },
}

fn default_delta() -> f64 {
    0.05
}

fn default_scale() -> f64 {
    1.0
}

impl AlgorithmSpec {
    pub fn binary_search(r: f64) -> Self {
        AlgorithmSpec::BinarySearch {
            r,
            delta: default_delta(),
        }
    }

    pub fn sgd(schedule: StepSchedule) -> Self {
        AlgorithmSpec::Sgd {
            schedule,
            scale: 1.0,
            iterate: IterateChoice::Last,
            x0: None,
        }
    }

    /// Stable identifier used in CSV output; contains no commas.
    pub fn id(&self) -> String {
        match self {
            AlgorithmSpec::BinarySearch { r, .. } => format!("binary-search(r={r})"),
            AlgorithmSpec::Sgd {
                schedule,
                scale,
                iterate,
                x0,
            } => {
                let eta = match schedule {
                    StepSchedule::InverseT => "1/t",
                    StepSchedule::InverseSqrtT => "1/sqrt(t)",
                };
                let mut id = if *scale == 1.0 {
                    format!("sgd({eta}")
                } else {
                    format!("sgd({scale}*{eta}")
                };
                if *iterate == IterateChoice::Average {
                    id.push_str(" avg");
                }
                if let Some(x0) = x0 {
                    id.push_str(&format!(" x0={x0}"));
                }
                id.push(')');
                id
            }
            AlgorithmSpec::Constant { value } => format!("constant({value})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmSpec::BinarySearch { r, delta } => {
                BinarySearchParams::new(*r, Interval { lo: -1.0, hi: 1.0 }, *delta).map(|_| ())
            }
            AlgorithmSpec::Sgd { scale, x0, .. } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Argument(format!(
                        "step scale must be positive, got {scale}"
                    )));
                }
                if x0.is_some_and(|v| !v.is_finite()) {
                    return Err(Error::Argument("x0 must be finite".into()));
                }
                Ok(())
            }
            AlgorithmSpec::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Argument("constant estimate must be finite".into()))
                }
            }
        }
    }

    /// Run against `oracle` using its full budget. `interval` is the initial
    /// bracket for the binary search and the projection interval for SGD.
    pub fn run(&self, oracle: &mut OracleSession<'_>, interval: Interval) -> Result<RunResult> {
        match *self {
            AlgorithmSpec::BinarySearch { r, delta } => {
                let params = BinarySearchParams::new(r, interval, delta)?;
                sign_test_binary_search(oracle, &params)
            }
            AlgorithmSpec::Sgd {
                schedule,
                scale,
                iterate,
                x0,
            } => {
                let params = SgdParams {
                    schedule,
                    scale,
                    x0: x0.map_or(StartPoint::UniformRandom, StartPoint::Fixed),
                    projection_interval: interval,
                    iterate,
                    record_trace: false,
                };
                sgd(oracle, &params)
            }
            AlgorithmSpec::Constant { value } => Ok(RunResult {
                estimate: value,
                queries_used: 0,
                trace: Vec::new(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_fn::{err, FunctionSpec};
    use crate::oracle::OracleConfig;

    fn quad(x_star: f64) -> ConvexFunction1D {
        ConvexFunction1D::new(
            FunctionSpec::SymmetricPower { k: 2.0, x_star },
            Interval::new(-2.0, 2.0).unwrap(),
        )
        .unwrap()
    }

    fn wide() -> Interval {
        Interval::new(-2.0, 2.0).unwrap()
    }

    #[test]
    fn schedule_examples() {
        // ln 10000 = 9.2103..., 0.5 * that floors to 4.
        assert_eq!(epochs_schedule(10_000, 0.5).unwrap(), (4, 2500));
        // ln 100 = 4.605...
        assert_eq!(epochs_schedule(100, 1.0).unwrap(), (4, 25));
        assert!(matches!(
            epochs_schedule(2, 0.5),
            Err(Error::Schedule { .. })
        ));
    }

    #[test]
    fn one_noiseless_round_moves_right() {
        let f = quad(0.25);
        let mut o = OracleSession::new(OracleConfig::new(0.0, 10, 0).unwrap(), &f);
        let r = bisection_rounds(&mut o, wide(), 1, 10).unwrap();
        assert_eq!(r.trace[0].query_point, 0.0);
        assert_eq!(r.trace[0].mean_gradient, -0.25);
        assert_eq!(r.trace[0].interval, Interval::new(0.0, 2.0).unwrap());
    }

    #[test]
    fn noiseless_search_converges() {
        let f = quad(0.25);
        let mut o = OracleSession::new(OracleConfig::new(0.0, 1000, 0).unwrap(), &f);
        let r = bisection_rounds(&mut o, wide(), 10, 100).unwrap();
        assert!((r.estimate - 0.25).abs() <= 4.0 * 2f64.powi(-10));
        assert_eq!(r.queries_used, 1000);
        for rec in &r.trace {
            assert_eq!(rec.interval.width(), 4.0 * 2f64.powi(-(rec.round as i32)));
        }
        let last = r.trace.last().unwrap().interval;
        assert_eq!(r.estimate, last.midpoint());
    }

    #[test]
    fn search_uses_exactly_e_times_t0() {
        let f = quad(0.1);
        let mut o = OracleSession::new(OracleConfig::new(0.1, 10_000, 3).unwrap(), &f);
        let params = BinarySearchParams::new(0.5, wide(), 0.05).unwrap();
        let r = sign_test_binary_search(&mut o, &params).unwrap();
        assert_eq!(r.queries_used, 4 * 2500);
        assert_eq!(r.trace.len(), 4);
    }

    #[test]
    fn search_tie_goes_right() {
        let f = ConvexFunction1D::new(
            FunctionSpec::PiecewiseLinear {
                breakpoints: vec![-1.0, 1.0],
                slopes: vec![-1.0, 0.0, 1.0],
            },
            wide(),
        )
        .unwrap();
        let mut o = OracleSession::new(OracleConfig::new(0.0, 1, 0).unwrap(), &f);
        let r = bisection_rounds(&mut o, wide(), 1, 1).unwrap();
        assert_eq!(r.trace[0].mean_gradient, 0.0);
        assert_eq!(r.trace[0].interval, Interval::new(0.0, 2.0).unwrap());
    }

    #[test]
    fn search_rejects_interval_outside_domain() {
        let f = quad(0.0);
        let mut o = OracleSession::new(OracleConfig::new(0.0, 100, 0).unwrap(), &f);
        let r = bisection_rounds(&mut o, Interval::new(-3.0, 3.0).unwrap(), 2, 10);
        assert!(r.is_err());
    }

    #[test]
    fn search_propagates_schedule_error() {
        let f = quad(0.0);
        let mut o = OracleSession::new(OracleConfig::new(0.1, 2, 0).unwrap(), &f);
        let params = BinarySearchParams::new(0.5, wide(), 0.05).unwrap();
        assert!(matches!(
            sign_test_binary_search(&mut o, &params),
            Err(Error::Schedule { .. })
        ));
    }

    #[test]
    fn diagnostics_closed_form() {
        let f = quad(0.0);
        let params = BinarySearchParams::new(0.5, wide(), 0.05).unwrap();
        let d = flat_set_diagnostics(&f, 10_000, &params, 0.1).unwrap();
        assert_eq!((d.rounds, d.per_round), (4, 2500));
        // 0.1 * sqrt(2 ln 80), ln 80 = 4.382026...
        assert!((d.c_delta - 0.1 * (2.0 * 80f64.ln()).sqrt()).abs() < 1e-15);
        assert!((d.c_delta - 0.2960).abs() < 1e-4);
        assert_eq!(d.radius_bound, 0.25);
        let fs = d.flat_set.unwrap();
        assert!((fs.hi - d.threshold).abs() < 1e-11 && (fs.lo + d.threshold).abs() < 1e-11);
    }

    #[test]
    fn diagnostics_limit_delta_to_one() {
        let f = quad(0.0);
        let params = BinarySearchParams::new(0.5, wide(), 1.0 - 1e-12).unwrap();
        let d = flat_set_diagnostics(&f, 10, &params, 0.1).unwrap();
        assert_eq!(d.rounds, 1);
        assert!(d.c_delta > 0.0 && d.c_delta < 1e-6);
    }

    #[test]
    fn diagnostics_absolute_flat_set_is_the_kink() {
        let f = ConvexFunction1D::new(FunctionSpec::Absolute { x_star: 0.0 }, wide()).unwrap();
        let params = BinarySearchParams::new(0.5, wide(), 0.05).unwrap();
        let d = flat_set_diagnostics(&f, 10_000, &params, 0.1).unwrap();
        assert!(d.threshold < 1.0);
        let s = d.flat_set.unwrap();
        assert!(s.lo.abs() < 1e-11 && s.hi.abs() < 1e-11);
    }

    #[test]
    fn sgd_first_step_cancels_on_quadratic() {
        let f = quad(0.0);
        let mut o = OracleSession::new(OracleConfig::new(0.0, 1, 0).unwrap(), &f);
        let mut p = SgdParams::new(StepSchedule::InverseT, wide());
        p.x0 = StartPoint::Fixed(0.7);
        p.record_trace = true;
        let r = sgd(&mut o, &p).unwrap();
        assert_eq!(r.trace[0].query_point, 0.7);
        assert_eq!(r.estimate, 0.0);
    }

    #[test]
    fn sgd_projects_start_point() {
        let f = quad(0.0);
        let mut o = OracleSession::new(OracleConfig::new(0.0, 3, 0).unwrap(), &f);
        let mut p = SgdParams::new(StepSchedule::InverseSqrtT, wide());
        p.x0 = StartPoint::Fixed(-3.0);
        p.record_trace = true;
        let r = sgd(&mut o, &p).unwrap();
        assert_eq!(r.trace[0].query_point, -2.0);
        assert_eq!(r.queries_used, 3);
    }

    #[test]
    fn sgd_iterates_stay_projected() {
        let f = ConvexFunction1D::new(
            FunctionSpec::SymmetricPower {
                k: 3.0,
                x_star: 0.9,
            },
            wide(),
        )
        .unwrap();
        let proj = Interval::new(-1.0, 1.0).unwrap();
        let mut o = OracleSession::new(OracleConfig::new(2.0, 500, 11).unwrap(), &f);
        let mut p = SgdParams::new(StepSchedule::InverseSqrtT, proj);
        p.scale = 5.0;
        p.record_trace = true;
        let r = sgd(&mut o, &p).unwrap();
        assert!(r.trace.iter().all(|rec| proj.contains(rec.query_point)));
        assert!(proj.contains(r.estimate));
    }

    #[test]
    fn sgd_average_iterate() {
        let f = quad(0.0);
        let mut o = OracleSession::new(OracleConfig::new(0.0, 2, 0).unwrap(), &f);
        let mut p = SgdParams::new(StepSchedule::InverseT, wide());
        p.x0 = StartPoint::Fixed(0.7);
        p.iterate = IterateChoice::Average;
        // Query points are 0.7 then 0.0.
        assert!((sgd(&mut o, &p).unwrap().estimate - 0.35).abs() < 1e-15);
    }

    #[test]
    fn constant_estimator_ignores_oracle() {
        let f = quad(0.3);
        let mut o = OracleSession::new(OracleConfig::new(0.1, 5, 0).unwrap(), &f);
        let r = AlgorithmSpec::Constant { value: 0.3 }
            .run(&mut o, wide())
            .unwrap();
        assert_eq!(r.queries_used, 0);
        assert_eq!(err(r.estimate, &f), 0.0);
    }

    #[test]
    fn algorithm_ids_are_comma_free() {
        let specs = [
            AlgorithmSpec::binary_search(0.5),
            AlgorithmSpec::sgd(StepSchedule::InverseT),
            AlgorithmSpec::Sgd {
                schedule: StepSchedule::InverseSqrtT,
                scale: 2.0,
                iterate: IterateChoice::Average,
                x0: Some(0.5),
            },
            AlgorithmSpec::Constant { value: 0.1 },
        ];
        for s in specs {
            assert!(!s.id().contains(','));
            s.validate().unwrap();
        }
        assert_eq!(AlgorithmSpec::sgd(StepSchedule::InverseT).id(), "sgd(1/t)");
    }
}
