//! Randomized property checks shared by the proptest suite and the
//! acceptance runner.

#![allow(dead_code)]

use locmin::algorithms::{
    bisection_rounds, epochs_schedule, sgd, AlgorithmSpec, BinarySearchParams, SgdParams,
    StartPoint, StepSchedule,
};
use locmin::convex_fn::{err, pair_distance_d};
use locmin::experiments::{estimate_risk_with_jobs, ExperimentConfig};
use locmin::{ConvexFunction1D, FunctionSpec, Interval, OracleConfig, OracleSession};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};

pub const DOMAIN: Interval = Interval { lo: -2.0, hi: 2.0 };

pub fn base_spec() -> impl Strategy<Value = FunctionSpec> {
    prop_oneof![
        (1.2f64..4.0, -1.0f64..1.0)
            .prop_map(|(k, x_star)| FunctionSpec::SymmetricPower { k, x_star }),
        (1.2f64..4.0, 1.2f64..4.0, -1.0f64..1.0)
            .prop_map(|(k_l, k_r, x_star)| FunctionSpec::AsymmetricPower { k_l, k_r, x_star }),
        (-1.0f64..1.0).prop_map(|x_star| FunctionSpec::Absolute { x_star }),
        (
            prop::collection::vec(-1.5f64..1.5, 1..5),
            prop::collection::vec(-2.0f64..2.0, 6)
        )
            .prop_filter_map("distinct breakpoints", |(mut b, mut s)| {
                b.sort_by(f64::total_cmp);
                b.dedup_by(|x, y| (*x - *y).abs() < 1e-3);
                s.truncate(b.len() + 1);
                s.sort_by(f64::total_cmp);
                Some(FunctionSpec::PiecewiseLinear {
                    breakpoints: b,
                    slopes: s,
                })
            }),
    ]
}

pub fn any_function() -> impl Strategy<Value = ConvexFunction1D> {
    (base_spec(), prop::option::of(-0.5f64..0.5)).prop_map(|(s, tilt)| {
        let spec = match tilt {
            Some(eps) => s.tilt(eps),
            None => s,
        };
        ConvexFunction1D::new(spec, DOMAIN).expect("valid catalog function")
    })
}

fn in_domain() -> impl Strategy<Value = f64> {
    -2.0f64..=2.0
}

pub fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| match e {
        TestError::Fail(why, value) => format!("{why} for {value:?}"),
        TestError::Abort(why) => format!("aborted: {why}"),
    })
}

/// `err(x, f) < d / 2` forces `err(x, g) >= d / 2`.
pub fn exclusion(cases: u32) -> Result<(), String> {
    run(
        cases,
        (any_function(), -1.0f64..1.0, in_domain()),
        |(f, eps, x)| {
            let g = f
                .tilted(eps)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let d = pair_distance_d(&f, &g).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let half = d / 2.0;
            if err(x, &f) < half {
                prop_assert!(err(x, &g) >= half - 1e-15, "d = {d}");
            }
            if err(x, &g) < half {
                prop_assert!(err(x, &f) >= half - 1e-15, "d = {d}");
            }
            Ok(())
        },
    )
}

pub fn monotone_subgradients(cases: u32) -> Result<(), String> {
    run(
        cases,
        (any_function(), in_domain(), in_domain()),
        |(f, a, b)| {
            let (x, y) = if a <= b { (a, b) } else { (b, a) };
            let gx = f.subgradient(x).unwrap();
            let gy = f.subgradient(y).unwrap();
            prop_assert!(gx <= gy, "f'({x}) = {gx} > f'({y}) = {gy}");
            if x < y {
                let sx = f.subdifferential(x).unwrap();
                let sy = f.subdifferential(y).unwrap();
                prop_assert!(sx.hi <= sy.lo + 1e-12, "{sx} vs {sy}");
            }
            Ok(())
        },
    )
}

/// `f(y) >= f(x) + f'(x) (y - x)`.
pub fn first_order_convexity(cases: u32) -> Result<(), String> {
    run(
        cases,
        (any_function(), in_domain(), in_domain()),
        |(f, x, y)| {
            let fx = f.eval(x).unwrap();
            let fy = f.eval(y).unwrap();
            let g = f.subgradient(x).unwrap();
            let rhs = fx + g * (y - x);
            let slack = 1e-12 * (1.0 + fx.abs() + fy.abs() + (g * (y - x)).abs());
            prop_assert!(fy >= rhs - slack, "f(y) = {fy} < {rhs}");
            Ok(())
        },
    )
}

/// From a dyadic bracket every round halves the interval exactly and keeps
/// the next interval inside the previous one.
pub fn interval_halving(cases: u32) -> Result<(), String> {
    let bracket = (-64i32..0, 1i32..64).prop_map(|(a, b)| (a as f64 / 32.0, b as f64 / 32.0));
    run(
        cases,
        (
            any_function(),
            bracket,
            1u64..30,
            1u64..20,
            0.0f64..1.0,
            any::<u64>(),
        ),
        |(f, (a, b), rounds, per_round, sigma, seed)| {
            let budget = rounds * per_round;
            let mut o = OracleSession::new(OracleConfig::new(sigma, budget, seed).unwrap(), &f);
            let start = Interval::new(a, b).unwrap();
            let run = bisection_rounds(&mut o, start, rounds, per_round).unwrap();
            let mut prev = start;
            for rec in &run.trace {
                prop_assert_eq!(rec.interval.width(), prev.width() / 2.0);
                prop_assert!(prev.contains_interval(&rec.interval));
                prop_assert_eq!(rec.query_point, prev.midpoint());
                prev = rec.interval;
            }
            prop_assert_eq!(run.trace.len() as u64, rounds);
            prop_assert_eq!(run.estimate, prev.midpoint());
            Ok(())
        },
    )
}

/// Algorithms consume exactly their documented number of queries and never
/// exceed the budget.
pub fn query_accounting(cases: u32) -> Result<(), String> {
    run(
        cases,
        (
            any_function(),
            1u64..3000,
            0.2f64..2.0,
            0.0f64..0.5,
            any::<u64>(),
        ),
        |(f, budget, r, sigma, seed)| {
            let cfg = OracleConfig::new(sigma, budget, seed).unwrap();
            let mut o = OracleSession::new(cfg, &f);
            let params = BinarySearchParams::new(r, DOMAIN, 0.05).unwrap();
            match epochs_schedule(budget, r) {
                Ok((e, t0)) => {
                    let run = locmin::algorithms::sign_test_binary_search(&mut o, &params).unwrap();
                    prop_assert_eq!(run.queries_used, e * t0);
                    prop_assert!(run.queries_used <= budget);
                    prop_assert_eq!(o.remaining_budget(), budget - e * t0);
                }
                Err(_) => {
                    prop_assert!(
                        locmin::algorithms::sign_test_binary_search(&mut o, &params).is_err()
                    );
                    prop_assert_eq!(o.queries_used(), 0);
                }
            }
            let mut o = OracleSession::new(cfg, &f);
            let mut p = SgdParams::new(StepSchedule::InverseSqrtT, DOMAIN);
            p.x0 = StartPoint::UniformRandom;
            let run = sgd(&mut o, &p).unwrap();
            prop_assert_eq!(run.queries_used, budget);
            prop_assert_eq!(o.remaining_budget(), 0);
            prop_assert!(o.query(0.0).is_err());
            prop_assert_eq!(o.queries_used(), budget);
            Ok(())
        },
    )
}

fn small_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        base_spec().prop_filter("re-centrable", |s| {
            !matches!(s, FunctionSpec::PiecewiseLinear { .. })
        }),
        prop::collection::btree_set(1u64..400, 1..4),
        1u64..6,
        0.0f64..0.5,
        any::<u64>(),
        prop::bool::ANY,
    )
        .prop_map(
            |(function, ts, replicates, sigma, master_seed, family)| ExperimentConfig {
                function,
                domain: DOMAIN,
                x_star_uniform: family.then_some(Interval { lo: -1.0, hi: 1.0 }),
                algorithms: vec![
                    AlgorithmSpec::binary_search(0.8),
                    AlgorithmSpec::sgd(StepSchedule::InverseT),
                    AlgorithmSpec::sgd(StepSchedule::InverseSqrtT),
                ],
                t_grid: ts.into_iter().collect(),
                replicates,
                sigma,
                master_seed,
                initial_interval: DOMAIN,
            },
        )
}

/// Risk tables are bitwise identical on 1 and 8 worker threads.
pub fn jobs_determinism(cases: u32) -> Result<(), String> {
    run(cases, small_config(), |cfg| {
        let a = estimate_risk_with_jobs(&cfg, 1).unwrap();
        let b = estimate_risk_with_jobs(&cfg, 8).unwrap();
        prop_assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        for (x, y) in a.rows.iter().zip(&b.rows) {
            prop_assert_eq!(x.mean_err.map(f64::to_bits), y.mean_err.map(f64::to_bits));
        }
        Ok(())
    })
}

/// Re-running an oracle session with the same seed and query points
/// replays every answer bitwise.
pub fn oracle_replay(cases: u32) -> Result<(), String> {
    run(
        cases,
        (
            any_function(),
            prop::collection::vec(in_domain(), 1..50),
            0.0f64..1.0,
            any::<u64>(),
        ),
        |(f, xs, sigma, seed)| {
            let cfg = OracleConfig::new(sigma, xs.len() as u64, seed).unwrap();
            let answers = || {
                let mut o = OracleSession::new(cfg, &f);
                xs.iter()
                    .map(|&x| o.query(x).unwrap().to_bits())
                    .collect::<Vec<_>>()
            };
            prop_assert_eq!(answers(), answers());
            Ok(())
        },
    )
}
