//! Computational modulus of continuity.
//!
//! In one dimension the modulus reduces to the flat set
//! `{y : |f'(y)| < eps}`: `omega_f(eps)` is the larger distance from the
//! minimizer set to the closure of that set. The numeric routines below
//! locate flat-set endpoints and conjugate subdifferentials by monotone
//! bisection on the min-norm subgradient, so they are 1-D only.

use serde::{Deserialize, Serialize};

use crate::convex_fn::{ConvexFunction1D, FunctionSpec, GrowthProfile, Interval};
use crate::error::{Error, Result};
use crate::stats::ols;

/// Default bisection tolerance in x-units.
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 256;

/// Smallest `x` in `[lo, hi]` with `pred(x)` for a predicate that is monotone
/// false-then-true. `None` when `pred(hi)` is false.
fn first_true(lo: f64, hi: f64, tol: f64, pred: impl Fn(f64) -> bool) -> Option<f64> {
    if pred(lo) {
        return Some(lo);
    }
    if !pred(hi) {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTIONS {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if pred(m) {
            b = m;
        } else {
            a = m;
        }
    }
    Some(b)
}

/// Largest `x` in `[lo, hi]` with `pred(x)` for a predicate that is monotone
/// true-then-false. `None` when `pred(lo)` is false.
fn last_true(lo: f64, hi: f64, tol: f64, pred: impl Fn(f64) -> bool) -> Option<f64> {
    if pred(hi) {
        return Some(hi);
    }
    if !pred(lo) {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTIONS {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if pred(m) {
            a = m;
        } else {
            b = m;
        }
    }
    Some(a)
}

/// Join two bisected endpoints, collapsing a crossing within `tol`.
fn join(lo: f64, hi: f64) -> Interval {
    if lo <= hi {
        Interval { lo, hi }
    } else {
        Interval::point(0.5 * (lo + hi))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

/// Closure of the flat set `{y ∈ domain : |f'(y)| < threshold}`, or `None`
/// when it is empty.
pub fn flat_set(f: &ConvexFunction1D, threshold: f64, tol: f64) -> Result<Option<Interval>> {
    check_tol(tol)?;
    if !(threshold > 0.0) {
        return Err(Error::Argument(format!(
            "flat-set threshold must be positive, got {threshold}"
        )));
    }
    let d = f.domain();
    let g = |y: f64| f.subgradient_unchecked(y);
    let left = first_true(d.lo, d.hi, tol, |y| g(y) > -threshold);
    let right = last_true(d.lo, d.hi, tol, |y| g(y) < threshold);
    Ok(match (left, right) {
        (Some(l), Some(r)) if l <= r + 2.0 * tol => Some(join(l, r)),
        _ => None,
    })
}

/// `omega_f(eps)` from the flat-set characterization, capped at the domain.
pub fn modulus_numeric(f: &ConvexFunction1D, epsilon: f64, tol: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let Some(flat) = flat_set(f, epsilon, tol)? else {
        return Ok(0.0);
    };
    let m = f.minimizer_set();
    Ok((m.lo - flat.lo).max(flat.hi - m.hi).max(0.0))
}

/// Closed-form modulus of an untilted power function.
///
/// Each side contributes `eps^(1/(k_side - 1))`, capped at that side's
/// distance to the domain boundary; for `eps < 1` away from the boundary
/// this is `eps^(1/(k_l ∨ k_r - 1))`.
pub fn modulus_analytic(f: &ConvexFunction1D, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let (k_l, k_r, x_star) = match *f.spec() {
        FunctionSpec::SymmetricPower { k, x_star } => (k, k, x_star),
        FunctionSpec::AsymmetricPower { k_l, k_r, x_star } => (k_l, k_r, x_star),
        ref other => {
            return Err(Error::Unsupported(format!(
                "no closed-form modulus for {}",
                other.label()
            )))
        }
    };
    let d = f.domain();
    if !(d.lo < x_star && x_star < d.hi) {
        return Err(Error::Unsupported(format!(
            "closed-form modulus needs x_star={x_star} inside the domain {d}"
        )));
    }
    let left = epsilon.powf(1.0 / (k_l - 1.0)).min(x_star - d.lo);
    let right = epsilon.powf(1.0 / (k_r - 1.0)).min(d.hi - x_star);
    Ok(left.max(right))
}

/// `∂f*(s) = {x : s ∈ ∂f(x)}` by bisection on `f' - s`.
pub fn conjugate_subdifferential(f: &ConvexFunction1D, s: f64, tol: f64) -> Result<Interval> {
    check_tol(tol)?;
    let range = f.slope_range();
    if !range.contains(s) {
        return Err(Error::Range {
            s,
            lo: range.lo,
            hi: range.hi,
        });
    }
    let d = f.domain();
    let g = |x: f64| f.subgradient_unchecked(x);
    let lo = first_true(d.lo, d.hi, tol, |x| g(x) >= s).unwrap_or(d.hi);
    let hi = last_true(d.lo, d.hi, tol, |x| g(x) <= s).unwrap_or(d.lo);
    Ok(join(lo, hi))
}

/// `H(eps) = dist(∂f*(eps), ∂f*(0)) ∨ dist(∂f*(-eps), ∂f*(0))`.
pub fn big_h(f: &ConvexFunction1D, epsilon: f64, tol: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let zero = conjugate_subdifferential(f, 0.0, tol)?;
    let plus = conjugate_subdifferential(f, epsilon, tol)?;
    let minus = conjugate_subdifferential(f, -epsilon, tol)?;
    Ok(plus.distance(&zero).max(minus.distance(&zero)))
}

/// Sandwich `((eps/(C lambda k))^(1/(k-1)), (C eps/lambda)^(1/(k-1)))` with
/// `k = k_l ∨ k_r` and `lambda` taken from the flatter side (the larger one
/// on ties).
pub fn modulus_bounds_from_growth(
    profile: &GrowthProfile,
    epsilon: f64,
    c: f64,
) -> Result<(f64, f64)> {
    if !(c > 1.0 && c.is_finite()) {
        return Err(Error::Argument(format!("C must exceed 1, got {c}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let (k_l, k_r) = (profile.k_l(), profile.k_r());
    let k = k_l.max(k_r);
    let lambda = if k_l > k_r {
        profile.lambda_l()
    } else if k_r > k_l {
        profile.lambda_r()
    } else {
        profile.lambda_l().max(profile.lambda_r())
    };
    let e = 1.0 / (k - 1.0);
    Ok((
        (epsilon / (c * lambda * k)).powf(e),
        (c * epsilon / lambda).powf(e),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulusMethod {
    Analytic,
    Numeric,
}

impl ModulusMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModulusMethod::Analytic => "analytic",
            ModulusMethod::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusSample {
    pub epsilon: f64,
    pub omega: f64,
    pub method: ModulusMethod,
}

/// Sampled modulus values, optionally with a fitted growth exponent and the
/// epsilon range the fit used. The range is descriptive; it does not certify
/// where polynomial growth holds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModulusCurve {
    pub samples: Vec<ModulusSample>,
    pub fitted_alpha: Option<f64>,
    pub fit_range: Option<(f64, f64)>,
}

impl ModulusCurve {
    pub fn numeric(f: &ConvexFunction1D, epsilons: &[f64], tol: f64) -> Result<Self> {
        let samples = epsilons
            .iter()
            .map(|&epsilon| {
                Ok(ModulusSample {
                    epsilon,
                    omega: modulus_numeric(f, epsilon, tol)?,
                    method: ModulusMethod::Numeric,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            ..Self::default()
        })
    }

    pub fn analytic(f: &ConvexFunction1D, epsilons: &[f64]) -> Result<Self> {
        let samples = epsilons
            .iter()
            .map(|&epsilon| {
                Ok(ModulusSample {
                    epsilon,
                    omega: modulus_analytic(f, epsilon)?,
                    method: ModulusMethod::Analytic,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            ..Self::default()
        })
    }

    /// Fit the growth exponent and record it on the curve.
    pub fn fit(mut self) -> Result<Self> {
        let alpha = fit_growth_exponent(&self)?;
        let usable = self.usable();
        let lo = usable
            .iter()
            .map(|s| s.epsilon)
            .fold(f64::INFINITY, f64::min);
        let hi = usable
            .iter()
            .map(|s| s.epsilon)
            .fold(f64::NEG_INFINITY, f64::max);
        self.fitted_alpha = Some(alpha);
        self.fit_range = Some((lo, hi));
        Ok(self)
    }

    fn usable(&self) -> Vec<ModulusSample> {
        self.samples
            .iter()
            .copied()
            .filter(|s| s.epsilon > 0.0 && s.omega > 0.0)
            .collect()
    }

    /// Omega is nondecreasing when samples are sorted by epsilon.
    pub fn is_monotone(&self) -> bool {
        let mut s = self.samples.clone();
        s.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
        s.windows(2).all(|w| w[0].omega <= w[1].omega)
    }
}

/// Least-squares slope of `ln omega` on `ln eps`.
pub fn fit_growth_exponent(curve: &ModulusCurve) -> Result<f64> {
    let usable = curve.usable();
    if usable.len() < 3 {
        return Err(Error::Data(format!(
            "growth fit needs at least 3 samples with positive omega, got {}",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|s| s.epsilon.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|s| s.omega.ln()).collect();
    Ok(ols(&xs, &ys)?.slope)
}
