//! One-dimensional convex functions with a deterministic subgradient
//! selection.
//!
//! Every function is defined on all of the real line but lives on an explicit
//! compact [`Interval`] domain; queries outside it are errors. The oracle mean
//! at a point is the min-norm element of the subdifferential there.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` of the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Argument(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Distance from `x` to the nearest point of the interval.
    pub fn distance_to(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }

    /// Infimum distance between two intervals; zero when they intersect.
    pub fn distance(&self, other: &Interval) -> f64 {
        if other.lo > self.hi {
            other.lo - self.hi
        } else if self.lo > other.hi {
            self.lo - other.hi
        } else {
            0.0
        }
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Local polynomial growth `f(x_r + d) = f(x_r) + lambda_r d^k_r` (and the
/// mirror image on the left) around the minimizer set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthProfile {
    k_l: f64,
    k_r: f64,
    lambda_l: f64,
    lambda_r: f64,
}

impl GrowthProfile {
    pub fn new(k_l: f64, k_r: f64, lambda_l: f64, lambda_r: f64) -> Result<Self> {
        if !(k_l > 1.0 && k_r > 1.0) {
            return Err(Error::Argument(format!(
                "growth exponents must exceed 1, got k_l={k_l}, k_r={k_r}"
            )));
        }
        if !(lambda_l > 0.0 && lambda_r > 0.0) {
            return Err(Error::Argument(format!(
                "growth constants must be positive, got lambda_l={lambda_l}, lambda_r={lambda_r}"
            )));
        }
        Ok(Self {
            k_l,
            k_r,
            lambda_l,
            lambda_r,
        })
    }

    pub fn k_l(&self) -> f64 {
        self.k_l
    }

    pub fn k_r(&self) -> f64 {
        self.k_r
    }

    pub fn lambda_l(&self) -> f64 {
        self.lambda_l
    }

    pub fn lambda_r(&self) -> f64 {
        self.lambda_r
    }
}

/// Catalog of test functions, serializable as a tagged table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `(1/k)|x - x_star|^k`.
    #[serde(rename = "sym-power")]
    SymmetricPower {
        k: f64,
        #[serde(default)]
        x_star: f64,
    },
    /// `(1/k_l)|x - x_star|^k_l` left of `x_star`, `(1/k_r)|x - x_star|^k_r` right of it.
    #[serde(rename = "asym-power")]
    AsymmetricPower {
        k_l: f64,
        k_r: f64,
        #[serde(default)]
        x_star: f64,
    },
    /// `base(x) + eps * x`.
    #[serde(rename = "tilt")]
    Tilt { base: Box<FunctionSpec>, eps: f64 },
    /// `|x - x_star|`.
    #[serde(rename = "absolute")]
    Absolute {
        #[serde(default)]
        x_star: f64,
    },
    /// Continuous piecewise-linear function; `slopes[0]` applies left of
    /// `breakpoints[0]`, `slopes[i + 1]` right of `breakpoints[i]`.
    #[serde(rename = "piecewise-linear")]
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
    },
}

impl FunctionSpec {
    pub fn tilt(self, eps: f64) -> FunctionSpec {
        FunctionSpec::Tilt {
            base: Box::new(self),
            eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Argument(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            FunctionSpec::SymmetricPower { k, x_star } => {
                finite("x_star", *x_star)?;
                if !(*k > 1.0 && k.is_finite()) {
                    return Err(Error::Argument(format!(
                        "power exponent must exceed 1, got {k}"
                    )));
                }
            }
            FunctionSpec::AsymmetricPower { k_l, k_r, x_star } => {
                finite("x_star", *x_star)?;
                for k in [k_l, k_r] {
                    if !(*k > 1.0 && k.is_finite()) {
                        return Err(Error::Argument(format!(
                            "power exponent must exceed 1, got {k}"
                        )));
                    }
                }
            }
            FunctionSpec::Tilt { base, eps } => {
                finite("eps", *eps)?;
                base.validate()?;
            }
            FunctionSpec::Absolute { x_star } => finite("x_star", *x_star)?,
            FunctionSpec::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                if slopes.len() != breakpoints.len() + 1 {
                    return Err(Error::Argument(format!(
                        "piecewise-linear needs one more slope than breakpoints, got {} and {}",
                        slopes.len(),
                        breakpoints.len()
                    )));
                }
                for v in breakpoints.iter().chain(slopes) {
                    finite("piecewise-linear parameter", *v)?;
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Argument(
                        "piecewise-linear breakpoints must be strictly increasing".into(),
                    ));
                }
                if slopes.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::Argument(
                        "piecewise-linear slopes must be nondecreasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The same function re-centred at `x_star`. Piecewise-linear functions
    /// have no reference point and cannot be re-centred.
    pub fn with_x_star(&self, x: f64) -> Result<FunctionSpec> {
        Ok(match self {
            FunctionSpec::SymmetricPower { k, .. } => {
                FunctionSpec::SymmetricPower { k: *k, x_star: x }
            }
            FunctionSpec::AsymmetricPower { k_l, k_r, .. } => FunctionSpec::AsymmetricPower {
                k_l: *k_l,
                k_r: *k_r,
                x_star: x,
            },
            FunctionSpec::Absolute { .. } => FunctionSpec::Absolute { x_star: x },
            FunctionSpec::Tilt { base, eps } => FunctionSpec::Tilt {
                base: Box::new(base.with_x_star(x)?),
                eps: *eps,
            },
            FunctionSpec::PiecewiseLinear { .. } => {
                return Err(Error::Unsupported(
                    "piecewise-linear functions have no x_star to randomize".into(),
                ))
            }
        })
    }

    /// Exponent governing the modulus near the optimum (`k_l ∨ k_r`), when the
    /// function is an untilted power.
    pub fn flatness_exponent(&self) -> Option<f64> {
        match self {
            FunctionSpec::SymmetricPower { k, .. } => Some(*k),
            FunctionSpec::AsymmetricPower { k_l, k_r, .. } => Some(k_l.max(*k_r)),
            _ => None,
        }
    }

    /// Short identifier without the location parameter; contains no commas.
    pub fn label(&self) -> String {
        match self {
            FunctionSpec::SymmetricPower { k, .. } => format!("sym-power(k={k})"),
            FunctionSpec::AsymmetricPower { k_l, k_r, .. } => {
                format!("asym-power(kl={k_l} kr={k_r})")
            }
            FunctionSpec::Tilt { base, eps } => format!("tilt({} eps={eps})", base.label()),
            FunctionSpec::Absolute { .. } => "absolute".to_string(),
            FunctionSpec::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
                format!("pwl(b=[{}] s=[{}])", join(breakpoints), join(slopes))
            }
        }
    }
}

/// `|base|^e` with exact fast paths for the common exponents.
#[inline]
pub(crate) fn pow_abs(base: f64, e: f64) -> f64 {
    let b = base.abs();
    if e == 1.0 {
        b
    } else if e == 2.0 {
        b * b
    } else if e == 0.5 {
        b.sqrt()
    } else {
        b.powf(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Base {
    Power {
        k_l: f64,
        k_r: f64,
        x_star: f64,
    },
    Absolute {
        x_star: f64,
    },
    Linear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Base {
    fn from_spec(spec: &FunctionSpec) -> (Base, f64) {
        match spec {
            FunctionSpec::SymmetricPower { k, x_star } => (
                Base::Power {
                    k_l: *k,
                    k_r: *k,
                    x_star: *x_star,
                },
                0.0,
            ),
            FunctionSpec::AsymmetricPower { k_l, k_r, x_star } => (
                Base::Power {
                    k_l: *k_l,
                    k_r: *k_r,
                    x_star: *x_star,
                },
                0.0,
            ),
            FunctionSpec::Absolute { x_star } => (Base::Absolute { x_star: *x_star }, 0.0),
            FunctionSpec::Tilt { base, eps } => {
                let (b, t) = Base::from_spec(base);
                (b, t + eps)
            }
            FunctionSpec::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                let mut values = Vec::with_capacity(breakpoints.len());
                let mut acc = 0.0;
                for (j, b) in breakpoints.iter().enumerate() {
                    if j > 0 {
                        acc += slopes[j] * (b - breakpoints[j - 1]);
                    }
                    values.push(acc);
                }
                (
                    Base::Linear {
                        breakpoints: breakpoints.clone(),
                        slopes: slopes.clone(),
                        values,
                    },
                    0.0,
                )
            }
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            Base::Power { k_l, k_r, x_star } => {
                let u = x - x_star;
                if u < 0.0 {
                    pow_abs(u, *k_l) / k_l
                } else {
                    pow_abs(u, *k_r) / k_r
                }
            }
            Base::Absolute { x_star } => (x - x_star).abs(),
            Base::Linear {
                breakpoints,
                slopes,
                values,
            } => {
                if breakpoints.is_empty() {
                    return slopes[0] * x;
                }
                let j = breakpoints.partition_point(|b| *b <= x);
                if j == 0 {
                    slopes[0] * (x - breakpoints[0])
                } else {
                    values[j - 1] + slopes[j] * (x - breakpoints[j - 1])
                }
            }
        }
    }

    /// Subdifferential `[left derivative, right derivative]`.
    fn subdifferential(&self, x: f64) -> (f64, f64) {
        match self {
            Base::Power { k_l, k_r, x_star } => {
                let u = x - x_star;
                let s = if u < 0.0 {
                    -pow_abs(u, k_l - 1.0)
                } else if u > 0.0 {
                    pow_abs(u, k_r - 1.0)
                } else {
                    0.0
                };
                (s, s)
            }
            Base::Absolute { x_star } => {
                if x < *x_star {
                    (-1.0, -1.0)
                } else if x > *x_star {
                    (1.0, 1.0)
                } else {
                    (-1.0, 1.0)
                }
            }
            Base::Linear {
                breakpoints,
                slopes,
                ..
            } => {
                let j = breakpoints.partition_point(|b| *b < x);
                if j < breakpoints.len() && breakpoints[j] == x {
                    (slopes[j], slopes[j + 1])
                } else {
                    (slopes[j], slopes[j])
                }
            }
        }
    }

    /// Minimizer set of `base + tilt * x` over the whole real line, as an
    /// extended interval. `(-inf, -inf)` means the function decreases without
    /// bound to the left.
    fn unconstrained_argmin(&self, tilt: f64) -> (f64, f64) {
        const NEG: f64 = f64::NEG_INFINITY;
        const POS: f64 = f64::INFINITY;
        match self {
            Base::Power { k_l, k_r, x_star } => {
                let u = if tilt > 0.0 {
                    -pow_abs(tilt, 1.0 / (k_l - 1.0))
                } else if tilt < 0.0 {
                    pow_abs(tilt, 1.0 / (k_r - 1.0))
                } else {
                    0.0
                };
                (x_star + u, x_star + u)
            }
            Base::Absolute { x_star } => {
                if tilt > 1.0 {
                    (NEG, NEG)
                } else if tilt == 1.0 {
                    (NEG, *x_star)
                } else if tilt > -1.0 {
                    (*x_star, *x_star)
                } else if tilt == -1.0 {
                    (*x_star, POS)
                } else {
                    (POS, POS)
                }
            }
            Base::Linear {
                breakpoints,
                slopes,
                ..
            } => {
                let shifted: Vec<f64> = slopes.iter().map(|s| s + tilt).collect();
                // Segment i spans (breakpoints[i-1], breakpoints[i]).
                let seg_lo = |i: usize| if i == 0 { NEG } else { breakpoints[i - 1] };
                let seg_hi = |i: usize| {
                    if i == breakpoints.len() {
                        POS
                    } else {
                        breakpoints[i]
                    }
                };
                if let Some(i) = shifted.iter().position(|s| *s == 0.0) {
                    let last = shifted.iter().rposition(|s| *s == 0.0).unwrap_or(i);
                    return (seg_lo(i), seg_hi(last));
                }
                let first_pos = shifted.partition_point(|s| *s < 0.0);
                if first_pos == 0 {
                    (NEG, NEG)
                } else if first_pos == shifted.len() {
                    (POS, POS)
                } else {
                    let b = breakpoints[first_pos - 1];
                    (b, b)
                }
            }
        }
    }

    fn special_points(&self) -> Vec<f64> {
        match self {
            Base::Power { x_star, .. } | Base::Absolute { x_star } => vec![*x_star],
            Base::Linear { breakpoints, .. } => breakpoints.clone(),
        }
    }
}

/// A convex function bound to a compact domain.
///
/// Immutable after construction; `Send + Sync`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFunction1D {
    spec: FunctionSpec,
    domain: Interval,
    base: Base,
    tilt: f64,
    minimizer_set: Interval,
}

impl ConvexFunction1D {
    pub fn new(spec: FunctionSpec, domain: Interval) -> Result<Self> {
        spec.validate()?;
        if !(domain.lo.is_finite() && domain.hi.is_finite() && domain.lo < domain.hi) {
            return Err(Error::Argument(format!(
                "domain must be a nondegenerate compact interval, got {domain}"
            )));
        }
        let (base, tilt) = Base::from_spec(&spec);
        let (lo, hi) = base.unconstrained_argmin(tilt);
        let minimizer_set = if hi < domain.lo {
            Interval::point(domain.lo)
        } else if lo > domain.hi {
            Interval::point(domain.hi)
        } else {
            Interval {
                lo: lo.max(domain.lo),
                hi: hi.min(domain.hi),
            }
        };
        Ok(Self {
            spec,
            domain,
            base,
            tilt,
            minimizer_set,
        })
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    fn check(&self, x: f64) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            })
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.base.eval(x) + self.tilt * x)
    }

    pub fn subdifferential(&self, x: f64) -> Result<Interval> {
        self.check(x)?;
        let (lo, hi) = self.base.subdifferential(x);
        Ok(Interval {
            lo: lo + self.tilt,
            hi: hi + self.tilt,
        })
    }

    /// Min-norm subgradient, the deterministic oracle mean.
    pub fn subgradient(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.subgradient_unchecked(x))
    }

    #[inline]
    pub(crate) fn subgradient_unchecked(&self, x: f64) -> f64 {
        let (lo, hi) = self.base.subdifferential(x);
        if lo == hi {
            lo + self.tilt
        } else {
            0.0f64.clamp(lo + self.tilt, hi + self.tilt)
        }
    }

    pub fn minimizer_set(&self) -> Interval {
        self.minimizer_set
    }

    /// Growth profile of untilted powers: `lambda = 1/k` on each side.
    pub fn growth(&self) -> Option<GrowthProfile> {
        match (&self.base, self.tilt) {
            (Base::Power { k_l, k_r, .. }, 0.0) => {
                GrowthProfile::new(*k_l, *k_r, 1.0 / k_l, 1.0 / k_r).ok()
            }
            _ => None,
        }
    }

    /// Kinks and other points where the subgradient changes abruptly,
    /// restricted to the domain.
    pub fn special_points(&self) -> Vec<f64> {
        self.base
            .special_points()
            .into_iter()
            .filter(|x| self.domain.contains(*x))
            .collect()
    }

    /// Range `[f'(a), f'(b)]` of min-norm slopes over the domain.
    pub fn slope_range(&self) -> Interval {
        Interval {
            lo: self.subgradient_unchecked(self.domain.lo),
            hi: self.subgradient_unchecked(self.domain.hi),
        }
    }

    /// `self + eps * x` on the same domain.
    pub fn tilted(&self, eps: f64) -> Result<ConvexFunction1D> {
        ConvexFunction1D::new(self.spec.clone().tilt(eps), self.domain)
    }

    /// Whether two functions differ only by a linear tilt, returning the
    /// tilt difference `g - f` if so.
    pub(crate) fn tilt_offset(&self, other: &ConvexFunction1D) -> Option<f64> {
        (self.base == other.base).then_some(other.tilt - self.tilt)
    }
}

/// Min-norm element of `∂f(x)`.
pub fn min_norm_subgradient(f: &ConvexFunction1D, x: f64) -> Result<f64> {
    f.subgradient(x)
}

/// Distance from `x` to the minimizer set of `f`.
pub fn err(x: f64, f: &ConvexFunction1D) -> f64 {
    f.minimizer_set().distance_to(x)
}

fn check_same_domain(f: &ConvexFunction1D, g: &ConvexFunction1D) -> Result<()> {
    if f.domain() == g.domain() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "functions live on different domains {} and {}",
            f.domain(),
            g.domain()
        )))
    }
}

/// Distance between the minimizer sets of `f` and `g`.
pub fn pair_distance_d(f: &ConvexFunction1D, g: &ConvexFunction1D) -> Result<f64> {
    check_same_domain(f, g)?;
    Ok(f.minimizer_set().distance(&g.minimizer_set()))
}

/// Sampling plan for the generic `kappa` supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaGrid {
    pub points: usize,
    /// Relative offset used to probe either side of each special point.
    pub probe: f64,
}

impl Default for KappaGrid {
    fn default() -> Self {
        Self {
            points: 100_000,
            probe: 1e-9,
        }
    }
}

/// `sup_x |f'(x) - g'(x)|` over the domain.
///
/// Exact when `g` is a tilt of `f` (or vice versa). Otherwise a supremum over
/// a uniform grid plus both sides of every special point of either function,
/// which is a lower bound on the true supremum.
pub fn pair_dissimilarity_kappa(
    f: &ConvexFunction1D,
    g: &ConvexFunction1D,
    grid: KappaGrid,
) -> Result<f64> {
    check_same_domain(f, g)?;
    if let Some(dt) = f.tilt_offset(g) {
        return Ok(dt.abs());
    }
    if grid.points < 2 {
        return Err(Error::Argument("kappa grid needs at least 2 points".into()));
    }
    let dom = f.domain();
    let gap = |x: f64| (f.subgradient_unchecked(x) - g.subgradient_unchecked(x)).abs();
    let n = grid.points;
    let mut sup = (0..n)
        .map(|i| dom.lo + dom.width() * (i as f64) / ((n - 1) as f64))
        .map(gap)
        .fold(0.0, f64::max);
    for c in f.special_points().into_iter().chain(g.special_points()) {
        let h = grid.probe * c.abs().max(1.0);
        for x in [c - h, c, c + h] {
            sup = sup.max(gap(dom.clamp(x)));
        }
    }
    Ok(sup)
}
