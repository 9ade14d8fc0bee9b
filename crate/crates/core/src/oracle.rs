//! Budgeted stochastic first-order oracle.
//!
//! A query at `x` returns `f'(x) + sigma * z` with `f'` the min-norm
//! subgradient and `z` a standard normal draw. The noise stream is a ChaCha8
//! generator keyed by the session seed, so identical seeds and query
//! sequences replay bitwise. A second, independent stream is available to
//! algorithms that need their own randomness (e.g. a random start).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::convex_fn::ConvexFunction1D;
use crate::error::{Error, Result};

const NOISE_STREAM: u64 = 0;
const ALGORITHM_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    sigma: f64,
    budget: u64,
    master_seed: u64,
}

impl OracleConfig {
    pub fn new(sigma: f64, budget: u64, master_seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Argument(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        if budget == 0 {
            return Err(Error::Argument("oracle budget must be at least 1".into()));
        }
        Ok(Self {
            sigma,
            budget,
            master_seed,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }
}

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed as a pure function of a master seed and a path of
/// indices, e.g. `(cell, replicate)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(master), |acc, &p| mix64(acc ^ mix64(p)))
}

/// One oracle bound to one function. Single-owner.
#[derive(Debug, Clone)]
pub struct OracleSession<'f> {
    config: OracleConfig,
    function: &'f ConvexFunction1D,
    queries_used: u64,
    noise: ChaCha8Rng,
    algorithm_rng: ChaCha8Rng,
}

impl<'f> OracleSession<'f> {
    pub fn new(config: OracleConfig, function: &'f ConvexFunction1D) -> Self {
        let mut noise = ChaCha8Rng::seed_from_u64(config.master_seed);
        noise.set_stream(NOISE_STREAM);
        let mut algorithm_rng = ChaCha8Rng::seed_from_u64(config.master_seed);
        algorithm_rng.set_stream(ALGORITHM_STREAM);
        Self {
            config,
            function,
            queries_used: 0,
            noise,
            algorithm_rng,
        }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn function(&self) -> &'f ConvexFunction1D {
        self.function
    }

    pub fn queries_used(&self) -> u64 {
        self.queries_used
    }

    pub fn remaining_budget(&self) -> u64 {
        self.config.budget - self.queries_used
    }

    /// Randomness for the algorithm itself, independent of the noise stream.
    pub fn algorithm_rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.algorithm_rng
    }

    fn check_point(&self, x: f64) -> Result<()> {
        let d = self.function.domain();
        if d.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                x,
                lo: d.lo,
                hi: d.hi,
            })
        }
    }

    /// One noisy subgradient at `x`.
    pub fn query(&mut self, x: f64) -> Result<f64> {
        if self.queries_used >= self.config.budget {
            return Err(Error::Budget {
                budget: self.config.budget,
            });
        }
        self.check_point(x)?;
        self.queries_used += 1;
        let z: f64 = self.noise.sample(StandardNormal);
        Ok(self.function.subgradient_unchecked(x) + self.config.sigma * z)
    }

    /// Average of `n` consecutive queries at `x`.
    ///
    /// Bitwise identical to summing `n` calls to [`query`](Self::query) in
    /// order and dividing by `n`. Fails without consuming budget if fewer
    /// than `n` queries remain.
    pub fn query_mean(&mut self, x: f64, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Argument("query_mean needs n >= 1".into()));
        }
        if self.remaining_budget() < n {
            return Err(Error::Budget {
                budget: self.config.budget,
            });
        }
        self.check_point(x)?;
        let mean = self.function.subgradient_unchecked(x);
        let sigma = self.config.sigma;
        let mut sum = 0.0;
        for _ in 0..n {
            let z: f64 = self.noise.sample(StandardNormal);
            sum += mean + sigma * z;
        }
        self.queries_used += n;
        Ok(sum / n as f64)
    }
}
