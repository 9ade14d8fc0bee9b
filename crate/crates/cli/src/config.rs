//! TOML experiment files.
//!
//! ```toml
//! [function]
//! kind = "sym-power"
//! k = 2.0
//! domain = [-2.0, 2.0]                          # optional
//! x_star_distribution = { uniform = [-1.0, 1.0] } # optional
//!
//! [oracle]
//! sigma = 0.1
//! master_seed = 7
//!
//! [[algorithms]]
//! name = "binary-search"
//! r = 0.5
//!
//! [grid]
//! T = [100, 1000, 10000]    # or: range = [100, 10000] and count = 7
//!
//! [run]
//! replicates = 1000
//! output_dir = "out"        # optional
//! initial_interval = [-2.0, 2.0]  # optional, defaults to the domain
//! ```

use std::path::PathBuf;

use anyhow::{bail, Context};
use locmin::algorithms::AlgorithmSpec;
use locmin::experiments::{default_t_grid, ExperimentConfig};
use locmin::{FunctionSpec, Interval};
use serde::{Deserialize, Serialize};

const DEFAULT_DOMAIN: Interval = Interval { lo: -2.0, hi: 2.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum XStarDistribution {
    Uniform(Interval),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star_distribution: Option<XStarDistribution>,
    #[serde(flatten)]
    pub spec: FunctionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub sigma: f64,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[u64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_interval: Option<Interval>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            replicates: default_replicates(),
            output_dir: None,
            initial_interval: None,
        }
    }
}

fn default_replicates() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub function: FunctionSection,
    pub oracle: OracleSection,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
}

/// `count` log-spaced budgets from `lo` to `hi`, rounded down.
pub fn log_spaced_budgets(lo: u64, hi: u64, count: usize) -> anyhow::Result<Vec<u64>> {
    if lo == 0 || hi < lo || count == 0 {
        bail!("grid range must satisfy 1 <= lo <= hi with count >= 1");
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = ((lo as f64).log10(), (hi as f64).log10());
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                (10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64) + 1e-9).floor() as u64
            }
        })
        .collect())
}

impl ConfigFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        // toml's messages carry the line and column of the offending key.
        toml::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        toml::to_string(self).context("serializing config")
    }

    pub fn t_grid(&self) -> anyhow::Result<Vec<u64>> {
        match (&self.grid.t, self.grid.range, self.grid.count) {
            (Some(t), None, None) => Ok(t.clone()),
            (None, Some([lo, hi]), Some(n)) => log_spaced_budgets(lo, hi, n),
            (None, Some([lo, hi]), None) => log_spaced_budgets(lo, hi, 7),
            (None, None, None) => Ok(default_t_grid()),
            _ => bail!("[grid] takes either `T = [...]` or `range` with optional `count`"),
        }
    }

    pub fn to_experiment(&self) -> anyhow::Result<ExperimentConfig> {
        let domain = self.function.domain.unwrap_or(DEFAULT_DOMAIN);
        let cfg = ExperimentConfig {
            function: self.function.spec.clone(),
            domain,
            x_star_uniform: self
                .function
                .x_star_distribution
                .map(|XStarDistribution::Uniform(i)| i),
            algorithms: self.algorithms.clone(),
            t_grid: self.t_grid()?,
            replicates: self.run.replicates,
            sigma: self.oracle.sigma,
            master_seed: self.oracle.master_seed,
            initial_interval: self.run.initial_interval.unwrap_or(domain),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_experiment(cfg: &ExperimentConfig, output_dir: Option<PathBuf>) -> Self {
        ConfigFile {
            function: FunctionSection {
                domain: Some(cfg.domain),
                x_star_distribution: cfg.x_star_uniform.map(XStarDistribution::Uniform),
                spec: cfg.function.clone(),
            },
            oracle: OracleSection {
                sigma: cfg.sigma,
                master_seed: cfg.master_seed,
            },
            algorithms: cfg.algorithms.clone(),
            grid: GridSection {
                t: Some(cfg.t_grid.clone()),
                range: None,
                count: None,
            },
            run: RunSection {
                replicates: cfg.replicates,
                output_dir,
                initial_interval: Some(cfg.initial_interval),
            },
        }
    }
}
