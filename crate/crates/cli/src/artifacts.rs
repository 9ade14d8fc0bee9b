//! Output files of an experiment run: risk and slope tables, reference
//! bands, a gnuplot script and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use locmin::experiments::{
    estimate_risk, fit_all_slopes, reference_bands, reference_slope, slopes_to_csv,
    ExperimentConfig, RiskTable, SlopeRow,
};
use locmin::modulus::{ModulusCurve, DEFAULT_TOL};
use locmin::stats::log_grid;
use locmin::ConvexFunction1D;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingCell {
    pub algorithm: String,
    #[serde(rename = "T")]
    pub t: u64,
    pub error: String,
}

/// Run record. `config` is the exact experiment that produced the files;
/// feeding the manifest back to `locmin run` reproduces them byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub config_sha256: String,
    pub config: serde_json::Value,
    /// File name to sha256 of its contents.
    pub files: BTreeMap<String, String>,
    #[serde(default)]
    pub missing_cells: Vec<MissingCell>,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results: Option<serde_json::Value>,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, master_seed: u64, config: &C) -> anyhow::Result<Self> {
        let config = serde_json::to_value(config)?;
        let canonical = serde_json::to_string(&config)?;
        Ok(Self {
            tool: "locmin".into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            master_seed,
            config_sha256: sha256_hex(canonical.as_bytes()),
            config,
            files: BTreeMap::new(),
            missing_cells: Vec::new(),
            complete: true,
            results: None,
        })
    }

    pub fn experiment(&self) -> anyhow::Result<ExperimentConfig> {
        serde_json::from_value(self.config.clone())
            .context("manifest does not hold an experiment config")
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_file(dir, "manifest.json", &text)
    }
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Reference function for the modulus bands: the family member centred in
/// its x* distribution.
fn reference_function(cfg: &ExperimentConfig) -> anyhow::Result<ConvexFunction1D> {
    let spec = match cfg.x_star_uniform {
        Some(u) => cfg.function.with_x_star(u.midpoint())?,
        None => cfg.function.clone(),
    };
    Ok(ConvexFunction1D::new(spec, cfg.domain)?)
}

/// `T,omega,lower_band,upper_band,alpha` rows; header only when the bands are
/// undefined (no noise, or no usable growth exponent).
pub fn bands_csv(cfg: &ExperimentConfig) -> anyhow::Result<String> {
    let mut out = String::from("T,omega,lower_band,upper_band,alpha\n");
    if cfg.sigma <= 0.0 {
        return Ok(out);
    }
    let f = reference_function(cfg)?;
    let alpha = match cfg.function.flatness_exponent() {
        Some(k) => Some(1.0 / (k - 1.0)),
        None => ModulusCurve::numeric(&f, &log_grid(1e-6, 1e-3, 20)?, DEFAULT_TOL)?
            .fit()
            .ok()
            .and_then(|c| c.fitted_alpha)
            .filter(|a| *a > 0.0),
    };
    let Some(alpha) = alpha else {
        return Ok(out);
    };
    for &t in &cfg.t_grid {
        let b = reference_bands(&f, t, cfg.sigma, alpha)?;
        writeln!(out, "{},{},{},{},{}", t, b.omega, b.lower, b.upper, alpha)?;
    }
    Ok(out)
}

/// gnuplot script drawing every algorithm's risk curve from `risk.csv` on
/// log-log axes, plus a dashed guide with the optimal slope when known.
pub fn plot_script(cfg: &ExperimentConfig, table: &RiskTable) -> String {
    let mut s = String::new();
    let title = cfg.function_id();
    s.push_str("# Render with: gnuplot plot.gp\n");
    s.push_str("set datafile separator \",\"\n");
    s.push_str("set terminal pngcairo size 900,650\n");
    s.push_str("set output \"risk.png\"\n");
    s.push_str("set logscale xy\n");
    s.push_str("set xlabel \"T\"\n");
    s.push_str("set ylabel \"mean |x - x*|\"\n");
    let _ = writeln!(s, "set title \"{title}\"");
    s.push_str("set key outside right\n");
    let mut series: Vec<String> = cfg
        .algorithms
        .iter()
        .map(|a| {
            format!(
                "\"risk.csv\" every ::1 using 3:(strcol(2) eq \"{id}\" ? $4 : NaN) with linespoints title \"{id}\"",
                id = a.id()
            )
        })
        .collect();
    if let Some(slope) = reference_slope(&cfg.function) {
        let anchor = table
            .rows
            .iter()
            .find_map(|r| r.mean_err.filter(|m| *m > 0.0).map(|m| (r.t, m)));
        if let Some((t, m)) = anchor {
            let c = m * (t as f64).powf(-slope);
            series.push(format!(
                "{c} * x**({slope}) with lines dashtype 2 lc rgb \"gray\" title \"slope {slope}\""
            ));
        }
    }
    s.push_str("plot ");
    s.push_str(&series.join(", \\\n     "));
    s.push('\n');
    s
}

pub struct RunOutcome {
    pub table: RiskTable,
    pub slopes: Vec<SlopeRow>,
    pub manifest: Manifest,
}

/// Run `cfg` and write all artifacts into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> anyhow::Result<RunOutcome> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let table = estimate_risk(cfg)?;
    let slopes = fit_all_slopes(&table, reference_slope(&cfg.function));
    let files = [
        ("risk.csv", table.to_csv()?),
        ("slopes.csv", slopes_to_csv(&slopes)?),
        ("bands.csv", bands_csv(cfg)?),
        ("plot.gp", plot_script(cfg, &table)),
    ];
    let mut manifest = Manifest::new("run", cfg.master_seed, cfg)?;
    for (name, text) in &files {
        write_file(dir, name, text)?;
        manifest
            .files
            .insert(name.to_string(), sha256_hex(text.as_bytes()));
    }
    manifest.missing_cells = table
        .missing()
        .map(|r| MissingCell {
            algorithm: r.algorithm.clone(),
            t: r.t,
            error: r.error.clone().unwrap_or_default(),
        })
        .collect();
    manifest.complete = manifest.missing_cells.is_empty();
    manifest.write(dir)?;
    Ok(RunOutcome {
        table,
        slopes,
        manifest,
    })
}
