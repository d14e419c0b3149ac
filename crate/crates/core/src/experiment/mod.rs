//! Config-driven experiments: length-parameter scans, locality reports and
//! correlation data, all written as CSV + JSON.
//!
//! A config is a JSON document:
//!
//! ```json
//! {
//!   "data": { "synthetic": { "dimension": 3, "n_points": 2000 } },
//!   "n_centers": 200,
//!   "m_ratio": 1.4,
//!   "test_size": 1000,
//!   "kernel": "squared_exponential",
//!   "l_grid": { "min": 0.5, "max": 12.0, "count": 20, "geometric": true },
//!   "zeta_ratios": [1.5],
//!   "runs": 3,
//!   "seed": 7,
//!   "rcond": 1e-10,
//!   "output_dir": "out/h2o"
//! }
//! ```
//!
//! `data` may instead be `{ "csv": { "path": "water.csv" } }`; relative
//! paths resolve against the config file's directory. `l_grid` may be an
//! explicit array. Omitted fields take the defaults in [`ExperimentConfig`].

mod correlate;
mod locality;
mod scan;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, SplitIndices, DEFAULT_BOX_HALFWIDTH, DEFAULT_M_RATIO};
use crate::diagnostics::DEFAULT_BINS;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::linalg::DEFAULT_RCOND;

pub use correlate::{emit_correlation_data, run_correlate, CorrelationSummary};
pub use locality::run_locality;
pub use scan::{run_scan, scan_dataset, CellResult, LSummary, ScanResult, VariantSummary, SCAN_CSV, SCAN_SUMMARY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
    },
    Synthetic {
        dimension: usize,
        n_points: usize,
        /// Defaults to the experiment seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default = "default_halfwidth")]
        box_halfwidth: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LGrid {
    Values(Vec<f64>),
    Range {
        min: f64,
        max: f64,
        count: usize,
        #[serde(default = "yes")]
        geometric: bool,
    },
}

impl LGrid {
    /// 20 geometric values on `[0.25 sqrt(D), 8 sqrt(D)]`; standardized data
    /// has mean pairwise squared distance `2D`.
    pub fn default_for(dim: usize) -> Self {
        let s = (dim as f64).sqrt();
        LGrid::Range {
            min: 0.25 * s,
            max: 8.0 * s,
            count: 20,
            geometric: true,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            LGrid::Values(v) => v.clone(),
            &LGrid::Range { min, max, count, geometric } => {
                if count == 0 || !(min > 0.0) || !(max >= min) {
                    return Err(Error::Config(format!(
                        "l_grid needs 0 < min <= max and count >= 1, got min={min} max={max} count={count}"
                    )));
                }
                match count {
                    1 => vec![min],
                    _ => (0..count)
                        .map(|i| {
                            let t = i as f64 / (count - 1) as f64;
                            if geometric {
                                min * (max / min).powf(t)
                            } else {
                                min + (max - min) * t
                            }
                        })
                        .collect(),
                }
            }
        };
        if v.is_empty() {
            return Err(Error::Config("l_grid is empty".into()));
        }
        if v.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Config(format!("l_grid values must be positive, got {v:?}")));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!("l_grid values must be strictly increasing, got {v:?}")));
        }
        Ok(v)
    }
}

fn yes() -> bool {
    true
}
fn default_halfwidth() -> f64 {
    DEFAULT_BOX_HALFWIDTH
}
fn default_m_ratio() -> f64 {
    DEFAULT_M_RATIO
}
fn default_zeta() -> Vec<f64> {
    vec![1.5]
}
fn default_runs() -> usize {
    3
}
fn default_rcond() -> f64 {
    DEFAULT_RCOND
}
fn default_bins() -> usize {
    DEFAULT_BINS
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub n_centers: usize,
    #[serde(default = "default_m_ratio")]
    pub m_ratio: f64,
    /// Test rows per run; all rows not used for training when omitted.
    #[serde(default)]
    pub test_size: Option<usize>,
    #[serde(default = "default_family")]
    pub kernel: KernelFamily,
    /// Defaults to [`LGrid::default_for`] the data dimension.
    #[serde(default)]
    pub l_grid: Option<LGrid>,
    /// Extra lengths of the multi-zeta variant as multiples of `l`. Empty
    /// scans the single-zeta kernel only.
    #[serde(default = "default_zeta")]
    pub zeta_ratios: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub seed: u64,
    #[serde(default = "default_rcond")]
    pub rcond: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_family() -> KernelFamily {
    KernelFamily::SquaredExponential
}

impl ExperimentConfig {
    /// Config with every optional field at its default.
    pub fn new(data: DataSource, n_centers: usize, seed: u64) -> Self {
        ExperimentConfig {
            data,
            n_centers,
            m_ratio: DEFAULT_M_RATIO,
            test_size: None,
            kernel: default_family(),
            l_grid: None,
            zeta_ratios: default_zeta(),
            runs: default_runs(),
            seed,
            rcond: DEFAULT_RCOND,
            bins: DEFAULT_BINS,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DataSource::Csv { path: p } = &mut cfg.data {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_centers == 0 {
            return Err(Error::Config("n_centers must be positive".into()));
        }
        if !(self.m_ratio >= 1.0) || !self.m_ratio.is_finite() {
            return Err(Error::Config(format!("m_ratio must be >= 1, got {}", self.m_ratio)));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.bins == 0 {
            return Err(Error::Config("bins must be at least 1".into()));
        }
        if !(self.rcond > 0.0 && self.rcond < 1.0) {
            return Err(Error::Config(format!("rcond must lie in (0, 1), got {}", self.rcond)));
        }
        if self.zeta_ratios.iter().any(|r| !(*r > 1.0) || !r.is_finite()) {
            return Err(Error::Config(format!("zeta_ratios must all exceed 1, got {:?}", self.zeta_ratios)));
        }
        if self.zeta_ratios.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "zeta_ratios must be strictly increasing, got {:?}",
                self.zeta_ratios
            )));
        }
        if let Some(grid) = &self.l_grid {
            grid.values()?;
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Csv { path } => dataset::load_csv(path),
            &DataSource::Synthetic { dimension, n_points, seed, box_halfwidth } => {
                dataset::synth_potential(dimension, n_points, seed.unwrap_or(self.seed), box_halfwidth)
            }
        }
    }

    pub fn l_values(&self, dim: usize) -> Result<Vec<f64>> {
        match &self.l_grid {
            Some(g) => g.values(),
            None => LGrid::default_for(dim).values(),
        }
    }

    pub fn n_train(&self) -> usize {
        dataset::training_count(self.n_centers, self.m_ratio)
    }

    pub fn test_count(&self, n_total: usize) -> usize {
        self.test_size
            .unwrap_or_else(|| n_total.saturating_sub(self.n_train()))
    }

    /// Split seed of run `run`; synthetic data itself is drawn from `seed`.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(1 + run as u64)
    }

    pub fn split_for_run(&self, n_total: usize, run: usize) -> Result<SplitIndices> {
        dataset::split(
            n_total,
            self.n_centers,
            self.m_ratio,
            self.test_count(n_total),
            self.run_seed(run),
        )
    }

    /// Single-zeta first, then the multi-zeta variant when configured.
    pub fn variants(&self) -> Vec<Variant> {
        let mut v = vec![Variant { name: "single_zeta".into(), ratios: vec![] }];
        if !self.zeta_ratios.is_empty() {
            let name = if self.zeta_ratios.len() == 1 { "double_zeta" } else { "multi_zeta" };
            v.push(Variant { name: name.into(), ratios: self.zeta_ratios.clone() });
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    /// Lengths are `l * [1, ratios...]`.
    pub ratios: Vec<f64>,
}

impl Variant {
    pub fn spec(&self, family: KernelFamily, l: f64) -> Result<KernelSpec> {
        KernelSpec::multi(family, l, &self.ratios)
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Shortest round-trip decimal form; `NaN` for missing values.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}
