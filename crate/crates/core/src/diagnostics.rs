//! Locality diagnostics.
//!
//! Two views of the same effect: the empirical distribution of kernel
//! matrix entries on standardized data, and the analytic concentration of
//! Gaussian mass away from the mean as the dimension grows.

use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::rng_from_seed;
use crate::error::{Error, Result};
use crate::kernels::{design_from_sq_dists, pairwise_sq_dists, KernelFamily, KernelSpec};

pub const REPORT_QUANTILES: [f64; 7] = [0.0, 0.01, 0.25, 0.5, 0.75, 0.99, 1.0];
pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantile {
    pub p: f64,
    pub value: f64,
}

/// Distribution of the entries of one `M x N` kernel block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityReport {
    pub dimension: usize,
    pub family: KernelFamily,
    pub length: f64,
    /// Position of `length` in the kernel spec, 0 for the narrowest.
    pub zeta_index: usize,
    pub n_rows: usize,
    pub n_centers: usize,
    pub n_entries: u64,
    pub mean: f64,
    pub histogram: Vec<HistogramBin>,
    pub quantiles: Vec<Quantile>,
}

impl LocalityReport {
    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles.iter().find(|q| q.p == p).map(|q| q.value)
    }

    pub fn min(&self) -> f64 {
        self.quantiles[0].value
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).expect("median is always reported")
    }

    pub fn max(&self) -> f64 {
        self.quantiles[self.quantiles.len() - 1].value
    }

    /// One row per bin: `bin_lower,bin_upper,count`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["bin_lower", "bin_upper", "count"])?;
        for b in &self.histogram {
            w.write_record([format!("{:?}", b.lower), format!("{:?}", b.upper), b.count.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))
    }
}

/// Linear interpolation between order statistics at `h = (n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn report_from_entries(
    mut entries: Vec<f64>,
    dimension: usize,
    family: KernelFamily,
    length: f64,
    zeta_index: usize,
    shape: (usize, usize),
    bins: usize,
) -> LocalityReport {
    let mut hist: Vec<u64> = vec![0; bins];
    for &v in &entries {
        let b = ((v * bins as f64) as usize).min(bins - 1);
        hist[b] += 1;
    }
    let mean = entries.iter().sum::<f64>() / entries.len() as f64;
    entries.sort_by(f64::total_cmp);
    let quantiles = REPORT_QUANTILES
        .iter()
        .map(|&p| Quantile { p, value: quantile_sorted(&entries, p) })
        .collect();
    let histogram = hist
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lower: i as f64 / bins as f64,
            upper: (i + 1) as f64 / bins as f64,
            count,
        })
        .collect();
    LocalityReport {
        dimension,
        family,
        length,
        zeta_index,
        n_rows: shape.0,
        n_centers: shape.1,
        n_entries: entries.len() as u64,
        mean,
        histogram,
        quantiles,
    }
}

/// Histogram and quantiles of all `M*N` entries `k(row_m, center_n | l)`.
pub fn kernel_entry_distribution(
    rows: &DMatrix<f64>,
    centers: &DMatrix<f64>,
    family: KernelFamily,
    length: f64,
    bins: usize,
) -> Result<LocalityReport> {
    let spec = KernelSpec::single(family, length)?;
    Ok(locality_reports(rows, centers, &spec, bins)?.remove(0))
}

/// One [`LocalityReport`] per zeta length of `spec`.
pub fn locality_reports(
    rows: &DMatrix<f64>,
    centers: &DMatrix<f64>,
    spec: &KernelSpec,
    bins: usize,
) -> Result<Vec<LocalityReport>> {
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    if rows.nrows() == 0 {
        return Err(Error::InvalidParameter("no rows".into()));
    }
    let d2 = pairwise_sq_dists(rows, centers)?;
    let shape = d2.shape();
    Ok(spec
        .lengths()
        .iter()
        .enumerate()
        .map(|(z, &l)| {
            let one = KernelSpec::single(spec.family(), l).expect("validated length");
            let block = design_from_sq_dists(&d2, &one);
            report_from_entries(block.as_slice().to_vec(), rows.ncols(), spec.family(), l, z, shape, bins)
        })
        .collect())
}

/// `P(|z| <= r)` for `z` standard normal in `dim` dimensions, i.e. the
/// chi-square CDF with `dim` degrees of freedom at `r^2`.
pub fn gaussian_mass_within(dim: usize, r: f64) -> f64 {
    if dim == 0 || !(r > 0.0) {
        return 0.0;
    }
    if r.is_infinite() {
        return 1.0;
    }
    regularized_lower_gamma(dim as f64 / 2.0, r * r / 2.0)
}

/// Regularized lower incomplete gamma `P(a, x) = gamma(a, x) / Gamma(a)`.
///
/// Power series below `x < a + 1`, Lentz continued fraction for the upper
/// tail otherwise.
pub fn regularized_lower_gamma(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum.ln() + log_prefactor).exp().min(1.0)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let upper = (log_prefactor.exp() * h).clamp(0.0, 1.0);
        1.0 - upper
    }
}

/// `ln Gamma(x)` for `x > 0`, Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedKernel {
    pub dimension: usize,
    pub length: f64,
    pub n_samples: usize,
    pub estimate: f64,
    pub std_error: f64,
    /// `(1 + 2/l^2)^(-D/2)`.
    pub closed_form: f64,
}

/// Exact `E[exp(-|x - x'|^2 / 2l^2)]` for independent standard normal
/// `x, x'` in `dim` dimensions.
pub fn expected_rbf_closed_form(dim: usize, length: f64) -> f64 {
    (1.0 + 2.0 / (length * length)).powf(-(dim as f64) / 2.0)
}

/// Monte Carlo estimate of the mean RBF kernel value between two
/// independent standardized points, with its closed form alongside.
pub fn expected_kernel_under_standardization(
    dim: usize,
    length: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ExpectedKernel> {
    if dim == 0 || n_samples < 2 {
        return Err(Error::InvalidParameter("need dim >= 1 and at least two samples".into()));
    }
    if !(length > 0.0) {
        return Err(Error::InvalidParameter(format!("length must be positive, got {length}")));
    }
    let mut rng = rng_from_seed(seed);
    let inv = 1.0 / (2.0 * length * length);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let mut r2 = 0.0;
        for _ in 0..dim {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            r2 += (a - b) * (a - b);
        }
        let k = (-r2 * inv).exp();
        sum += k;
        sum_sq += k * k;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(ExpectedKernel {
        dimension: dim,
        length,
        n_samples,
        estimate: mean,
        std_error: (var / n).sqrt(),
        closed_form: expected_rbf_closed_form(dim, length),
    })
}
