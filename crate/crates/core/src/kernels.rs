//! Stationary kernels of the Matern family and the (multi-zeta) design
//! matrices built from them.
//!
//! All kernels are isotropic functions of the squared distance `r2` with
//! unit prefactor, so `k(x, x) = 1` and values lie in `(0, 1]` (up to
//! floating-point underflow far from the center).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form members of the Matern family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `nu -> inf`, the RBF kernel `exp(-r^2 / 2l^2)`.
    SquaredExponential,
    /// `nu = 1/2`.
    Exponential,
    /// `nu = 3/2`.
    Matern32,
    /// `nu = 5/2`.
    Matern52,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::SquaredExponential,
        KernelFamily::Exponential,
        KernelFamily::Matern32,
        KernelFamily::Matern52,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "squared_exponential",
            KernelFamily::Exponential => "exponential",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
        }
    }

    /// Kernel value without parameter checks; `length > 0` and `r2 >= 0`
    /// are the caller's responsibility.
    #[inline]
    pub(crate) fn eval(self, length: f64, r2: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => (-r2 / (2.0 * length * length)).exp(),
            KernelFamily::Exponential => (-r2.sqrt() / length).exp(),
            KernelFamily::Matern32 => {
                let s = 3f64.sqrt() * r2.sqrt() / length;
                (1.0 + s) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = 5f64.sqrt() * r2.sqrt() / length;
                (1.0 + s + 5.0 * r2 / (3.0 * length * length)) * (-s).exp()
            }
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "squared_exponential" | "rbf" | "gaussian" => Ok(KernelFamily::SquaredExponential),
            "exponential" | "matern12" => Ok(KernelFamily::Exponential),
            "matern32" => Ok(KernelFamily::Matern32),
            "matern52" => Ok(KernelFamily::Matern52),
            other => Err(Error::InvalidParameter(format!(
                "unknown kernel family `{other}`"
            ))),
        }
    }
}

/// A kernel family together with `Z >= 1` strictly increasing length
/// parameters, one column block of the design matrix per length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec", into = "RawKernelSpec")]
pub struct KernelSpec {
    pub(crate) family: KernelFamily,
    pub(crate) lengths: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawKernelSpec {
    family: KernelFamily,
    lengths: Vec<f64>,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        KernelSpec::new(raw.family, raw.lengths)
    }
}

impl From<KernelSpec> for RawKernelSpec {
    fn from(spec: KernelSpec) -> Self {
        RawKernelSpec {
            family: spec.family,
            lengths: spec.lengths,
        }
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidParameter(
                "kernel spec needs at least one length".into(),
            ));
        }
        for &l in &lengths {
            check_length(l)?;
        }
        if lengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(format!(
                "kernel lengths must be strictly increasing, got {lengths:?}"
            )));
        }
        Ok(KernelSpec { family, lengths })
    }

    pub fn single(family: KernelFamily, length: f64) -> Result<Self> {
        Self::new(family, vec![length])
    }

    /// Lengths `length * [1, ratios...]`. `ratios = [1.5]` is the usual
    /// double-zeta kernel.
    pub fn multi(family: KernelFamily, length: f64, ratios: &[f64]) -> Result<Self> {
        let lengths = std::iter::once(length)
            .chain(ratios.iter().map(|r| r * length))
            .collect();
        Self::new(family, lengths)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Number of zeta components `Z`.
    pub fn zeta_count(&self) -> usize {
        self.lengths.len()
    }
}

fn check_length(l: f64) -> Result<()> {
    if l.is_finite() && l > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "length parameter must be positive and finite, got {l}"
        )))
    }
}

pub fn squared_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(sq_dist(x, y))
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn kernel_value(family: KernelFamily, length: f64, r2: f64) -> Result<f64> {
    check_length(length)?;
    if !(r2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "squared distance must be nonnegative, got {r2}"
        )));
    }
    Ok(family.eval(length, r2))
}

/// Row-major copy of the points; nalgebra stores columns contiguously.
fn row_major(points: &DMatrix<f64>) -> Vec<Vec<f64>> {
    points
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

/// Squared distances between every row and every center, `M x N`.
pub(crate) fn pairwise_sq_dists(rows: &DMatrix<f64>, centers: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rows.ncols() != centers.ncols() {
        return Err(Error::DimensionMismatch {
            expected: centers.ncols(),
            got: rows.ncols(),
        });
    }
    if centers.nrows() == 0 {
        return Err(Error::InvalidParameter("no kernel centers".into()));
    }
    let r = row_major(rows);
    let c = row_major(centers);
    let n = c.len();
    let data: Vec<f64> = r
        .par_iter()
        .flat_map_iter(|x| c.iter().map(move |y| sq_dist(x, y)))
        .collect();
    Ok(DMatrix::from_row_slice(r.len(), n, &data))
}

/// Kernel design matrix `B` of shape `M x (Z*N)`: block `z` holds
/// `k(row_m, center_n | lengths[z])`, blocks ordered as `spec.lengths()`.
pub fn design_matrix(
    rows: &DMatrix<f64>,
    centers: &DMatrix<f64>,
    spec: &KernelSpec,
) -> Result<DMatrix<f64>> {
    let d2 = pairwise_sq_dists(rows, centers)?;
    Ok(design_from_sq_dists(&d2, spec))
}

pub(crate) fn design_from_sq_dists(d2: &DMatrix<f64>, spec: &KernelSpec) -> DMatrix<f64> {
    let (m, n) = d2.shape();
    let z = spec.lengths.len();
    let mut b = DMatrix::zeros(m, z * n);
    for (block, &l) in spec.lengths.iter().enumerate() {
        let mut view = b.columns_mut(block * n, n);
        view.zip_apply(d2, |dst, r2| *dst = spec.family.eval(l, r2));
    }
    b
}

/// Square covariance matrix over `points` with `delta` added on the
/// diagonal.
pub fn square_covariance_matrix(
    points: &DMatrix<f64>,
    family: KernelFamily,
    length: f64,
    delta: f64,
) -> Result<DMatrix<f64>> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "delta must be nonnegative, got {delta}"
        )));
    }
    let spec = KernelSpec::single(family, length)?;
    let mut k = design_matrix(points, points, &spec)?;
    for i in 0..k.nrows() {
        k[(i, i)] += delta;
    }
    Ok(k)
}
