//! Fitting, prediction and scoring.
//!
//! The rectangular fit uses `N` centers and `M >= N` training rows and solves
//! `B c = f` in the least-squares sense, with `B` the `M x (Z*N)` multi-zeta
//! design matrix. No diagonal regularization is involved; small singular
//! values are truncated instead. The square path is classical GPR with
//! `K + delta*I`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Normalizer;
use crate::error::{Error, Result};
use crate::kernels::{design_matrix, square_covariance_matrix, KernelFamily, KernelSpec};
use crate::linalg::{pseudoinverse_solve, regularized_solve, SolveReport};

/// Schema tag written into every serialized model.
pub const FIT_MODEL_FORMAT: &str = "multizeta.fit_model.v1";

/// A trained kernel expansion `f(x) = sum_z sum_n k(x, x_n | l_z) c_{z,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitModel {
    pub normalizer: Normalizer,
    /// `N x D`, standardized coordinates.
    pub centers: DMatrix<f64>,
    pub spec: KernelSpec,
    /// Blocks of length `N` in the order of `spec.lengths()`.
    pub coefficients: DVector<f64>,
    /// Present for pseudoinverse fits; the square path has none.
    pub solve_report: Option<SolveReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    /// Pearson correlation; `None` when undefined (fewer than two points or
    /// a constant series).
    pub correlation_r: Option<f64>,
    pub n_points: usize,
}

fn check_rows(inputs: &DMatrix<f64>, targets: &DVector<f64>) -> Result<()> {
    if inputs.nrows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.nrows(),
            got: targets.len(),
        });
    }
    Ok(())
}

/// Pseudoinverse fit on standardized `train_inputs` with standardized
/// `centers`. `normalizer` is stored so that [`predict`] accepts raw inputs.
pub fn fit_rectangular(
    normalizer: &Normalizer,
    train_inputs: &DMatrix<f64>,
    train_targets: &DVector<f64>,
    centers: &DMatrix<f64>,
    spec: &KernelSpec,
    rcond: f64,
) -> Result<FitModel> {
    check_rows(train_inputs, train_targets)?;
    if centers.ncols() != normalizer.dimension() {
        return Err(Error::DimensionMismatch {
            expected: normalizer.dimension(),
            got: centers.ncols(),
        });
    }
    let b = design_matrix(train_inputs, centers, spec)?;
    let (coefficients, report) = pseudoinverse_solve(&b, train_targets, rcond)?;
    Ok(FitModel {
        normalizer: normalizer.clone(),
        centers: centers.clone(),
        spec: spec.clone(),
        coefficients,
        solve_report: Some(report),
    })
}

/// Square GPR mean: every training row is a center and
/// `c = (K + delta*I)^{-1} f`.
pub fn fit_square_gpr(
    normalizer: &Normalizer,
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    family: KernelFamily,
    length: f64,
    delta: f64,
) -> Result<FitModel> {
    check_rows(inputs, targets)?;
    if inputs.ncols() != normalizer.dimension() {
        return Err(Error::DimensionMismatch {
            expected: normalizer.dimension(),
            got: inputs.ncols(),
        });
    }
    let k = square_covariance_matrix(inputs, family, length, delta)?;
    let coefficients = regularized_solve(&k, targets)?;
    Ok(FitModel {
        normalizer: normalizer.clone(),
        centers: inputs.clone(),
        spec: KernelSpec::single(family, length)?,
        coefficients,
        solve_report: None,
    })
}

impl FitModel {
    pub fn dimension(&self) -> usize {
        self.centers.ncols()
    }

    pub fn n_centers(&self) -> usize {
        self.centers.nrows()
    }

    /// Prediction for inputs that are already standardized.
    pub fn predict_standardized(&self, inputs: &DMatrix<f64>) -> Result<DVector<f64>> {
        let b = design_matrix(inputs, &self.centers, &self.spec)?;
        Ok(b * &self.coefficients)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&FitModelDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<FitModelDoc>(s)?.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Prediction at raw (unstandardized) `T x D` inputs.
pub fn predict(model: &FitModel, raw_inputs: &DMatrix<f64>) -> Result<DVector<f64>> {
    let x = model.normalizer.apply(raw_inputs)?;
    model.predict_standardized(&x)
}

pub fn score(predictions: &DVector<f64>, truth: &DVector<f64>) -> Result<Metrics> {
    let n = truth.len();
    if predictions.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: predictions.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("cannot score an empty set".into()));
    }
    let nf = n as f64;
    let err = predictions - truth;
    let rmse = (err.norm_squared() / nf).sqrt();
    let mae = err.iter().map(|e| e.abs()).sum::<f64>() / nf;
    Ok(Metrics {
        rmse,
        mae,
        correlation_r: pearson(predictions, truth),
        n_points: n,
    })
}

fn pearson(a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
    let n = a.len();
    if n < 2 {
        return None;
    }
    let ma = a.mean();
    let mb = b.mean();
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// On-disk form of [`FitModel`]: matrices as nested row arrays.
#[derive(Serialize, Deserialize)]
struct FitModelDoc {
    format: String,
    normalizer: Normalizer,
    spec: KernelSpec,
    centers: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
    solve_report: Option<SolveReport>,
}

impl From<&FitModel> for FitModelDoc {
    fn from(m: &FitModel) -> Self {
        FitModelDoc {
            format: FIT_MODEL_FORMAT.to_owned(),
            normalizer: m.normalizer.clone(),
            spec: m.spec.clone(),
            centers: m.centers.row_iter().map(|r| r.iter().copied().collect()).collect(),
            coefficients: m.coefficients.iter().copied().collect(),
            solve_report: m.solve_report,
        }
    }
}

impl TryFrom<FitModelDoc> for FitModel {
    type Error = Error;

    fn try_from(doc: FitModelDoc) -> Result<Self> {
        if doc.format != FIT_MODEL_FORMAT {
            return Err(Error::InvalidParameter(format!("unsupported model format `{}`", doc.format)));
        }
        let d = doc.normalizer.dimension();
        if doc.normalizer.stds.len() != d || doc.normalizer.stds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("normalizer stds must be positive, one per dimension".into()));
        }
        let n = doc.centers.len();
        if n == 0 {
            return Err(Error::InvalidParameter("model has no centers".into()));
        }
        if let Some(bad) = doc.centers.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        let z = doc.spec.zeta_count();
        if doc.coefficients.len() != z * n {
            return Err(Error::DimensionMismatch {
                expected: z * n,
                got: doc.coefficients.len(),
            });
        }
        let flat: Vec<f64> = doc.centers.concat();
        if flat.iter().chain(&doc.coefficients).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model"));
        }
        Ok(FitModel {
            normalizer: doc.normalizer,
            centers: DMatrix::from_row_slice(n, d, &flat),
            spec: doc.spec,
            coefficients: DVector::from_vec(doc.coefficients),
            solve_report: doc.solve_report,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DEFAULT_RCOND;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const SE: KernelFamily = KernelFamily::SquaredExponential;

    fn random_points(m: usize, d: usize, seed: u64) -> DMatrix<f64> {
        use rand::Rng;
        let mut rng = crate::dataset::rng_from_seed(seed);
        DMatrix::from_fn(m, d, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn single_point_fit() {
        let x = DMatrix::from_element(1, 1, 0.0);
        let f = DVector::from_element(1, 3.0);
        let spec = KernelSpec::single(SE, 1.0).unwrap();
        let m = fit_rectangular(&Normalizer::identity(1), &x, &f, &x, &spec, DEFAULT_RCOND).unwrap();
        assert_relative_eq!(m.coefficients[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(predict(&m, &x).unwrap()[0], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn square_rectangular_fit_interpolates() {
        let x = DMatrix::from_row_slice(2, 1, &[-0.5, 0.7]);
        let f = DVector::from_vec(vec![1.0, -2.0]);
        let spec = KernelSpec::single(SE, 1.0).unwrap();
        let m = fit_rectangular(&Normalizer::identity(1), &x, &f, &x, &spec, DEFAULT_RCOND).unwrap();
        let p = predict(&m, &x).unwrap();
        assert!((p - &f).norm() <= 1e-8 * f.norm());
    }

    #[test]
    fn duplicate_lengths_match_single_zeta_residual() {
        let x = random_points(14, 2, 5);
        let f = DVector::from_fn(14, |i, _| (x[(i, 0)] * 1.3).sin() + x[(i, 1)]);
        let centers = x.rows(0, 10).into_owned();
        let norm = Normalizer::identity(2);
        let single = KernelSpec::single(SE, 1.2).unwrap();
        // bypasses validation
        let dup = KernelSpec { family: SE, lengths: vec![1.2, 1.2] };
        let a = fit_rectangular(&norm, &x, &f, &centers, &single, DEFAULT_RCOND).unwrap();
        let b = fit_rectangular(&norm, &x, &f, &centers, &dup, DEFAULT_RCOND).unwrap();
        let ra = a.solve_report.unwrap();
        let rb = b.solve_report.unwrap();
        assert_eq!(ra.effective_rank, rb.effective_rank);
        assert_relative_eq!(ra.residual_norm, rb.residual_norm, max_relative = 1e-6, epsilon = 1e-9 * f.norm());
        // split coefficients reproduce the single-zeta ones
        let summed = b.coefficients.rows(0, 10) + b.coefficients.rows(10, 10);
        assert_relative_eq!(summed.into_owned(), a.coefficients, epsilon = 1e-6 * a.coefficients.amax());
    }

    #[test]
    fn zero_coefficients_predict_zero() {
        let centers = random_points(4, 3, 1);
        let model = FitModel {
            normalizer: Normalizer::identity(3),
            centers,
            spec: KernelSpec::multi(SE, 1.0, &[1.5]).unwrap(),
            coefficients: DVector::zeros(8),
            solve_report: None,
        };
        assert_eq!(predict(&model, &random_points(5, 3, 2)).unwrap(), DVector::zeros(5));
        assert!(matches!(predict(&model, &random_points(5, 2, 2)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn score_examples() {
        let t = DVector::from_vec(vec![3.0, 4.0, 1.0]);
        let m = score(&t, &t).unwrap();
        assert_eq!((m.rmse, m.mae), (0.0, 0.0));
        assert_relative_eq!(m.correlation_r.unwrap(), 1.0);

        let m = score(&DVector::zeros(2), &DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_relative_eq!(m.rmse, 12.5f64.sqrt());
        assert_relative_eq!(m.rmse, 3.5355339, epsilon = 1e-7);
        assert_relative_eq!(m.mae, 3.5);
        assert_eq!(m.correlation_r, None);

        let m = score(&t.add_scalar(1.0), &t).unwrap();
        assert_relative_eq!(m.rmse, 1.0);
        assert_relative_eq!(m.mae, 1.0);
        assert_relative_eq!(m.correlation_r.unwrap(), 1.0, epsilon = 1e-12);

        let m = score(&DVector::from_vec(vec![1.0, 2.0]), &DVector::from_element(2, 5.0)).unwrap();
        assert_eq!(m.correlation_r, None);
        assert!(score(&DVector::zeros(0), &DVector::zeros(0)).is_err());
    }

    #[test]
    fn square_gpr_examples() {
        let norm = Normalizer::identity(1);
        let x = DMatrix::from_element(1, 1, 0.2);
        let m = fit_square_gpr(&norm, &x, &DVector::from_element(1, 7.0), SE, 1.0, 0.0).unwrap();
        assert_relative_eq!(m.coefficients[0], 7.0);

        let dup = DMatrix::from_element(2, 1, 0.2);
        let err = fit_square_gpr(&norm, &dup, &DVector::from_element(2, 1.0), SE, 1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite));
        assert!(err.to_string().contains("delta"));
    }

    #[test]
    fn square_gpr_far_apart_limit() {
        // at tiny l the off-diagonal entries vanish, leaving (1 + delta) I
        let x = random_points(6, 2, 11);
        let f = DVector::from_fn(6, |i, _| i as f64 - 2.5);
        let delta = 50.0;
        let m = fit_square_gpr(&Normalizer::identity(2), &x, &f, SE, 1e-3, delta).unwrap();
        let mut k = square_covariance_matrix(&x, SE, 1e-3, delta).unwrap();
        k.fill_lower_triangle(0.0, 1);
        k.fill_upper_triangle(0.0, 1);
        let oracle = k.lu().solve(&f).unwrap();
        assert_relative_eq!(m.coefficients, oracle, epsilon = 1e-12);
        assert_relative_eq!(m.coefficients, f / (1.0 + delta), epsilon = 1e-12);
    }

    #[test]
    fn rectangular_agrees_with_square_at_zero_delta() {
        let x = random_points(8, 2, 21);
        let f = DVector::from_fn(8, |i, _| x[(i, 0)].exp() - x[(i, 1)]);
        let norm = Normalizer::identity(2);
        let rect = fit_rectangular(&norm, &x, &f, &x, &KernelSpec::single(SE, 0.6).unwrap(), DEFAULT_RCOND).unwrap();
        let sq = fit_square_gpr(&norm, &x, &f, SE, 0.6, 0.0).unwrap();
        let q = random_points(20, 2, 22);
        let (a, b) = (predict(&rect, &q).unwrap(), predict(&sq, &q).unwrap());
        assert!((a - b).amax() <= 1e-6);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let x = random_points(12, 3, 3);
        let f = DVector::from_fn(12, |i, _| (i as f64).sqrt() * std::f64::consts::PI);
        let norm = Normalizer { means: vec![0.1, -1.0 / 3.0, 2.0], stds: vec![1.7, 0.3, 1e-3] };
        let m = fit_rectangular(&norm, &x, &f, &x.rows(0, 9).into_owned(), &KernelSpec::multi(SE, 1.1, &[1.5]).unwrap(), DEFAULT_RCOND).unwrap();
        let back = FitModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_inconsistent_model() {
        let x = random_points(3, 1, 3);
        let m = fit_rectangular(&Normalizer::identity(1), &x, &DVector::zeros(3), &x, &KernelSpec::single(SE, 1.0).unwrap(), DEFAULT_RCOND).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        v["coefficients"].as_array_mut().unwrap().pop();
        assert!(FitModel::from_json(&v.to_string()).is_err());
    }

    proptest! {
        #[test]
        fn nested_basis_residual(seed in any::<u64>(), d in 1usize..5, n in 2usize..12, l in 0.3..4.0f64) {
            let m = crate::dataset::training_count(n, 1.4);
            let x = random_points(m, d, seed);
            let f = DVector::from_fn(m, |i, _| (x.row(i).sum()).sin() + x[(i, 0)].powi(2));
            let norm = Normalizer::identity(d);
            let centers = x.rows(0, n).into_owned();
            let sz = fit_rectangular(&norm, &x, &f, &centers, &KernelSpec::single(SE, l).unwrap(), DEFAULT_RCOND).unwrap();
            let dz = fit_rectangular(&norm, &x, &f, &centers, &KernelSpec::multi(SE, l, &[1.5]).unwrap(), DEFAULT_RCOND).unwrap();
            let rs = sz.solve_report.unwrap().residual_norm;
            let rd = dz.solve_report.unwrap().residual_norm;
            prop_assert!(rd <= rs + 1e-8 * f.norm());
        }

        #[test]
        fn permutation_invariance(seed in any::<u64>(), l in 0.5..2.0f64) {
            use rand::seq::SliceRandom;
            let x = random_points(14, 2, seed);
            let f = DVector::from_fn(14, |i, _| x[(i, 0)] * x[(i, 1)] + 1.0);
            let centers = x.rows(0, 10).into_owned();
            let norm = Normalizer::identity(2);
            let spec = KernelSpec::single(SE, l).unwrap();
            let a = fit_rectangular(&norm, &x, &f, &centers, &spec, DEFAULT_RCOND).unwrap();
            let mut perm: Vec<usize> = (0..14).collect();
            perm.shuffle(&mut crate::dataset::rng_from_seed(seed ^ 1));
            let xp = x.select_rows(&perm);
            let fp = DVector::from_fn(14, |i, _| f[perm[i]]);
            let b = fit_rectangular(&norm, &xp, &fp, &centers, &spec, DEFAULT_RCOND).unwrap();
            let q = random_points(10, 2, seed.wrapping_add(7));
            let (pa, pb) = (predict(&a, &q).unwrap(), predict(&b, &q).unwrap());
            prop_assert!((&pa - &pb).amax() <= 1e-10 * pa.amax().max(1.0));
        }

        #[test]
        fn target_scaling(seed in any::<u64>(), s in -50.0..50.0f64) {
            let x = random_points(10, 3, seed);
            let f = DVector::from_fn(10, |i, _| x.row(i).norm());
            let norm = Normalizer::identity(3);
            let centers = x.rows(0, 7).into_owned();
            let spec = KernelSpec::multi(SE, 1.5, &[1.5]).unwrap();
            let a = fit_rectangular(&norm, &x, &f, &centers, &spec, DEFAULT_RCOND).unwrap();
            let b = fit_rectangular(&norm, &x, &(&f * s), &centers, &spec, DEFAULT_RCOND).unwrap();
            let q = random_points(6, 3, seed ^ 9);
            let pa = predict(&a, &q).unwrap() * s;
            let pb = predict(&b, &q).unwrap();
            prop_assert!((&pa - &pb).amax() <= 1e-10 * pa.amax().max(1e-300));
        }

        #[test]
        fn rmse_zero_iff_equal(v in prop::collection::vec(-1e3..1e3f64, 1..20), k in 0usize..20, bump in 1e-6..1.0f64) {
            let t = DVector::from_vec(v);
            prop_assert_eq!(score(&t, &t).unwrap().rmse, 0.0);
            let mut p = t.clone();
            let i = k % p.len();
            p[i] += bump;
            prop_assert!(score(&p, &t).unwrap().rmse > 0.0);
        }
    }
}
