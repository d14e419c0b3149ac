use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ensure_dir, fmt_f64, fmt_opt, write_json, ExperimentConfig, Variant};
use crate::dataset::{Dataset, Normalizer, SplitIndices};
use crate::error::{Error, Result};
use crate::kernels::{design_from_sq_dists, pairwise_sq_dists, KernelFamily};
use crate::linalg::pseudoinverse_solve;
use crate::regression::{score, FitModel};

pub const SCAN_CSV: &str = "scan.csv";
pub const SCAN_SUMMARY: &str = "scan_summary.json";

/// One fitted `(variant, l, run)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub variant: String,
    pub l: f64,
    pub run: usize,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub test_mae: f64,
    pub test_r: Option<f64>,
    pub effective_rank: usize,
    /// Set when the fit failed; the metric fields are then NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LSummary {
    pub l: f64,
    pub mean_train_rmse: Option<f64>,
    pub mean_test_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub name: String,
    pub ratios: Vec<f64>,
    pub best_l: Option<f64>,
    pub best_mean_test_rmse: Option<f64>,
    pub per_l: Vec<LSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub dimension: usize,
    pub n_total: usize,
    pub n_centers: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub kernel: KernelFamily,
    pub target_unit: String,
    pub l_grid: Vec<f64>,
    pub runs: usize,
    pub variants: Vec<VariantSummary>,
    #[serde(skip)]
    pub cells: Vec<CellResult>,
}

impl ScanResult {
    pub fn variant(&self, name: &str) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.name == name)
    }

    pub fn cell(&self, variant: &str, l: f64, run: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.l == l && c.run == run)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record([
            "variant",
            "l",
            "run",
            "train_rmse",
            "test_rmse",
            "test_mae",
            "test_r",
            "effective_rank",
            "status",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.variant.clone(),
                fmt_f64(c.l),
                c.run.to_string(),
                fmt_f64(c.train_rmse),
                fmt_f64(c.test_rmse),
                fmt_f64(c.test_mae),
                fmt_opt(c.test_r),
                c.effective_rank.to_string(),
                c.error.clone().unwrap_or_else(|| "ok".into()),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Standardized matrices of one seeded split, shared by every cell of a run.
pub(crate) struct RunData {
    pub split: SplitIndices,
    pub normalizer: Normalizer,
    pub train_std: DMatrix<f64>,
    pub train_targets: DVector<f64>,
    pub centers_std: DMatrix<f64>,
    pub test_targets: DVector<f64>,
    train_d2: DMatrix<f64>,
    test_d2: Option<DMatrix<f64>>,
}

impl RunData {
    /// Standardization is fitted on the training rows only.
    pub fn prepare(cfg: &ExperimentConfig, data: &Dataset, run: usize) -> Result<Self> {
        let split = cfg.split_for_run(data.len(), run)?;
        let normalizer = Normalizer::fit(&data.rows(&split.train_idx))?;
        let train_std = normalizer.apply(&data.rows(&split.train_idx))?;
        let centers_std = train_std.rows(0, split.center_idx.len()).into_owned();
        let test_std = normalizer.apply(&data.rows(&split.test_idx))?;
        let train_d2 = pairwise_sq_dists(&train_std, &centers_std)?;
        let test_d2 = if test_std.nrows() > 0 {
            Some(pairwise_sq_dists(&test_std, &centers_std)?)
        } else {
            None
        };
        Ok(RunData {
            train_targets: data.targets_at(&split.train_idx),
            test_targets: data.targets_at(&split.test_idx),
            split,
            normalizer,
            train_std,
            centers_std,
            train_d2,
            test_d2,
        })
    }

    /// Same result as `regression::fit_rectangular` on these rows, reusing
    /// the cached distances.
    pub fn fit(&self, family: KernelFamily, variant: &Variant, l: f64, rcond: f64) -> Result<FitModel> {
        let spec = variant.spec(family, l)?;
        let b = design_from_sq_dists(&self.train_d2, &spec);
        let (coefficients, report) = pseudoinverse_solve(&b, &self.train_targets, rcond)?;
        Ok(FitModel {
            normalizer: self.normalizer.clone(),
            centers: self.centers_std.clone(),
            spec,
            coefficients,
            solve_report: Some(report),
        })
    }

    fn evaluate(&self, cfg: &ExperimentConfig, variant: &Variant, l: f64, run: usize) -> CellResult {
        let failed = |msg: String| CellResult {
            variant: variant.name.clone(),
            l,
            run,
            train_rmse: f64::NAN,
            test_rmse: f64::NAN,
            test_mae: f64::NAN,
            test_r: None,
            effective_rank: 0,
            error: Some(msg),
        };
        let model = match self.fit(cfg.kernel, variant, l, cfg.rcond) {
            Ok(m) => m,
            Err(e) => return failed(e.to_string()),
        };
        let report = model.solve_report.expect("rectangular fit has a report");
        let train_rmse = report.residual_norm / (self.train_targets.len() as f64).sqrt();
        let Some(test_d2) = &self.test_d2 else {
            return failed("empty test set".into());
        };
        let pred = design_from_sq_dists(test_d2, &model.spec) * &model.coefficients;
        match score(&pred, &self.test_targets) {
            Ok(m) if m.rmse.is_finite() => CellResult {
                variant: variant.name.clone(),
                l,
                run,
                train_rmse,
                test_rmse: m.rmse,
                test_mae: m.mae,
                test_r: m.correlation_r,
                effective_rank: report.effective_rank,
                error: None,
            },
            Ok(_) => failed("non-finite test error".into()),
            Err(e) => failed(e.to_string()),
        }
    }
}

/// Fits every `(variant, l, run)` cell and picks, per variant, the `l` with
/// the smallest mean test rmse over runs (ties go to the smaller `l`).
///
/// Cells are evaluated in parallel; the result does not depend on the
/// thread count.
pub fn scan_dataset(cfg: &ExperimentConfig, data: &Dataset) -> Result<ScanResult> {
    cfg.validate()?;
    let grid = cfg.l_values(data.dimension())?;
    let n_test = cfg.test_count(data.len());
    if n_test == 0 {
        return Err(Error::Config("a scan needs at least one test row".into()));
    }
    let runs: Vec<RunData> = (0..cfg.runs)
        .map(|r| RunData::prepare(cfg, data, r))
        .collect::<Result<_>>()?;
    let variants = cfg.variants();

    let jobs: Vec<(usize, usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..grid.len()).flat_map(move |li| (0..cfg.runs).map(move |r| (v, li, r))))
        .collect();
    let cells: Vec<CellResult> = jobs
        .par_iter()
        .map(|&(v, li, r)| runs[r].evaluate(cfg, &variants[v], grid[li], r))
        .collect();

    let summaries = variants
        .iter()
        .map(|variant| summarize(variant, &grid, &cells))
        .collect();

    Ok(ScanResult {
        dimension: data.dimension(),
        n_total: data.len(),
        n_centers: cfg.n_centers,
        n_train: cfg.n_train(),
        n_test,
        kernel: cfg.kernel,
        target_unit: data.target_unit.clone(),
        l_grid: grid,
        runs: cfg.runs,
        variants: summaries,
        cells,
    })
}

fn mean_if_all_ok(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in vals {
        let v = v.filter(|x| x.is_finite())?;
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

pub(crate) fn summarize(variant: &Variant, grid: &[f64], cells: &[CellResult]) -> VariantSummary {
    let per_l: Vec<LSummary> = grid
        .iter()
        .map(|&l| {
            let mine = || cells.iter().filter(move |c| c.variant == variant.name && c.l == l);
            let ok = |c: &CellResult, v: f64| c.error.is_none().then_some(v);
            LSummary {
                l,
                mean_train_rmse: mean_if_all_ok(mine().map(|c| ok(c, c.train_rmse))),
                mean_test_rmse: mean_if_all_ok(mine().map(|c| ok(c, c.test_rmse))),
            }
        })
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for s in &per_l {
        if let Some(rmse) = s.mean_test_rmse {
            if best.is_none_or(|(_, b)| rmse < b) {
                best = Some((s.l, rmse));
            }
        }
    }
    VariantSummary {
        name: variant.name.clone(),
        ratios: variant.ratios.clone(),
        best_l: best.map(|b| b.0),
        best_mean_test_rmse: best.map(|b| b.1),
        per_l,
    }
}

/// Loads the data, scans, and writes `scan.csv` and `scan_summary.json`
/// into the config's output directory.
pub fn run_scan(cfg: &ExperimentConfig) -> Result<ScanResult> {
    let data = cfg.load_dataset()?;
    let result = scan_dataset(cfg, &data)?;
    ensure_dir(&cfg.output_dir)?;
    result.write_csv(&cfg.output_dir.join(SCAN_CSV))?;
    write_json(&cfg.output_dir.join(SCAN_SUMMARY), &summary_doc(cfg, &result)?)?;
    Ok(result)
}

/// The summary echoes the config without `output_dir`, so that outputs do
/// not depend on where they were written.
fn summary_doc(cfg: &ExperimentConfig, result: &ScanResult) -> Result<serde_json::Value> {
    let mut config = serde_json::to_value(cfg)?;
    if let Some(obj) = config.as_object_mut() {
        obj.remove("output_dir");
    }
    let mut doc = serde_json::to_value(result)?;
    doc.as_object_mut()
        .expect("struct serializes as object")
        .insert("config".into(), config);
    Ok(doc)
}
