use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{fmt_f64, write_json};
use crate::error::{Error, Result};
use crate::regression::{predict, score, FitModel, Metrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub train: Metrics,
    /// `None` for an empty test set.
    pub test: Option<Metrics>,
}

/// Writes `set,exact,predicted` rows for the training and test points to
/// `csv_path`, and the metrics of both sets next to it as `.json`.
pub fn emit_correlation_data(
    model: &FitModel,
    train: (&DMatrix<f64>, &DVector<f64>),
    test: (&DMatrix<f64>, &DVector<f64>),
    csv_path: &Path,
) -> Result<CorrelationSummary> {
    let train_pred = predict(model, train.0)?;
    let test_pred = if test.0.nrows() > 0 {
        Some(predict(model, test.0)?)
    } else {
        None
    };

    let file = File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["set", "exact", "predicted"])?;
    let mut rows = |set: &str, exact: &DVector<f64>, pred: &DVector<f64>| -> Result<()> {
        for (e, p) in exact.iter().zip(pred.iter()) {
            w.write_record([set.to_owned(), fmt_f64(*e), fmt_f64(*p)])?;
        }
        Ok(())
    };
    rows("train", train.1, &train_pred)?;
    if let Some(p) = &test_pred {
        rows("test", test.1, p)?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;

    let summary = CorrelationSummary {
        train: score(&train_pred, train.1)?,
        test: test_pred.as_ref().map(|p| score(p, test.1)).transpose()?,
    };
    write_json(&csv_path.with_extension("json"), &summary)?;
    Ok(summary)
}

/// Fits one variant on the first run's split at `l` (or its best scan
/// length) and writes `correlation_<variant>.{csv,json}` plus the model as
/// `model_<variant>.json`. The default variant is the multi-zeta one when
/// configured.
pub fn run_correlate(
    cfg: &super::ExperimentConfig,
    l: Option<f64>,
    variant: Option<&str>,
) -> Result<CorrelationSummary> {
    cfg.validate()?;
    let variants = cfg.variants();
    let variant = match variant {
        Some(name) => variants
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::Config(format!("unknown variant `{name}`")))?,
        None => variants.last().expect("single-zeta variant always present"),
    };
    let data = cfg.load_dataset()?;
    let l = match l {
        Some(l) => l,
        None => super::scan::scan_dataset(cfg, &data)?
            .variant(&variant.name)
            .and_then(|v| v.best_l)
            .ok_or_else(|| Error::Config(format!("scan found no usable length for {}", variant.name)))?,
    };
    let run = super::scan::RunData::prepare(cfg, &data, 0)?;
    let model = run.fit(cfg.kernel, variant, l, cfg.rcond)?;
    super::ensure_dir(&cfg.output_dir)?;
    model.save(&cfg.output_dir.join(format!("model_{}.json", variant.name)))?;
    emit_correlation_data(
        &model,
        (&data.rows(&run.split.train_idx), &run.train_targets),
        (&data.rows(&run.split.test_idx), &run.test_targets),
        &cfg.output_dir.join(format!("correlation_{}.csv", variant.name)),
    )
}
