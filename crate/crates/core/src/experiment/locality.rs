use super::scan::{scan_dataset, RunData};
use super::{ensure_dir, ExperimentConfig};
use crate::diagnostics::{locality_reports, LocalityReport};
use crate::error::{Error, Result};

/// Kernel-entry distributions on the first run's split, one report per zeta
/// length and variant, written as `locality_<variant>_z<k>.{csv,json}`.
///
/// With `l = None` each variant is evaluated at its best scan length.
pub fn run_locality(cfg: &ExperimentConfig, l: Option<f64>) -> Result<Vec<LocalityReport>> {
    cfg.validate()?;
    let data = cfg.load_dataset()?;
    let lengths: Vec<f64> = match l {
        Some(l) => vec![l; cfg.variants().len()],
        None => {
            let scan = scan_dataset(cfg, &data)?;
            scan.variants
                .iter()
                .map(|v| {
                    v.best_l.ok_or_else(|| {
                        Error::Config(format!("scan found no usable length for {}", v.name))
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    let run = RunData::prepare(cfg, &data, 0)?;
    ensure_dir(&cfg.output_dir)?;

    let mut out = Vec::new();
    for (variant, &l) in cfg.variants().iter().zip(&lengths) {
        let spec = variant.spec(cfg.kernel, l)?;
        for report in locality_reports(&run.train_std, &run.centers_std, &spec, cfg.bins)? {
            let stem = format!("locality_{}_z{}", variant.name, report.zeta_index);
            report.write_csv(&cfg.output_dir.join(format!("{stem}.csv")))?;
            report.write_json(&cfg.output_dir.join(format!("{stem}.json")))?;
            out.push(report);
        }
    }
    Ok(out)
}
