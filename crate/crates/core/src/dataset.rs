//! Point sets: CSV ingestion, standardization, seeded splits and a
//! synthetic Morse-like potential.
//!
//! All randomness goes through [`rng_from_seed`], a ChaCha8 stream seeded via
//! `SeedableRng::seed_from_u64`, so splits and synthetic data are identical
//! across platforms for a given seed.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BOX_HALFWIDTH: f64 = 1.5;
pub const DEFAULT_M_RATIO: f64 = 1.4;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n_total x D`, one point per row, raw coordinate units.
    pub inputs: DMatrix<f64>,
    pub targets: DVector<f64>,
    pub input_names: Vec<String>,
    pub target_name: String,
    /// Unit label of the targets, e.g. `cm-1`. Empty when unknown.
    pub target_unit: String,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        let names = (1..=inputs.ncols()).map(|i| format!("x{i}")).collect();
        Self::with_names(inputs, targets, names, "y".into(), String::new())
    }

    pub fn with_names(
        inputs: DMatrix<f64>,
        targets: DVector<f64>,
        input_names: Vec<String>,
        target_name: String,
        target_unit: String,
    ) -> Result<Self> {
        if inputs.nrows() == 0 || inputs.ncols() == 0 {
            return Err(Error::InvalidParameter(format!(
                "dataset must have at least one row and one column, got {}x{}",
                inputs.nrows(),
                inputs.ncols()
            )));
        }
        if targets.len() != inputs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                got: targets.len(),
            });
        }
        if input_names.len() != inputs.ncols() {
            return Err(Error::DimensionMismatch {
                expected: inputs.ncols(),
                got: input_names.len(),
            });
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Dataset {
            inputs,
            targets,
            input_names,
            target_name,
            target_unit,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn rows(&self, idx: &[usize]) -> DMatrix<f64> {
        self.inputs.select_rows(idx)
    }

    pub fn targets_at(&self, idx: &[usize]) -> DVector<f64> {
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.targets[i]))
    }

    /// Writes the CSV layout accepted by [`load_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = self.input_names.clone();
        header.push(if self.target_unit.is_empty() {
            self.target_name.clone()
        } else {
            format!("{}[{}]", self.target_name, self.target_unit)
        });
        w.write_record(&header)?;
        for (row, t) in self.inputs.row_iter().zip(self.targets.iter()) {
            let rec: Vec<String> = row.iter().chain(std::iter::once(t)).map(|v| format!("{v:?}")).collect();
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Reads a headered CSV whose last column is the target. A target header of
/// the form `name[unit]` sets the unit label.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.len() < 2 {
        return Err(parse_err(
            1,
            format!("header needs at least one input and one target column, found {}", header.len()),
        ));
    }
    let width = header.len();
    let dim = width - 1;

    let mut values = Vec::new();
    let mut targets = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("ragged row: expected {width} fields, found {}", record.len()),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric cell `{cell}` in column {}", j + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite cell `{cell}` in column {}", j + 1)));
            }
            if j < dim {
                values.push(v);
            } else {
                targets.push(v);
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }

    let input_names = header.iter().take(dim).map(str::to_owned).collect();
    let (target_name, target_unit) = split_unit(&header[dim]);
    Dataset::with_names(
        DMatrix::from_row_slice(targets.len(), dim, &values),
        DVector::from_vec(targets),
        input_names,
        target_name,
        target_unit,
    )
}

fn split_unit(name: &str) -> (String, String) {
    match (name.find('['), name.strip_suffix(']')) {
        (Some(open), Some(stripped)) if open > 0 => {
            (name[..open].trim().to_owned(), stripped[open + 1..].trim().to_owned())
        }
        _ => (name.to_owned(), String::new()),
    }
}

/// Per-column affine map to zero mean and unit population variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    /// Fits on the rows of `inputs`; a column whose spread is negligible
    /// relative to its magnitude is rejected.
    pub fn fit(inputs: &DMatrix<f64>) -> Result<Self> {
        Self::fit_named(inputs, None)
    }

    fn fit_named(inputs: &DMatrix<f64>, names: Option<&[String]>) -> Result<Self> {
        let n = inputs.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter("cannot standardize zero rows".into()));
        }
        let mut means = Vec::with_capacity(inputs.ncols());
        let mut stds = Vec::with_capacity(inputs.ncols());
        for (j, col) in inputs.column_iter().enumerate() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            if !(std > 1e-12 * mean.abs().max(1.0)) {
                return Err(Error::ZeroVariance {
                    column: j,
                    name: names.map_or_else(|| format!("x{}", j + 1), |n| n[j].clone()),
                });
            }
            means.push(mean);
            stds.push(std);
        }
        Ok(Normalizer { means, stds })
    }

    pub fn dimension(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(inputs)?;
        let mut out = inputs.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }

    pub fn invert(&self, standardized: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(standardized)?;
        let mut out = standardized.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.apply(|v| *v = *v * s + m);
        }
        Ok(out)
    }

    fn check_dim(&self, inputs: &DMatrix<f64>) -> Result<()> {
        if inputs.ncols() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: inputs.ncols(),
            });
        }
        Ok(())
    }
}

/// Standardizes all inputs of `d`; targets are left untouched.
pub fn standardize(d: &Dataset) -> Result<(Dataset, Normalizer)> {
    let norm = Normalizer::fit_named(&d.inputs, Some(&d.input_names))?;
    let mut out = d.clone();
    out.inputs = norm.apply(&d.inputs)?;
    Ok((out, norm))
}

/// Row indices for one fit. The first `N` training indices are the kernel
/// centers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub center_idx: Vec<usize>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

pub fn training_count(n_centers: usize, m_ratio: f64) -> usize {
    (m_ratio * n_centers as f64).round() as usize
}

/// Draws `M = round(m_ratio * N)` training rows and `test_size` test rows
/// without replacement by a partial Fisher-Yates shuffle.
pub fn split(
    n_total: usize,
    n_centers: usize,
    m_ratio: f64,
    test_size: usize,
    seed: u64,
) -> Result<SplitIndices> {
    if n_centers == 0 {
        return Err(Error::InvalidParameter("number of centers must be positive".into()));
    }
    if !(m_ratio >= 1.0) || !m_ratio.is_finite() {
        return Err(Error::InvalidParameter(format!("m_ratio must be >= 1, got {m_ratio}")));
    }
    let m = training_count(n_centers, m_ratio);
    let required = m + test_size;
    if required > n_total {
        return Err(Error::InsufficientRows {
            required,
            available: n_total,
        });
    }

    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..n_total).collect();
    for i in 0..required {
        let j = rng.random_range(i..n_total);
        perm.swap(i, j);
    }
    Ok(SplitIndices {
        center_idx: perm[..n_centers].to_vec(),
        train_idx: perm[..m].to_vec(),
        test_idx: perm[m..required].to_vec(),
        seed,
    })
}

/// `V(x) = sum_i (1 - exp(-x_i/2))^2 + 0.1 sum_{i<j} x_i x_j`.
pub fn synth_potential_value(x: &[f64]) -> f64 {
    let morse: f64 = x.iter().map(|&xi| (1.0 - (-0.5 * xi).exp()).powi(2)).sum();
    let mut coupling = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            coupling += x[i] * x[j];
        }
    }
    morse + 0.1 * coupling
}

/// Uniform sample of the box `[-h, h]^D` labelled with
/// [`synth_potential_value`].
pub fn synth_potential(dim: usize, n_points: usize, seed: u64, box_halfwidth: f64) -> Result<Dataset> {
    if dim == 0 || n_points == 0 {
        return Err(Error::InvalidParameter("dimension and point count must be positive".into()));
    }
    if !(box_halfwidth > 0.0) || !box_halfwidth.is_finite() {
        return Err(Error::InvalidParameter(format!("box half-width must be positive, got {box_halfwidth}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(dim * n_points);
    let mut targets = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let start = values.len();
        for _ in 0..dim {
            values.push(rng.random_range(-box_halfwidth..=box_halfwidth));
        }
        targets.push(synth_potential_value(&values[start..]));
    }
    Dataset::new(
        DMatrix::from_row_slice(n_points, dim, &values),
        DVector::from_vec(targets),
    )
}
