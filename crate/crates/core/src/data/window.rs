//! Multivariate sensor tables cut into fixed-length windows.

use std::io::Read;
use std::path::Path;

use crate::error::{arg, Error, Result};
use crate::numerics::Matrix;

use super::dataset::LabeledDataset;

/// How each window gets its class.
#[derive(Clone, Debug, PartialEq)]
pub enum WindowLabels {
    /// One class per window, in window order.
    PerWindow(Vec<usize>),
    /// A 0/1 column; a window is faulty (class 1) when any of its rows is
    /// flagged.
    FaultFlag(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSpec {
    pub sensor_columns: Vec<String>,
    /// Rows per window.
    pub window: usize,
    pub labels: WindowLabels,
}

impl WindowSpec {
    /// Half-hour windows of minute readings from fifteen sensors.
    pub fn half_hour(sensor_columns: Vec<String>, labels: WindowLabels) -> Self {
        WindowSpec {
            sensor_columns,
            window: 30,
            labels,
        }
    }
}

pub fn window_csv(path: impl AsRef<Path>, spec: &WindowSpec) -> Result<LabeledDataset> {
    window_csv_reader(std::fs::File::open(path)?, spec)
}

/// Reads a comma-separated table with a header row and turns every
/// `spec.window` consecutive rows into one sample. Features are laid out
/// time-major: `row t, sensor s → t · sensors + s`. No standardisation is
/// applied here; see [`Standardizer`].
pub fn window_csv_reader<R: Read>(reader: R, spec: &WindowSpec) -> Result<LabeledDataset> {
    if spec.window == 0 || spec.sensor_columns.is_empty() {
        return arg("window length and sensor list must be non-empty");
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| table_error(1, 0, e.to_string()))?
        .clone();
    let locate = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| table_error(1, 0, format!("missing column `{name}`")))
    };
    let sensor_idx: Vec<usize> = spec.sensor_columns.iter().map(|c| locate(c)).collect::<Result<_>>()?;
    let flag_idx = match &spec.labels {
        WindowLabels::FaultFlag(name) => Some(locate(name)?),
        WindowLabels::PerWindow(_) => None,
    };

    let mut values = Vec::new();
    let mut flags = Vec::new();
    let mut rows = 0usize;
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| table_error(line, 0, e.to_string()))?;
        for &c in &sensor_idx {
            values.push(parse_cell(&record, line, c)?);
        }
        if let Some(c) = flag_idx {
            flags.push(parse_cell(&record, line, c)? != 0.0);
        }
        rows += 1;
    }
    if rows == 0 || !rows.is_multiple_of(spec.window) {
        return arg(format!(
            "{rows} rows do not split into whole windows of {}",
            spec.window
        ));
    }
    let n = rows / spec.window;
    let width = spec.window * sensor_idx.len();
    let classes = match &spec.labels {
        WindowLabels::PerWindow(classes) => {
            if classes.len() != n {
                return arg(format!("{} window labels for {n} windows", classes.len()));
            }
            classes.clone()
        }
        WindowLabels::FaultFlag(_) => flags
            .chunks(spec.window)
            .map(|w| usize::from(w.iter().any(|&f| f)))
            .collect(),
    };
    let class_count = classes.iter().max().map_or(2, |&m| (m + 1).max(2));
    LabeledDataset::from_classes(Matrix::from_vec(n, width, values)?, classes, class_count)
}

fn parse_cell(record: &csv::StringRecord, line: usize, col: usize) -> Result<f64> {
    let cell = record
        .get(col)
        .ok_or_else(|| table_error(line, col + 1, "missing cell".into()))?;
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(table_error(line, col + 1, format!("`{cell}` is not a finite number"))),
    }
}

fn table_error(row: usize, col: usize, message: String) -> Error {
    Error::Table { row, col, message }
}

/// Per-feature affine standardisation fitted on one dataset and applied to
/// others unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero deviations are replaced by 1.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &Matrix) -> Standardizer {
        let n = features.rows().max(1) as f64;
        let mean: Vec<f64> = features.column_sums().into_iter().map(|s| s / n).collect();
        let mut var = vec![0.0; features.cols()];
        for row in features.row_iter() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, features: &mut Matrix) -> Result<()> {
        if features.cols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "standardiser fitted on {} features, got {}",
                self.mean.len(),
                features.cols()
            )));
        }
        for r in 0..features.rows() {
            for ((x, m), s) in features.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / s;
            }
        }
        Ok(())
    }

    pub fn apply_to(&self, dataset: &mut LabeledDataset) -> Result<()> {
        self.apply(dataset.features_mut())
    }
}
