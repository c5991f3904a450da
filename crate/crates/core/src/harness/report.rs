//! Aggregation of metrics files into summary tables and per-epoch curves.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mean_std;
use crate::outlier::NoiseAssumption;

use super::config::Strategy;
use super::metrics::{read_jsonl_file, write_summary_csv};
use super::train::{EpochRecord, SummaryRow};

/// Mean over repeats of one epoch of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub strategy: Strategy,
    pub noise_ratio: f64,
    pub assumed: NoiseAssumption,
    pub epoch: usize,
    pub repeats: usize,
    pub train_acc_mean: f64,
    pub train_acc_std: f64,
    pub test_acc_mean: f64,
    pub test_acc_std: f64,
    pub outliers_mean: f64,
    pub mislabeled_in_outliers_mean: f64,
    pub correct_in_outliers_mean: f64,
    pub cumulative_outliers_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub curves: Vec<CurvePoint>,
}

type RunKey = (Strategy, u64, NoiseAssumption);

/// Groups records by (strategy, noise ratio, assumption), then by
/// (seed, repeat). Every repeat must cover epochs `1..=E` exactly once.
pub fn report(records: &[EpochRecord]) -> Result<Report> {
    let mut runs: BTreeMap<RunKey, BTreeMap<(u64, usize), Vec<&EpochRecord>>> = BTreeMap::new();
    for r in records {
        for (name, v) in [("train_acc", r.train_acc), ("test_acc", r.test_acc)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Schema(format!("{name} {v} outside [0, 1] in epoch {}", r.epoch)));
            }
        }
        runs.entry((r.strategy, r.noise_ratio.to_bits(), r.assumed))
            .or_default()
            .entry((r.seed, r.repeat))
            .or_default()
            .push(r);
    }

    let mut summary = Vec::new();
    let mut curves = Vec::new();
    for ((strategy, ratio_bits, assumed), repeats) in runs {
        let noise_ratio = f64::from_bits(ratio_bits);
        let mut series: Vec<Vec<&EpochRecord>> = Vec::new();
        for ((seed, repeat), mut epochs) in repeats {
            epochs.sort_by_key(|e| e.epoch);
            if epochs.iter().enumerate().any(|(i, e)| e.epoch != i + 1) {
                return Err(Error::Schema(format!(
                    "{strategy} noise {noise_ratio} seed {seed} repeat {repeat}: epochs are not 1..={}",
                    epochs.len()
                )));
            }
            series.push(epochs);
        }
        let finals: Vec<f64> = series.iter().map(|s| s.last().expect("non-empty").test_acc).collect();
        let (mean_acc, std_acc) = mean_std(&finals);
        summary.push(SummaryRow {
            strategy,
            noise_ratio,
            assumed,
            mean_acc,
            std_acc,
            repeats: finals.len(),
        });

        let longest = series.iter().map(Vec::len).max().unwrap_or(0);
        for epoch in 1..=longest {
            let at: Vec<&EpochRecord> = series.iter().filter_map(|s| s.get(epoch - 1).copied()).collect();
            let stat = |f: fn(&EpochRecord) -> f64| mean_std(&at.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (train_acc_mean, train_acc_std) = stat(|r| r.train_acc);
            let (test_acc_mean, test_acc_std) = stat(|r| r.test_acc);
            curves.push(CurvePoint {
                strategy,
                noise_ratio,
                assumed,
                epoch,
                repeats: at.len(),
                train_acc_mean,
                train_acc_std,
                test_acc_mean,
                test_acc_std,
                outliers_mean: stat(|r| r.outliers as f64).0,
                mislabeled_in_outliers_mean: stat(|r| r.mislabeled_in_outliers as f64).0,
                correct_in_outliers_mean: stat(|r| r.correct_in_outliers as f64).0,
                cumulative_outliers_mean: stat(|r| r.cumulative_outliers as f64).0,
            });
        }
    }
    Ok(Report { summary, curves })
}

pub fn report_files<P: AsRef<Path>>(paths: &[P]) -> Result<Report> {
    let mut records = Vec::new();
    for p in paths {
        records.extend(read_jsonl_file::<EpochRecord>(p)?);
    }
    if records.is_empty() {
        return Err(Error::Schema("no epoch records in the given files".into()));
    }
    report(&records)
}

/// Writes `summary.csv`, `curves.csv` and `report.json` into `dir`.
pub fn write_report(dir: impl AsRef<Path>, report: &Report) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_summary_csv(fs::File::create(dir.join("summary.csv"))?, &report.summary)?;
    let mut curves = csv::Writer::from_path(dir.join("curves.csv")).map_err(|e| Error::Io(e.into()))?;
    for c in &report.curves {
        curves.serialize(c).map_err(|e| Error::Io(e.into()))?;
    }
    curves.flush()?;
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    fs::write(dir.join("report.json"), json)?;
    Ok(())
}
