use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::numerics::SeededRng;

use super::dataset::{LabeledDataset, SampleId};

/// Which samples had their label flipped, and how.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub noise_ratio: f64,
    /// Flipped ids in ascending order.
    pub flipped: Vec<SampleId>,
    pub seed: u64,
}

/// Flips exactly `round(ratio · n)` uniformly chosen samples to a uniformly
/// chosen different class. Ground truth is kept.
pub fn inject_symmetric_noise(
    dataset: &LabeledDataset,
    ratio: f64,
    rng: &mut SeededRng,
) -> Result<(LabeledDataset, NoiseRecord)> {
    if !(0.0..0.5).contains(&ratio) {
        return arg(format!(
            "noise ratio {ratio} outside [0, 0.5): mislabeled samples must stay a minority"
        ));
    }
    let truth = match dataset.ground_truth() {
        Some(gt) => gt.to_vec(),
        None => return arg("noise injection needs ground-truth labels"),
    };
    let n = dataset.len();
    let count = (ratio * n as f64).round() as usize;
    let seed = rng.seed();
    let mut rows = index::sample(rng, n, count).into_vec();
    rows.sort_unstable();

    let classes = dataset.class_count();
    let mut out = dataset.clone();
    for &row in &rows {
        let current = truth[row];
        let mut target = rng.gen_range(0..classes - 1);
        if target >= current {
            target += 1;
        }
        let mut label = vec![0.0; classes];
        label[target] = 1.0;
        out.set_label(row, &label)?;
    }
    let mut flipped: Vec<SampleId> = rows.iter().map(|&r| dataset.ids()[r]).collect();
    flipped.sort_unstable();
    Ok((
        out,
        NoiseRecord {
            noise_ratio: ratio,
            flipped,
            seed,
        },
    ))
}

/// Random disjoint split; the test part holds `⌊fraction · n⌋` samples.
/// Both parts keep the original row order.
pub fn split(
    dataset: &LabeledDataset,
    test_fraction: f64,
    rng: &mut SeededRng,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return arg(format!("test fraction {test_fraction} outside (0, 1)"));
    }
    let n = dataset.len();
    let test_size = (test_fraction * n as f64 + 1e-9).floor() as usize;
    let mut test_rows = index::sample(rng, n, test_size).into_vec();
    test_rows.sort_unstable();
    let mut in_test = vec![false; n];
    for &r in &test_rows {
        in_test[r] = true;
    }
    let train_rows: Vec<usize> = (0..n).filter(|&r| !in_test[r]).collect();
    Ok((dataset.select_rows(&train_rows), dataset.select_rows(&test_rows)))
}
