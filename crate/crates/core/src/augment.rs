//! Mixup, adapted mixup and permanent relabeling.
//!
//! Adapted mixup pairs every sample with a partner drawn from the current
//! non-outliers only, and draws the mixing weight with a larger α for
//! detected outliers than for the rest. With no outliers at all every α is
//! zero and the batch passes through unchanged.

use std::collections::BTreeSet;

use rand::Rng;

use crate::data::{LabeledDataset, SampleId};
use crate::error::{arg, shape, Error, Result};
use crate::network::validate_label_rows;
use crate::numerics::{beta_sample, Matrix, SeededRng};

/// Mixing strengths for adapted mixup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixupPolicy {
    pub alpha_nonoutlier: f64,
    pub alpha_outlier: f64,
}

impl Default for MixupPolicy {
    fn default() -> Self {
        MixupPolicy {
            alpha_nonoutlier: 0.4,
            alpha_outlier: 32.0,
        }
    }
}

impl MixupPolicy {
    /// Known-outlier mode: interpolate only the outliers, keep the rest.
    pub fn outliers_only(alpha_outlier: f64) -> Self {
        MixupPolicy {
            alpha_nonoutlier: 0.0,
            alpha_outlier,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_nonoutlier >= 0.0 && self.alpha_outlier >= 0.0)
            || !self.alpha_nonoutlier.is_finite()
            || !self.alpha_outlier.is_finite()
        {
            return arg("mixup alphas must be finite and >= 0");
        }
        Ok(())
    }

    /// α for one sample; zero for everybody when nothing is flagged.
    pub fn alpha_for(&self, is_outlier: bool, any_outliers: bool) -> f64 {
        match (any_outliers, is_outlier) {
            (false, _) => 0.0,
            (true, true) => self.alpha_outlier,
            (true, false) => self.alpha_nonoutlier,
        }
    }
}

/// Where one mixed row came from: `λ · sample + (1 − λ) · partner`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Provenance {
    pub sample: SampleId,
    pub partner: SampleId,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedBatch {
    pub features: Matrix,
    pub labels: Matrix,
    pub provenance: Vec<Provenance>,
}

/// Convex combination of two samples and their labels.
pub fn mixup_pair(
    x_i: &[f64],
    y_i: &[f64],
    x_j: &[f64],
    y_j: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&lambda) {
        return arg(format!("mixing weight {lambda} outside [0, 1]"));
    }
    if x_i.len() != x_j.len() || y_i.len() != y_j.len() {
        return shape("mixup partners differ in feature or label width");
    }
    Ok((mix(x_i, x_j, lambda), mix(y_i, y_j, lambda)))
}

fn mix(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    if lambda == 1.0 {
        return a.to_vec();
    }
    a.iter().zip(b).map(|(u, v)| lambda * u + (1.0 - lambda) * v).collect()
}

/// Adapted mixup over one batch.
///
/// For each batch sample in order: λ ~ Beta(α, α) with α chosen by the
/// policy, then a partner drawn uniformly (with replacement) from `pool`.
pub fn adapted_mixup(
    dataset: &LabeledDataset,
    batch: &[SampleId],
    outliers: &BTreeSet<SampleId>,
    pool: &[SampleId],
    policy: &MixupPolicy,
    rng: &mut SeededRng,
) -> Result<MixedBatch> {
    policy.validate()?;
    let any = !outliers.is_empty();
    if any && pool.is_empty() {
        return Err(Error::Config(
            "outliers were flagged but no non-outlier is left to mix with".into(),
        ));
    }
    mix_batch(dataset, batch, pool, rng, |id| policy.alpha_for(outliers.contains(&id), any))
}

/// Plain mixup: one α for every sample, partners drawn uniformly from
/// `pool`.
pub fn mixup_batch(
    dataset: &LabeledDataset,
    batch: &[SampleId],
    pool: &[SampleId],
    alpha: f64,
    rng: &mut SeededRng,
) -> Result<MixedBatch> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return arg(format!("mixup alpha must be >= 0, got {alpha}"));
    }
    if pool.is_empty() && alpha > 0.0 {
        return arg("empty mixup partner pool");
    }
    mix_batch(dataset, batch, pool, rng, |_| alpha)
}

fn mix_batch(
    dataset: &LabeledDataset,
    batch: &[SampleId],
    pool: &[SampleId],
    rng: &mut SeededRng,
    alpha_of: impl Fn(SampleId) -> f64,
) -> Result<MixedBatch> {
    let rows = dataset.rows_of(batch)?;
    let pool_rows = dataset.rows_of(pool)?;
    let (x, y) = (dataset.features(), dataset.labels());
    let mut features = Vec::with_capacity(batch.len() * x.cols());
    let mut labels = Vec::with_capacity(batch.len() * y.cols());
    let mut provenance = Vec::with_capacity(batch.len());
    for (&id, &row) in batch.iter().zip(&rows) {
        let lambda = beta_sample(rng, alpha_of(id))?;
        let partner_row = if pool_rows.is_empty() {
            row
        } else {
            pool_rows[rng.gen_range(0..pool_rows.len())]
        };
        let (fx, fy) = mixup_pair(x.row(row), y.row(row), x.row(partner_row), y.row(partner_row), lambda)?;
        features.extend(fx);
        labels.extend(fy);
        provenance.push(Provenance {
            sample: id,
            partner: dataset.ids()[partner_row],
            lambda,
        });
    }
    Ok(MixedBatch {
        features: Matrix::from_vec(batch.len(), x.cols(), features)?,
        labels: Matrix::from_vec(batch.len(), y.cols(), labels)?,
        provenance,
    })
}

/// Permanently moves each listed label towards the model's prediction:
/// `y ← factor · y + (1 − factor) · q`. Row `k` of `predictions` belongs to
/// `ids[k]`.
pub fn relabel(dataset: &mut LabeledDataset, ids: &[SampleId], predictions: &Matrix, factor: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&factor) {
        return arg(format!("relabel factor {factor} outside [0, 1]"));
    }
    if predictions.rows() != ids.len() || predictions.cols() != dataset.class_count() {
        return shape(format!(
            "{:?} predictions for {} ids and {} classes",
            predictions.shape(),
            ids.len(),
            dataset.class_count()
        ));
    }
    validate_label_rows(predictions)?;
    let rows = dataset.rows_of(ids)?;
    for (k, &row) in rows.iter().enumerate() {
        let updated: Vec<f64> = dataset
            .labels()
            .row(row)
            .iter()
            .zip(predictions.row(k))
            .map(|(y, q)| (factor * y + (1.0 - factor) * q).clamp(0.0, 1.0))
            .collect();
        dataset.set_label(row, &updated)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::one_hot;
    use proptest::{prop_assert, proptest};

    fn dataset(n: usize) -> LabeledDataset {
        let x = Matrix::from_vec(n, 2, (0..2 * n).map(|i| i as f64).collect()).unwrap();
        LabeledDataset::from_classes(x, (0..n).map(|i| i % 2).collect(), 2).unwrap()
    }

    #[test]
    fn pair_endpoints_and_midpoint() {
        let (x, y) = mixup_pair(&[0.0, 2.0], &[1.0, 0.0], &[2.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert_eq!((x, y), (vec![0.0, 2.0], vec![1.0, 0.0]));
        let (x, y) = mixup_pair(&[0.0, 2.0], &[1.0, 0.0], &[2.0, 0.0], &[0.0, 1.0], 0.5).unwrap();
        assert_eq!((x, y), (vec![1.0, 1.0], vec![0.5, 0.5]));
        assert!(mixup_pair(&[0.0], &[1.0], &[0.0], &[1.0], 1.2).is_err());
        assert!(mixup_pair(&[0.0], &[1.0], &[0.0, 1.0], &[1.0], 0.2).is_err());
    }

    #[test]
    fn no_outliers_is_identity() {
        let ds = dataset(20);
        let ids: Vec<SampleId> = ds.ids().to_vec();
        let mut rng = SeededRng::new(1);
        let out = adapted_mixup(&ds, &ids, &BTreeSet::new(), &ids, &MixupPolicy::default(), &mut rng).unwrap();
        let (x, y) = ds.batch(&ids).unwrap();
        assert_eq!(out.features, x);
        assert_eq!(out.labels, y);
        assert!(out.provenance.iter().all(|p| p.lambda == 1.0));
    }

    #[test]
    fn empty_pool_with_outliers_is_config_error() {
        let ds = dataset(4);
        let outliers: BTreeSet<SampleId> = [0, 1, 2, 3].into_iter().collect();
        let err = adapted_mixup(&ds, &[0, 1], &outliers, &[], &MixupPolicy::default(), &mut SeededRng::new(1));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn partners_come_from_pool() {
        let ds = dataset(50);
        let outliers: BTreeSet<SampleId> = (0..10).collect();
        let pool: Vec<SampleId> = (10..50).collect();
        let mut rng = SeededRng::new(3);
        for _ in 0..20 {
            let batch: Vec<SampleId> = (0..50).collect();
            let out = adapted_mixup(&ds, &batch, &outliers, &pool, &MixupPolicy::default(), &mut rng).unwrap();
            assert!(out.provenance.iter().all(|p| p.partner >= 10));
            for (k, p) in out.provenance.iter().enumerate() {
                let (xi, xj) = (ds.features().row(p.sample as usize), ds.features().row(p.partner as usize));
                for c in 0..2 {
                    let expect = p.lambda * xi[c] + (1.0 - p.lambda) * xj[c];
                    assert_eq!(out.features.get(k, c), if p.lambda == 1.0 { xi[c] } else { expect });
                }
            }
        }
    }

    #[test]
    fn outlier_lambdas_follow_beta_32() {
        let ds = dataset(100);
        let outliers: BTreeSet<SampleId> = (0..100).step_by(2).collect();
        let pool: Vec<SampleId> = (1..100).step_by(2).collect();
        let mut rng = SeededRng::new(9);
        let mut lambdas = Vec::new();
        while lambdas.len() < 10_000 {
            let out = adapted_mixup(&ds, &(0..100).collect::<Vec<_>>(), &outliers, &pool, &MixupPolicy::default(), &mut rng)
                .unwrap();
            lambdas.extend(out.provenance.iter().filter(|p| p.sample % 2 == 0).map(|p| p.lambda));
        }
        let mean = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn relabel_hand_case_and_fixed_point() {
        let mut ds = dataset(2);
        let q = Matrix::from_rows(&[[0.2, 0.8]]).unwrap();
        relabel(&mut ds, &[0], &q, 0.6).unwrap();
        let y = ds.labels().row(0);
        assert!((y[0] - 0.68).abs() < 1e-12 && (y[1] - 0.32).abs() < 1e-12);

        let before = ds.labels().row(1).to_vec();
        let same = Matrix::from_rows(std::slice::from_ref(&before)).unwrap();
        relabel(&mut ds, &[1], &same, 0.6).unwrap();
        assert_eq!(ds.labels().row(1), before.as_slice());

        assert!(relabel(&mut ds, &[7], &q, 0.6).is_err());
        assert!(relabel(&mut ds, &[0], &q, 1.5).is_err());
    }

    #[test]
    fn repeated_relabel_contracts_towards_prediction() {
        let mut ds = dataset(2);
        let q = Matrix::from_rows(&[[0.3, 0.7]]).unwrap();
        let dist = |ds: &LabeledDataset| (ds.labels().get(0, 0) - 0.3).abs();
        let mut last = dist(&ds);
        for _ in 0..30 {
            relabel(&mut ds, &[0], &q, 0.6).unwrap();
            let now = dist(&ds);
            assert!((now - 0.6 * last).abs() < 1e-12);
            last = now;
        }
        assert!(last < 1e-6);
    }

    proptest! {
        #[test]
        fn mixed_labels_stay_on_simplex(a in 0.0f64..1.0, b in 0.0f64..1.0, lambda in 0.0f64..=1.0) {
            let (_, y) = mixup_pair(&[0.0], &[a, 1.0 - a], &[1.0], &[b, 1.0 - b], lambda).unwrap();
            prop_assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn thousand_random_pairs_stay_distributions() {
        let mut rng = SeededRng::new(12);
        let mut rows = Vec::new();
        for _ in 0..1000 {
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = w.iter().sum();
            let yi: Vec<f64> = w.iter().map(|v| v / total).collect();
            let yj = one_hot(&[rng.gen_range(0..3)], 3).unwrap().row(0).to_vec();
            let lambda: f64 = rng.gen_range(0.0..=1.0);
            rows.push(mixup_pair(&[0.0], &yi, &[0.0], &yj, lambda).unwrap().1);
        }
        validate_label_rows(&Matrix::from_rows(&rows).unwrap()).unwrap();
    }
}
