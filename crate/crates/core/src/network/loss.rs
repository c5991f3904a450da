use crate::error::{arg, shape, Result};
use crate::numerics::Matrix;

use super::mlp::ForwardTrace;

/// Smallest argument passed to `ln`.
pub const LOG_FLOOR: f64 = 1e-12;

/// Composite training objective: cross-entropy against the (soft) labels
/// plus `entropy_weight` times the entropy of the prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub entropy_weight: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            entropy_weight: 0.1,
        }
    }
}

impl LossSpec {
    pub fn cross_entropy_only() -> Self {
        LossSpec { entropy_weight: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.entropy_weight >= 0.0) || !self.entropy_weight.is_finite() {
            return arg(format!(
                "entropy weight must be finite and >= 0, got {}",
                self.entropy_weight
            ));
        }
        Ok(())
    }
}

/// Checks that every row is a probability distribution.
pub fn validate_label_rows(labels: &Matrix) -> Result<()> {
    for (i, row) in labels.row_iter().enumerate() {
        if row.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)) {
            return arg(format!("label row {i} has entries outside [0, 1]"));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return arg(format!("label row {i} sums to {s}"));
        }
    }
    Ok(())
}

fn check(trace: &ForwardTrace, labels: &Matrix, spec: &LossSpec) -> Result<()> {
    spec.validate()?;
    if labels.shape() != trace.q.shape() {
        return shape(format!(
            "labels {:?} against predictions {:?}",
            labels.shape(),
            trace.q.shape()
        ));
    }
    validate_label_rows(labels)
}

/// Per-sample loss values.
pub fn sample_losses(trace: &ForwardTrace, labels: &Matrix, spec: &LossSpec) -> Result<Vec<f64>> {
    check(trace, labels, spec)?;
    Ok(trace
        .q
        .row_iter()
        .zip(labels.row_iter())
        .map(|(q, y)| {
            let mut ce = 0.0;
            let mut ent = 0.0;
            for (&qc, &yc) in q.iter().zip(y) {
                let lq = qc.max(LOG_FLOOR).ln();
                ce -= yc * lq;
                ent -= qc * lq;
            }
            ce + spec.entropy_weight * ent
        })
        .collect())
}

/// Batch mean of the composite loss.
pub fn loss(trace: &ForwardTrace, labels: &Matrix, spec: &LossSpec) -> Result<f64> {
    let per = sample_losses(trace, labels, spec)?;
    Ok(per.iter().sum::<f64>() / per.len().max(1) as f64)
}

/// Gradient of each sample's own loss with respect to the output
/// pre-activations (no batch averaging).
pub fn output_delta(trace: &ForwardTrace, labels: &Matrix, spec: &LossSpec) -> Result<Matrix> {
    check(trace, labels, spec)?;
    let p = trace.scores();
    let classes = p.cols();
    let mut delta = Matrix::zeros(p.rows(), classes);
    let mut g = vec![0.0; classes];
    for i in 0..p.rows() {
        let (pi, qi, yi) = (p.row(i), trace.q.row(i), labels.row(i));
        let sum_p: f64 = pi.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        // dL/dq
        for c in 0..classes {
            let live = qi[c] >= LOG_FLOOR;
            let lq = qi[c].max(LOG_FLOOR).ln();
            let ce = if live { -yi[c] / qi[c] } else { 0.0 };
            let ent = -lq - if live { 1.0 } else { 0.0 };
            g[c] = ce + spec.entropy_weight * ent;
        }
        // through q = p / Σp, then the logistic
        let gq: f64 = g.iter().zip(qi).map(|(a, b)| a * b).sum();
        let out = delta.row_mut(i);
        for k in 0..classes {
            out[k] = (g[k] - gq) / sum_p * pi[k] * (1.0 - pi[k]);
        }
    }
    Ok(delta)
}
