use crate::error::{arg, Result};

/// Linear-interpolation order statistic.
///
/// With the values sorted ascending and `r = (n - 1) q`, returns
/// `v[⌊r⌋] + (r - ⌊r⌋)(v[⌊r⌋ + 1] - v[⌊r⌋])`.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return arg("percentile of an empty list");
    }
    if !(0.0..=1.0).contains(&q) {
        return arg(format!("quantile {q} outside [0, 1]"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return arg("percentile input contains non-finite values");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(interpolate_sorted(&sorted, q))
}

pub(crate) fn interpolate_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = (sorted.len() - 1) as f64 * q;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    match sorted.get(lo + 1) {
        Some(&hi) if frac > 0.0 => sorted[lo] + frac * (hi - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Mean and population standard deviation. `(NaN, NaN)` for an empty slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
