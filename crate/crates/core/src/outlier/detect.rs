use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SampleId;
use crate::error::{arg, Error, Result};
use crate::numerics::stats::interpolate_sorted;

use super::gradients::GradientSummary;

/// Coarse prior on the label-noise level. Fixes the largest fraction of a
/// class that may be flagged and the mixup α used for the plain mixup
/// baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseAssumption {
    /// Below 10 % noise.
    Little,
    /// 10 % up to 30 %.
    Medium,
    /// 30 % up to 50 %.
    Massive,
}

impl NoiseAssumption {
    pub const ALL: [NoiseAssumption; 3] = [NoiseAssumption::Little, NoiseAssumption::Medium, NoiseAssumption::Massive];

    pub fn upper_threshold(self) -> f64 {
        match self {
            NoiseAssumption::Little => 0.10,
            NoiseAssumption::Medium => 0.30,
            NoiseAssumption::Massive => 0.50,
        }
    }

    pub fn mixup_alpha(self) -> f64 {
        match self {
            NoiseAssumption::Little => 0.4,
            NoiseAssumption::Medium => 8.0,
            NoiseAssumption::Massive => 32.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseAssumption::Little => "little",
            NoiseAssumption::Medium => "medium",
            NoiseAssumption::Massive => "massive",
        }
    }
}

impl fmt::Display for NoiseAssumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseAssumption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "little" => Ok(NoiseAssumption::Little),
            "medium" => Ok(NoiseAssumption::Medium),
            "massive" => Ok(NoiseAssumption::Massive),
            other => arg(format!("unknown noise assumption `{other}` (little|medium|massive)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionConfig {
    /// Lower clamp on the interquartile range.
    pub min_iqr: f64,
    /// Largest fraction of a class that may be flagged.
    pub cap_fraction: f64,
}

impl DetectionConfig {
    pub fn for_assumption(assumption: NoiseAssumption) -> Self {
        DetectionConfig {
            min_iqr: 1e-4,
            cap_fraction: assumption.upper_threshold(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_iqr > 0.0) || !self.min_iqr.is_finite() {
            return arg(format!("min_iqr must be positive, got {}", self.min_iqr));
        }
        if !(self.cap_fraction > 0.0 && self.cap_fraction <= 0.5) {
            return arg(format!("cap fraction {} outside (0, 0.5]", self.cap_fraction));
        }
        Ok(())
    }
}

/// Largest number of samples that may be flagged in a class of `size`.
pub fn outlier_cap(cap_fraction: f64, size: usize) -> usize {
    // the epsilon keeps e.g. 0.3 · 10 from rounding up to 4
    (cap_fraction * size as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Summaries that share one observed class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSummaries {
    pub class: usize,
    pub summaries: Vec<GradientSummary>,
}

/// Groups summaries by `class_of(sample_id)`, classes ascending, summaries in
/// input order.
pub fn group_by_class(
    summaries: Vec<GradientSummary>,
    class_count: usize,
    class_of: impl Fn(SampleId) -> usize,
) -> Vec<ClassSummaries> {
    let mut groups: Vec<ClassSummaries> = (0..class_count)
        .map(|class| ClassSummaries { class, summaries: Vec::new() })
        .collect();
    for s in summaries {
        groups[class_of(s.sample_id)].summaries.push(s);
    }
    groups
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerWhisker {
    pub p25: f64,
    pub p75: f64,
    /// After the `min_iqr` clamp.
    pub iqr: f64,
    pub low: f64,
    pub high: f64,
}

impl LayerWhisker {
    fn from_values(values: &mut [f64], min_iqr: f64) -> LayerWhisker {
        values.sort_by(f64::total_cmp);
        let p25 = interpolate_sorted(values, 0.25);
        let p75 = interpolate_sorted(values, 0.75);
        let iqr = (p75 - p25).max(min_iqr);
        LayerWhisker {
            p25,
            p75,
            iqr,
            low: p25 - 1.5 * iqr,
            high: p75 + 1.5 * iqr,
        }
    }

    /// Distance outside the whiskers in IQR units; 0 inside.
    pub fn exceedance(&self, value: f64) -> f64 {
        if value < self.low {
            (self.low - value) / self.iqr
        } else if value > self.high {
            (value - self.high) / self.iqr
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhiskerBounds {
    pub class: usize,
    pub layers: Vec<LayerWhisker>,
}

/// Per-class bookkeeping of one detection pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassOutcome {
    pub class: usize,
    pub size: usize,
    /// Samples outside the whiskers in at least one layer.
    pub raw_outliers: usize,
    pub cap: usize,
    /// Samples kept as outliers after the cap.
    pub flagged: usize,
    /// Too few samples to estimate quartiles; nothing flagged.
    pub skipped: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub mislabeled: usize,
    pub correct: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutlierReport {
    /// Flagged ids, ascending.
    pub outliers: Vec<SampleId>,
    /// All other ids, ascending.
    pub consistent: Vec<SampleId>,
    pub whiskers: Vec<WhiskerBounds>,
    pub classes: Vec<ClassOutcome>,
    /// Deviation score of each flagged id, same order as `outliers`.
    pub scores: Vec<f64>,
    pub composition: Option<Composition>,
    pub warnings: Vec<String>,
}

impl OutlierReport {
    pub fn outlier_set(&self) -> BTreeSet<SampleId> {
        self.outliers.iter().copied().collect()
    }

    pub fn is_outlier(&self, id: SampleId) -> bool {
        self.outliers.binary_search(&id).is_ok()
    }

    /// Splits the flagged ids into truly mislabeled and correctly labeled.
    pub fn attach_composition(&mut self, is_mislabeled: impl Fn(SampleId) -> bool) {
        let mislabeled = self.outliers.iter().filter(|&&id| is_mislabeled(id)).count();
        self.composition = Some(Composition {
            mislabeled,
            correct: self.outliers.len() - mislabeled,
        });
    }

    pub fn whiskers_for(&self, class: usize) -> Option<&WhiskerBounds> {
        self.whiskers.iter().find(|w| w.class == class)
    }
}

/// Per-class, per-layer whisker test over layer-mean gradient summaries.
///
/// For every class and layer the quartiles are taken by linear
/// interpolation, the IQR is clamped to at least `min_iqr` and the whiskers
/// sit 1.5 IQR beyond the quartiles. A sample outside the whiskers in any
/// layer is a raw outlier with score `max_l exceedance / IQR`. Each class
/// keeps at most `⌈cap_fraction · size⌉` raw outliers, highest score first
/// (ties by ascending id). Classes with fewer than 4 samples are skipped
/// with a warning.
pub fn detect_outliers(groups: &[ClassSummaries], config: &DetectionConfig) -> Result<OutlierReport> {
    config.validate()?;
    let mut outliers: Vec<(SampleId, f64)> = Vec::new();
    let mut consistent = Vec::new();
    let mut whiskers = Vec::new();
    let mut classes = Vec::new();
    let mut warnings = Vec::new();

    for group in groups {
        let size = group.summaries.len();
        let cap = outlier_cap(config.cap_fraction, size);
        if size < 4 {
            if size > 0 {
                let msg = format!("class {} has {size} samples; outlier detection skipped", group.class);
                log::warn!("{msg}");
                warnings.push(msg);
            }
            consistent.extend(group.summaries.iter().map(|s| s.sample_id));
            classes.push(ClassOutcome { class: group.class, size, raw_outliers: 0, cap, flagged: 0, skipped: true });
            continue;
        }
        let depth = group.summaries[0].layer_means.len();
        if group.summaries.iter().any(|s| s.layer_means.len() != depth) {
            return arg(format!("class {} mixes summaries of different depth", group.class));
        }
        if group.summaries.iter().any(|s| s.layer_means.iter().any(|v| !v.is_finite())) {
            return arg(format!("class {} has non-finite gradient summaries", group.class));
        }
        let layers: Vec<LayerWhisker> = (0..depth)
            .map(|l| {
                let mut values: Vec<f64> = group.summaries.iter().map(|s| s.layer_means[l]).collect();
                LayerWhisker::from_values(&mut values, config.min_iqr)
            })
            .collect();

        let mut raw: Vec<(SampleId, f64)> = Vec::new();
        for s in &group.summaries {
            let score = s
                .layer_means
                .iter()
                .zip(&layers)
                .map(|(&v, w)| w.exceedance(v))
                .fold(0.0, f64::max);
            if score > 0.0 {
                raw.push((s.sample_id, score));
            } else {
                consistent.push(s.sample_id);
            }
        }
        let raw_count = raw.len();
        raw.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (kept, entry) in raw.into_iter().enumerate() {
            if kept < cap {
                outliers.push(entry);
            } else {
                consistent.push(entry.0);
            }
        }
        classes.push(ClassOutcome {
            class: group.class,
            size,
            raw_outliers: raw_count,
            cap,
            flagged: raw_count.min(cap),
            skipped: false,
        });
        whiskers.push(WhiskerBounds { class: group.class, layers });
    }

    outliers.sort_by_key(|e| e.0);
    consistent.sort_unstable();
    Ok(OutlierReport {
        scores: outliers.iter().map(|e| e.1).collect(),
        outliers: outliers.into_iter().map(|e| e.0).collect(),
        consistent,
        whiskers,
        classes,
        composition: None,
        warnings,
    })
}
