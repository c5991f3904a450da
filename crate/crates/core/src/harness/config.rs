use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::MixupPolicy;
use crate::error::{Error, Result};
use crate::outlier::{DetectionConfig, NoiseAssumption};

/// How the training material of an epoch is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Raw data.
    Erm,
    /// Mixup over random pairs with the α of the assumed noise level.
    Mixup,
    /// Raw data without this epoch's outliers.
    DeleteOutlier,
    /// Adapted mixup with this epoch's outliers.
    MixOutlier,
    /// Adapted mixup with every sample ever flagged.
    MixAllOutlier,
    /// As `MixAllOutlier`, and flagged labels drift towards the prediction.
    MixAllOutlierRelabel,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Erm,
        Strategy::Mixup,
        Strategy::DeleteOutlier,
        Strategy::MixOutlier,
        Strategy::MixAllOutlier,
        Strategy::MixAllOutlierRelabel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Erm => "erm",
            Strategy::Mixup => "mixup",
            Strategy::DeleteOutlier => "delete-outlier",
            Strategy::MixOutlier => "mix-outlier",
            Strategy::MixAllOutlier => "mix-all-outlier",
            Strategy::MixAllOutlierRelabel => "mix-all-outlier-relabel",
        }
    }

    /// Whether the strategy runs outlier detection every epoch.
    pub fn uses_detection(self) -> bool {
        !matches!(self, Strategy::Erm | Strategy::Mixup)
    }

    pub fn is_cumulative(self) -> bool {
        matches!(self, Strategy::MixAllOutlier | Strategy::MixAllOutlierRelabel)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', '+'], "-");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown strategy `{s}`; expected one of {}",
                    Strategy::ALL.map(Strategy::name).join(", ")
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    /// Generated sensor windows.
    SynthBdd,
    /// IDX digit files regrouped into two classes.
    Mnist,
    /// A dataset cache written by `generate-data` / `inject-noise`.
    Cache,
    /// A sensor table cut into windows.
    Csv,
}

/// Full description of one experiment cell. Serialises to a flat key-value
/// document; every key has a same-named command line flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Cache file or CSV table, depending on `dataset`.
    pub data_path: Option<PathBuf>,
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    /// Digits up to this value form class 0.
    pub last_class0_digit: u8,
    /// Random subset of the source data; 0 keeps everything.
    pub subset: usize,
    pub synth_class_sizes: Vec<usize>,
    pub synth_patterns: Vec<usize>,
    pub synth_signal: f64,
    /// Standard deviation of the per-sensor noise.
    pub synth_noise: f64,
    pub sensor_columns: Vec<String>,
    pub window: usize,
    pub fault_column: String,
    /// Per-feature standardisation fitted on the training split.
    pub standardize: bool,
    pub test_fraction: f64,

    pub hidden_widths: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub entropy_weight: f64,

    pub strategy: Strategy,
    pub noise_ratio: f64,
    pub assumed_noise: NoiseAssumption,
    pub min_iqr: f64,
    pub alpha_nonoutlier: f64,
    pub alpha_outlier: f64,
    pub relabel_factor: f64,
    /// Relabel every sample instead of only the accumulated outliers.
    pub relabel_all: bool,
    /// Replace detection by the true mislabeled set (α = 0 for the rest).
    pub oracle_outliers: bool,

    pub seed: u64,
    pub repeats: usize,
}

impl Default for ExperimentConfig {
    /// Synthetic sensor data with the five-layer network.
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::SynthBdd,
            data_path: None,
            mnist_images: None,
            mnist_labels: None,
            last_class0_digit: 4,
            subset: 0,
            synth_class_sizes: vec![623, 624],
            synth_patterns: vec![1, 3],
            synth_signal: 1.0,
            synth_noise: 0.3,
            sensor_columns: Vec::new(),
            window: 30,
            fault_column: "fault".into(),
            standardize: true,
            test_fraction: 0.2,
            hidden_widths: vec![256, 128, 64, 16],
            lr: 1e-4,
            batch_size: 16,
            epochs: 30,
            entropy_weight: 0.1,
            strategy: Strategy::Erm,
            noise_ratio: 0.0,
            assumed_noise: NoiseAssumption::Little,
            min_iqr: 1e-4,
            alpha_nonoutlier: 0.4,
            alpha_outlier: 32.0,
            relabel_factor: 0.6,
            relabel_all: false,
            oracle_outliers: false,
            seed: 0,
            repeats: 5,
        }
    }
}

impl ExperimentConfig {
    /// Binary digits with the four-layer network.
    pub fn mnist(images: impl Into<PathBuf>, labels: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Mnist,
            mnist_images: Some(images.into()),
            mnist_labels: Some(labels.into()),
            standardize: false,
            hidden_widths: vec![128, 32, 10],
            lr: 1e-3,
            batch_size: 64,
            epochs: 40,
            ..ExperimentConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn detection(&self) -> DetectionConfig {
        DetectionConfig {
            min_iqr: self.min_iqr,
            cap_fraction: self.assumed_noise.upper_threshold(),
        }
    }

    pub fn mixup_policy(&self) -> MixupPolicy {
        if self.oracle_outliers {
            MixupPolicy::outliers_only(self.alpha_outlier)
        } else {
            MixupPolicy {
                alpha_nonoutlier: self.alpha_nonoutlier,
                alpha_outlier: self.alpha_outlier,
            }
        }
    }

    /// Rejects inconsistent settings before any work starts.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..0.5).contains(&self.noise_ratio) {
            return fail(format!(
                "noise_ratio {} must lie in [0, 0.5): mislabeled samples must stay a minority",
                self.noise_ratio
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.repeats == 0 {
            return fail("epochs, batch_size and repeats must be positive".into());
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.entropy_weight >= 0.0) {
            return fail(format!("entropy_weight must be >= 0, got {}", self.entropy_weight));
        }
        if !(self.min_iqr > 0.0) {
            return fail(format!("min_iqr must be positive, got {}", self.min_iqr));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return fail(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        if !(0.0..=1.0).contains(&self.relabel_factor) {
            return fail(format!("relabel_factor {} outside [0, 1]", self.relabel_factor));
        }
        if self.hidden_widths.contains(&0) {
            return fail("hidden widths must be positive".into());
        }
        if self.alpha_nonoutlier < 0.0 || self.alpha_outlier < 0.0 {
            return fail("mixup alphas must be >= 0".into());
        }
        if self.oracle_outliers && !self.strategy.uses_detection() {
            return fail(format!("oracle_outliers needs an outlier-based strategy, not {}", self.strategy));
        }
        if self.relabel_all && self.strategy != Strategy::MixAllOutlierRelabel {
            return fail("relabel_all only applies to mix-all-outlier-relabel".into());
        }
        match self.dataset {
            DatasetSource::Mnist if self.mnist_images.is_none() || self.mnist_labels.is_none() => {
                fail("dataset = mnist needs mnist_images and mnist_labels".into())
            }
            DatasetSource::Mnist if self.last_class0_digit > 8 => {
                fail("last_class0_digit must leave digits for class 1".into())
            }
            DatasetSource::Cache | DatasetSource::Csv if self.data_path.is_none() => {
                fail("this dataset source needs data_path".into())
            }
            DatasetSource::Csv if self.sensor_columns.is_empty() || self.window == 0 => {
                fail("dataset = csv needs sensor_columns and a positive window".into())
            }
            DatasetSource::SynthBdd
                if self.synth_class_sizes.len() < 2
                    || self.synth_patterns.len() != self.synth_class_sizes.len() =>
            {
                fail("synth_class_sizes and synth_patterns must list the same classes".into())
            }
            _ => Ok(()),
        }
    }
}
