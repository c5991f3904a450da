//! Grids of experiment cells and the sensitivity tables built from them.

use std::fmt::Write as _;
use std::path::Path;

use log::error;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::outlier::NoiseAssumption;

use super::config::{ExperimentConfig, Strategy};
use super::train::{load_base, train_on, RunMetrics, SummaryRow};

/// Every combination of strategy × noise ratio × assumption, sharing all
/// other settings with `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteGrid {
    pub base: ExperimentConfig,
    pub strategies: Vec<Strategy>,
    pub noise_ratios: Vec<f64>,
    pub assumed: Vec<NoiseAssumption>,
}

const GRID_KEYS: [&str; 3] = ["strategies", "noise_ratios", "assumed_levels"];

impl SuiteGrid {
    /// Noise assumed massive while the actual ratio is 0–20 %.
    pub fn overestimated(base: ExperimentConfig) -> SuiteGrid {
        SuiteGrid {
            base,
            strategies: vec![Strategy::Mixup, Strategy::MixAllOutlier, Strategy::MixAllOutlierRelabel],
            noise_ratios: vec![0.0, 0.1, 0.2],
            assumed: vec![NoiseAssumption::Massive],
        }
    }

    /// Noise assumed little or medium while the actual ratio is 20–40 %.
    pub fn underestimated(base: ExperimentConfig) -> SuiteGrid {
        SuiteGrid {
            base,
            strategies: vec![Strategy::Mixup, Strategy::MixOutlier],
            noise_ratios: vec![0.2, 0.3, 0.4],
            assumed: vec![NoiseAssumption::Little, NoiseAssumption::Medium],
        }
    }

    /// Reads a flat TOML document: every experiment key plus `strategies`,
    /// `noise_ratios` and `assumed_levels` lists.
    pub fn from_toml_str(text: &str) -> Result<SuiteGrid> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut take = |key: &str| table.remove(key);
        let strategies = take("strategies");
        let ratios = take("noise_ratios");
        let assumed = take("assumed_levels");
        let base: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        fn list<T: serde::de::DeserializeOwned>(v: Option<toml::Value>, key: &str, default: Vec<T>) -> Result<Vec<T>> {
            match v {
                None => Ok(default),
                Some(v) => v.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}"))),
            }
        }
        Ok(SuiteGrid {
            strategies: list(strategies, GRID_KEYS[0], vec![base.strategy])?,
            noise_ratios: list(ratios, GRID_KEYS[1], vec![base.noise_ratio])?,
            assumed: list(assumed, GRID_KEYS[2], vec![base.assumed_noise])?,
            base,
        })
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<SuiteGrid> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.noise_ratios.is_empty() || self.assumed.is_empty() {
            return Err(Error::Config("suite grid needs at least one strategy, noise ratio and assumption".into()));
        }
        self.cells().iter().try_for_each(ExperimentConfig::validate)
    }

    /// Cells in strategy-major order.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            for &noise_ratio in &self.noise_ratios {
                for &assumed_noise in &self.assumed {
                    out.push(ExperimentConfig {
                        strategy,
                        noise_ratio,
                        assumed_noise,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct CellOutcome {
    pub config: ExperimentConfig,
    pub result: std::result::Result<RunMetrics, String>,
}

#[derive(Debug)]
pub struct SuiteResult {
    pub cells: Vec<CellOutcome>,
}

impl SuiteResult {
    /// Summary rows of the successful cells, in grid order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        self.cells
            .iter()
            .filter_map(|c| c.result.as_ref().ok().map(RunMetrics::summary))
            .collect()
    }

    pub fn failures(&self) -> Vec<(&ExperimentConfig, &str)> {
        self.cells
            .iter()
            .filter_map(|c| c.result.as_ref().err().map(|e| (&c.config, e.as_str())))
            .collect()
    }

    /// Markdown table: one row per (assumption, strategy), one column per
    /// actual noise ratio, cells `mean ± std` in percent.
    pub fn sensitivity_table(&self) -> String {
        let mut ratios: Vec<f64> = Vec::new();
        let mut rows: Vec<(NoiseAssumption, Strategy)> = Vec::new();
        for c in &self.cells {
            if !ratios.contains(&c.config.noise_ratio) {
                ratios.push(c.config.noise_ratio);
            }
            let key = (c.config.assumed_noise, c.config.strategy);
            if !rows.contains(&key) {
                rows.push(key);
            }
        }
        rows.sort();
        let mut out = String::from("| assumed | strategy |");
        for r in &ratios {
            let _ = write!(out, " {:.0} % |", r * 100.0);
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---|".repeat(ratios.len()));
        out.push('\n');
        for (assumed, strategy) in rows {
            let _ = write!(out, "| {assumed} | {strategy} |");
            for &r in &ratios {
                let cell = self.cells.iter().find(|c| {
                    c.config.assumed_noise == assumed && c.config.strategy == strategy && c.config.noise_ratio == r
                });
                let text = match cell.map(|c| &c.result) {
                    Some(Ok(m)) => {
                        let s = m.summary();
                        format!("{:.0} ± {:.0} %", s.mean_acc * 100.0, s.std_acc * 100.0)
                    }
                    Some(Err(_)) => "failed".into(),
                    None => "".into(),
                };
                let _ = write!(out, " {text} |");
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every cell. A failing cell is recorded and the others continue.
pub fn run_suite(grid: &SuiteGrid, exec: Execution) -> Result<SuiteResult> {
    grid.validate()?;
    let base = load_base(&grid.base)?;
    let configs = grid.cells();
    let results = exec.map(&configs, |cfg| {
        train_on(cfg, &base, exec).map_err(|e| {
            error!("cell {} noise {} assumed {} failed: {e}", cfg.strategy, cfg.noise_ratio, cfg.assumed_noise);
            e.to_string()
        })
    });
    Ok(SuiteResult {
        cells: configs
            .into_iter()
            .zip(results)
            .map(|(config, result)| CellOutcome { config, result })
            .collect(),
    })
}
