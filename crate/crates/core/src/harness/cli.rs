//! Command line front end.
//!
//! Every key of the flat config file has a flag of the same name
//! (`--batch-size` or `--batch_size`); flags override the file.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::data::{inject_symmetric_noise, read_dataset, write_dataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::network::write_checkpoint;
use crate::numerics::{SeededRng, Stream};
use crate::outlier::NoiseAssumption;

use super::config::{DatasetSource, ExperimentConfig, Strategy};
use super::metrics::{write_jsonl_file, write_summary_csv};
use super::report::{report_files, write_report};
use super::suite::{run_suite, SuiteGrid};
use super::train::{load_base, train_on, train_with_model};

#[derive(Debug, Parser)]
#[command(name = "odmix", version, about = "Training under label noise with outlier detection and adapted mixup")]
pub struct Cli {
    /// Evaluate repeats, grid cells and gradient shards on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the base dataset named by the config and write it as a cache file.
    GenerateData {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flip a fraction of the labels of a cached dataset.
    InjectNoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, alias = "noise_ratio")]
        noise_ratio: f64,
        #[arg(long)]
        seed: u64,
        /// Where to write the list of flipped ids as JSON.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Train one configuration for the requested number of repeats.
    Train {
        #[command(flatten)]
        run: RequiredRunArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// JSON-lines file, one record per epoch and repeat.
        #[arg(long)]
        metrics: PathBuf,
        /// CSV summary of the final test accuracy.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// JSON-lines outlier trace, one record per epoch and class.
        #[arg(long)]
        od_trace: Option<PathBuf>,
        /// Final model of the first repeat.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run a grid of configurations.
    Suite {
        /// Flat TOML with experiment keys plus `strategies`, `noise_ratios`
        /// and `assumed_levels`.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Start from one of the sensitivity layouts instead of a grid file.
        #[arg(long, value_parser = ["overestimated", "underestimated"], conflicts_with = "grid")]
        preset: Option<String>,
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<Strategy>>,
        #[arg(long, alias = "noise_ratios", value_delimiter = ',')]
        noise_ratios: Option<Vec<f64>>,
        #[arg(long, alias = "assumed_levels", value_delimiter = ',')]
        assumed_levels: Option<Vec<NoiseAssumption>>,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        summary: PathBuf,
        /// Markdown pivot of the grid.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Directory for one metrics file per cell.
        #[arg(long)]
        metrics_dir: Option<PathBuf>,
    },
    /// Train and write only the outlier-detection trace.
    OdTrace {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate metrics files into summary, curves and a JSON bundle.
    Report {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// The run-defining keys, mandatory for `train`.
#[derive(Debug, Args)]
pub struct RequiredRunArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub repeats: usize,
    #[arg(long)]
    pub strategy: Strategy,
    #[arg(long, alias = "noise_ratio")]
    pub noise_ratio: f64,
    #[arg(long, alias = "assumed_noise")]
    pub assumed_noise: NoiseAssumption,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long, alias = "noise_ratio")]
    pub noise_ratio: Option<f64>,
    #[arg(long, alias = "assumed_noise")]
    pub assumed_noise: Option<NoiseAssumption>,
}

impl From<&RequiredRunArgs> for RunArgs {
    fn from(r: &RequiredRunArgs) -> Self {
        RunArgs {
            seed: Some(r.seed),
            repeats: Some(r.repeats),
            strategy: Some(r.strategy),
            noise_ratio: Some(r.noise_ratio),
            assumed_noise: Some(r.assumed_noise),
        }
    }
}

/// Config file plus per-key overrides.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat TOML config; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_source)]
    pub dataset: Option<DatasetSource>,
    #[arg(long, alias = "data_path")]
    pub data_path: Option<PathBuf>,
    #[arg(long, alias = "mnist_images")]
    pub mnist_images: Option<PathBuf>,
    #[arg(long, alias = "mnist_labels")]
    pub mnist_labels: Option<PathBuf>,
    #[arg(long, alias = "last_class0_digit")]
    pub last_class0_digit: Option<u8>,
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long, alias = "synth_class_sizes", value_delimiter = ',')]
    pub synth_class_sizes: Option<Vec<usize>>,
    #[arg(long, alias = "synth_patterns", value_delimiter = ',')]
    pub synth_patterns: Option<Vec<usize>>,
    #[arg(long, alias = "synth_signal")]
    pub synth_signal: Option<f64>,
    #[arg(long, alias = "synth_noise")]
    pub synth_noise: Option<f64>,
    #[arg(long, alias = "sensor_columns", value_delimiter = ',')]
    pub sensor_columns: Option<Vec<String>>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, alias = "fault_column")]
    pub fault_column: Option<String>,
    #[arg(long)]
    pub standardize: Option<bool>,
    #[arg(long, alias = "test_fraction")]
    pub test_fraction: Option<f64>,
    #[arg(long, alias = "hidden_widths", value_delimiter = ',')]
    pub hidden_widths: Option<Vec<usize>>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, alias = "batch_size")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, alias = "entropy_weight")]
    pub entropy_weight: Option<f64>,
    #[arg(long, alias = "min_iqr")]
    pub min_iqr: Option<f64>,
    #[arg(long, alias = "alpha_nonoutlier")]
    pub alpha_nonoutlier: Option<f64>,
    #[arg(long, alias = "alpha_outlier")]
    pub alpha_outlier: Option<f64>,
    #[arg(long, alias = "relabel_factor")]
    pub relabel_factor: Option<f64>,
    #[arg(long, alias = "relabel_all")]
    pub relabel_all: Option<bool>,
    #[arg(long, alias = "oracle_outliers")]
    pub oracle_outliers: Option<bool>,
}

fn parse_source(s: &str) -> std::result::Result<DatasetSource, String> {
    match s {
        "synth-bdd" | "synth_bdd" => Ok(DatasetSource::SynthBdd),
        "mnist" => Ok(DatasetSource::Mnist),
        "cache" => Ok(DatasetSource::Cache),
        "csv" => Ok(DatasetSource::Csv),
        other => Err(format!("unknown dataset `{other}` (synth-bdd|mnist|cache|csv)")),
    }
}

macro_rules! override_fields {
    ($cfg:ident, $args:ident; $($field:ident),* $(,)?) => {
        $(if let Some(v) = &$args.$field { $cfg.$field = v.clone().into(); })*
    };
}

impl ConfigArgs {
    pub fn resolve(&self, run: &RunArgs) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml_file(path)?,
            None => ExperimentConfig::default(),
        };
        self.apply(&mut cfg, run);
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig, run: &RunArgs) {
        let args = self;
        override_fields!(cfg, args;
            dataset, last_class0_digit, subset, synth_class_sizes, synth_patterns, synth_signal, synth_noise,
            sensor_columns, window, fault_column, standardize, test_fraction, hidden_widths, lr,
            batch_size, epochs, entropy_weight, min_iqr, alpha_nonoutlier, alpha_outlier,
            relabel_factor, relabel_all, oracle_outliers,
        );
        for (slot, v) in [
            (&mut cfg.data_path, &self.data_path),
            (&mut cfg.mnist_images, &self.mnist_images),
            (&mut cfg.mnist_labels, &self.mnist_labels),
        ] {
            if v.is_some() {
                *slot = v.clone();
            }
        }
        let args = run;
        override_fields!(cfg, args; seed, repeats, strategy, noise_ratio, assumed_noise);
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::GenerateData { run, config, out } => {
            let cfg = config.resolve(&run)?;
            let base = load_base(&cfg)?;
            write_dataset(&out, &base)?;
            info!("wrote {} samples to {}", base.len(), out.display());
        }
        Command::InjectNoise {
            input,
            out,
            noise_ratio,
            seed,
            record,
        } => {
            let ds = read_dataset(&input)?;
            let mut rng = SeededRng::new(seed).substream(Stream::Noise);
            let (noisy, rec) = inject_symmetric_noise(&ds, noise_ratio, &mut rng)?;
            write_dataset(&out, &noisy)?;
            if let Some(path) = record {
                let mut json = serde_json::to_vec(&rec)?;
                json.push(b'\n');
                fs::write(path, json)?;
            }
            info!("flipped {} of {} labels", rec.flipped.len(), ds.len());
        }
        Command::Train {
            run,
            config,
            metrics,
            summary,
            od_trace,
            checkpoint,
        } => {
            let cfg = config.resolve(&RunArgs::from(&run))?;
            cfg.validate()?;
            let base = load_base(&cfg)?;
            let (result, model) = train_with_model(&cfg, &base, exec)?;
            write_jsonl_file(&metrics, result.epoch_records())?;
            if let Some(path) = summary {
                write_summary_csv(fs::File::create(path)?, &[result.summary()])?;
            }
            if let Some(path) = od_trace {
                write_jsonl_file(path, result.od_records())?;
            }
            if let Some(path) = checkpoint {
                write_checkpoint(fs::File::create(path)?, &model, None)?;
            }
            let s = result.summary();
            println!(
                "{} noise {} assumed {}: test accuracy {:.4} ± {:.4} over {} repeats",
                s.strategy, s.noise_ratio, s.assumed, s.mean_acc, s.std_acc, s.repeats
            );
        }
        Command::Suite {
            grid,
            preset,
            strategies,
            noise_ratios,
            assumed_levels,
            run,
            config,
            summary,
            table,
            metrics_dir,
        } => {
            let mut suite = match (&grid, preset.as_deref()) {
                (Some(path), _) => SuiteGrid::from_toml_file(path)?,
                (None, Some("overestimated")) => SuiteGrid::overestimated(config.resolve(&run)?),
                (None, Some(_)) => SuiteGrid::underestimated(config.resolve(&run)?),
                (None, None) => {
                    let base = config.resolve(&run)?;
                    SuiteGrid {
                        strategies: vec![base.strategy],
                        noise_ratios: vec![base.noise_ratio],
                        assumed: vec![base.assumed_noise],
                        base,
                    }
                }
            };
            if grid.is_some() {
                config.apply(&mut suite.base, &run);
            }
            if let Some(v) = strategies {
                suite.strategies = v;
            }
            if let Some(v) = noise_ratios {
                suite.noise_ratios = v;
            }
            if let Some(v) = assumed_levels {
                suite.assumed = v;
            }
            let result = run_suite(&suite, exec)?;
            write_summary_csv(fs::File::create(&summary)?, &result.summary())?;
            if let Some(path) = table {
                fs::write(path, result.sensitivity_table())?;
            }
            if let Some(dir) = metrics_dir {
                fs::create_dir_all(&dir)?;
                for cell in &result.cells {
                    if let Ok(m) = &cell.result {
                        let c = &cell.config;
                        let name = format!("{}_{}_{}.jsonl", c.strategy, c.noise_ratio, c.assumed_noise);
                        write_jsonl_file(dir.join(name), m.epoch_records())?;
                    }
                }
            }
            print!("{}", result.sensitivity_table());
            let failures = result.failures();
            for (cfg, err) in &failures {
                eprintln!("failed: {} noise {} assumed {}: {err}", cfg.strategy, cfg.noise_ratio, cfg.assumed_noise);
            }
            if !failures.is_empty() && failures.len() == result.cells.len() {
                return Err(Error::Config("every suite cell failed".into()));
            }
        }
        Command::OdTrace { run, config, out } => {
            let cfg = config.resolve(&run)?;
            if !cfg.strategy.uses_detection() || cfg.oracle_outliers {
                return Err(Error::Config(format!(
                    "od-trace needs a detecting strategy without oracle outliers, got {}",
                    cfg.strategy
                )));
            }
            cfg.validate()?;
            let base = load_base(&cfg)?;
            let result = train_on(&cfg, &base, exec)?;
            write_jsonl_file(&out, result.od_records())?;
        }
        Command::Report { metrics, out_dir } => {
            let rep = report_files(&metrics)?;
            write_report(&out_dir, &rep)?;
            for s in &rep.summary {
                println!(
                    "{} noise {} assumed {}: {:.4} ± {:.4} ({} repeats)",
                    s.strategy, s.noise_ratio, s.assumed, s.mean_acc, s.std_acc, s.repeats
                );
            }
        }
    }
    Ok(())
}
