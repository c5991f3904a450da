use std::collections::BTreeSet;

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::{adapted_mixup, mixup_batch, relabel};
use crate::data::{
    binarize_mnist, inject_symmetric_noise, load_idx, read_dataset, split, synth_bdd, window_csv, DigitGrouping,
    LabeledDataset, NoiseRecord, SampleId, Standardizer, SynthConfig, WindowLabels, WindowSpec,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::network::{argmax, train_step, AdamState, LossSpec, Mlp};
use crate::numerics::{mean_std, SeededRng, Stream};
use crate::outlier::{detect_on_dataset, LayerWhisker, OutlierReport};

use super::config::{DatasetSource, ExperimentConfig, Strategy};
use crate::outlier::NoiseAssumption;

const EVAL_CHUNK: usize = 512;

/// One line of a metrics file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochRecord {
    pub strategy: Strategy,
    pub noise_ratio: f64,
    pub assumed: NoiseAssumption,
    pub seed: u64,
    pub repeat: usize,
    pub epoch: usize,
    /// Mean batch loss over the epoch, measured before each update.
    pub train_loss: f64,
    /// Agreement with the stored (noisy, possibly relabeled) labels.
    pub train_acc: f64,
    /// Agreement with the ground truth of the held-out split.
    pub test_acc: f64,
    /// This epoch's outliers per observed class.
    pub outliers_per_class: Vec<usize>,
    pub outliers: usize,
    pub mislabeled_in_outliers: usize,
    pub correct_in_outliers: usize,
    /// Samples flagged in this or any earlier epoch.
    pub cumulative_outliers: usize,
    /// Truly mislabeled samples among the cumulative outliers.
    pub cumulative_mislabeled: usize,
    /// Truly mislabeled samples in the training split.
    pub mislabeled_total: usize,
}

/// One line of an outlier-detection trace: one class in one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdTraceRecord {
    pub strategy: Strategy,
    pub noise_ratio: f64,
    pub assumed: NoiseAssumption,
    pub seed: u64,
    pub repeat: usize,
    pub epoch: usize,
    pub class: usize,
    pub size: usize,
    pub cap: usize,
    pub raw_outliers: usize,
    pub flagged: usize,
    pub skipped: bool,
    /// Per-layer bounds; empty for skipped classes.
    pub whiskers: Vec<LayerWhisker>,
    pub mislabeled: usize,
    pub correct: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepeatMetrics {
    pub repeat: usize,
    pub noise: NoiseRecord,
    pub epochs: Vec<EpochRecord>,
    pub od_trace: Vec<OdTraceRecord>,
}

impl RepeatMetrics {
    pub fn final_test_acc(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.test_acc)
    }

    pub fn final_train_acc(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.train_acc)
    }
}

/// Mean and population standard deviation of the final test accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub noise_ratio: f64,
    pub assumed: NoiseAssumption,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub repeats: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub config: ExperimentConfig,
    pub repeats: Vec<RepeatMetrics>,
}

impl RunMetrics {
    pub fn summary(&self) -> SummaryRow {
        let finals: Vec<f64> = self.repeats.iter().map(RepeatMetrics::final_test_acc).collect();
        let (mean_acc, std_acc) = mean_std(&finals);
        SummaryRow {
            strategy: self.config.strategy,
            noise_ratio: self.config.noise_ratio,
            assumed: self.config.assumed_noise,
            mean_acc,
            std_acc,
            repeats: finals.len(),
        }
    }

    /// Epoch records of all repeats, repeat-major.
    pub fn epoch_records(&self) -> impl Iterator<Item = &EpochRecord> {
        self.repeats.iter().flat_map(|r| r.epochs.iter())
    }

    pub fn od_records(&self) -> impl Iterator<Item = &OdTraceRecord> {
        self.repeats.iter().flat_map(|r| r.od_trace.iter())
    }
}

/// Builds the full dataset named by the config, before any split or noise.
pub fn load_base(config: &ExperimentConfig) -> Result<LabeledDataset> {
    let root = SeededRng::new(config.seed);
    let base = match config.dataset {
        DatasetSource::SynthBdd => synth_bdd(&SynthConfig {
            seed: root.substream(Stream::Data).seed(),
            class_sizes: config.synth_class_sizes.clone(),
            patterns_per_class: config.synth_patterns.clone(),
            signal: config.synth_signal,
            noise: config.synth_noise,
            ..SynthConfig::default()
        })?,
        DatasetSource::Mnist => {
            let (images, labels) = match (&config.mnist_images, &config.mnist_labels) {
                (Some(i), Some(l)) => (i, l),
                _ => return Err(Error::Config("mnist_images and mnist_labels are required".into())),
            };
            let raw = load_idx(images, labels)?;
            binarize_mnist(
                &raw,
                DigitGrouping {
                    last_class0_digit: config.last_class0_digit,
                },
            )?
        }
        DatasetSource::Cache => read_dataset(required_path(config)?)?,
        DatasetSource::Csv => window_csv(
            required_path(config)?,
            &WindowSpec {
                sensor_columns: config.sensor_columns.clone(),
                window: config.window,
                labels: WindowLabels::FaultFlag(config.fault_column.clone()),
            },
        )?,
    };
    if config.subset == 0 || config.subset >= base.len() {
        return Ok(base);
    }
    let mut rng = root.substream(Stream::Subset);
    let mut rows = rand::seq::index::sample(&mut rng, base.len(), config.subset).into_vec();
    rows.sort_unstable();
    let ids: Vec<SampleId> = rows.iter().map(|&r| base.ids()[r]).collect();
    base.subset(&ids)
}

fn required_path(config: &ExperimentConfig) -> Result<&std::path::Path> {
    config
        .data_path
        .as_deref()
        .ok_or_else(|| Error::Config("data_path is required for this dataset".into()))
}

/// Train/test split, optional standardisation and noise for one repeat.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub noise: NoiseRecord,
}

pub fn prepare(config: &ExperimentConfig, base: &LabeledDataset, repeat: usize) -> Result<PreparedData> {
    let rng = SeededRng::new(config.seed).child(repeat as u64);
    let (mut train, mut test) = split(base, config.test_fraction, &mut rng.substream(Stream::Split))?;
    if config.standardize {
        let st = Standardizer::fit(train.features());
        st.apply_to(&mut train)?;
        st.apply_to(&mut test)?;
    }
    let (train, noise) = inject_symmetric_noise(&train, config.noise_ratio, &mut rng.substream(Stream::Noise))?;
    if test.ground_truth().is_none() {
        return Err(Error::Config("test accuracy needs ground-truth labels".into()));
    }
    Ok(PreparedData { train, test, noise })
}

/// Runs every repeat of `config`; repeats are independent and evaluated with
/// `exec`.
pub fn train(config: &ExperimentConfig, exec: Execution) -> Result<RunMetrics> {
    config.validate()?;
    let base = load_base(config)?;
    train_on(config, &base, exec)
}

/// As [`train`] with an already loaded base dataset.
pub fn train_on(config: &ExperimentConfig, base: &LabeledDataset, exec: Execution) -> Result<RunMetrics> {
    train_with_model(config, base, exec).map(|(m, _)| m)
}

/// As [`train_on`], also returning the final model of repeat 0.
pub fn train_with_model(config: &ExperimentConfig, base: &LabeledDataset, exec: Execution) -> Result<(RunMetrics, Mlp)> {
    config.validate()?;
    let repeats: Vec<usize> = (0..config.repeats).collect();
    let mut outcomes = exec.try_map(&repeats, |&r| {
        let data = prepare(config, base, r)?;
        let (metrics, model) = run_repeat(config, &data, r, exec)?;
        Ok::<_, Error>((metrics, (r == 0).then_some(model)))
    })?;
    let first = outcomes[0].1.take().expect("repeat 0 keeps its model");
    Ok((
        RunMetrics {
            config: config.clone(),
            repeats: outcomes.into_iter().map(|(m, _)| m).collect(),
        },
        first,
    ))
}

/// Trains one model. Returns the metrics and the final model.
pub fn run_repeat(
    config: &ExperimentConfig,
    data: &PreparedData,
    repeat: usize,
    exec: Execution,
) -> Result<(RepeatMetrics, Mlp)> {
    let rng = SeededRng::new(config.seed).child(repeat as u64);
    let mut widths = vec![data.train.feature_count()];
    widths.extend(&config.hidden_widths);
    widths.push(data.train.class_count());
    let mut model = Mlp::new_random(&widths, &mut rng.substream(Stream::Init))?;
    let mut adam = AdamState::new(&model, config.lr);
    let mut shuffle_rng = rng.substream(Stream::Shuffle);
    let mut mixup_rng = rng.substream(Stream::Mixup);
    let spec = LossSpec {
        entropy_weight: config.entropy_weight,
    };
    spec.validate()?;
    let detection = config.detection();
    let policy = config.mixup_policy();

    // only the relabel variant ever writes to this copy
    let mut od = data.train.clone();
    let all_ids: Vec<SampleId> = od.ids().to_vec();
    let mislabeled: BTreeSet<SampleId> = od.mislabeled_ids().into_iter().collect();
    let truth_test = data.test.ground_truth().expect("checked in prepare").to_vec();
    let mut cumulative: BTreeSet<SampleId> = BTreeSet::new();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut od_trace = Vec::new();

    for epoch in 1..=config.epochs {
        let observed_class: Vec<usize> = od.hard_labels();
        let (current, report): (BTreeSet<SampleId>, Option<OutlierReport>) = if !config.strategy.uses_detection() {
            (BTreeSet::new(), None)
        } else if config.oracle_outliers {
            (mislabeled.clone(), None)
        } else {
            let report = detect_on_dataset(&model, &od, &detection, exec)?;
            for w in &report.warnings {
                warn!("epoch {epoch}: {w}");
            }
            (report.outlier_set(), Some(report))
        };
        cumulative.extend(current.iter().copied());

        let mut per_class = vec![0usize; od.class_count()];
        let mut per_class_bad = vec![0usize; od.class_count()];
        for &id in &current {
            let c = observed_class[od.row_of(id).expect("outliers come from the dataset")];
            per_class[c] += 1;
            per_class_bad[c] += usize::from(mislabeled.contains(&id));
        }
        if let Some(report) = &report {
            for outcome in &report.classes {
                od_trace.push(OdTraceRecord {
                    strategy: config.strategy,
                    noise_ratio: config.noise_ratio,
                    assumed: config.assumed_noise,
                    seed: config.seed,
                    repeat,
                    epoch,
                    class: outcome.class,
                    size: outcome.size,
                    cap: outcome.cap,
                    raw_outliers: outcome.raw_outliers,
                    flagged: outcome.flagged,
                    skipped: outcome.skipped,
                    whiskers: report
                        .whiskers_for(outcome.class)
                        .map(|w| w.layers.clone())
                        .unwrap_or_default(),
                    mislabeled: per_class_bad[outcome.class],
                    correct: per_class[outcome.class] - per_class_bad[outcome.class],
                });
            }
        }

        if config.strategy == Strategy::MixAllOutlierRelabel {
            let targets: Vec<SampleId> = if config.relabel_all {
                all_ids.clone()
            } else {
                cumulative.iter().copied().collect()
            };
            if !targets.is_empty() {
                let (x, _) = od.batch(&targets)?;
                let q = predict_chunked(&model, &x)?;
                relabel(&mut od, &targets, &q, config.relabel_factor)?;
            }
        }

        let mixing_set = if config.strategy.is_cumulative() { &cumulative } else { &current };
        let pool: Vec<SampleId> = all_ids.iter().copied().filter(|id| !mixing_set.contains(id)).collect();
        let mut order: Vec<SampleId> = match config.strategy {
            Strategy::DeleteOutlier => pool.clone(),
            _ => all_ids.clone(),
        };
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            let (x, y) = match config.strategy {
                Strategy::Erm | Strategy::DeleteOutlier => od.batch(batch)?,
                Strategy::Mixup => {
                    let m = mixup_batch(&od, batch, &all_ids, config.assumed_noise.mixup_alpha(), &mut mixup_rng)?;
                    (m.features, m.labels)
                }
                Strategy::MixOutlier | Strategy::MixAllOutlier | Strategy::MixAllOutlierRelabel => {
                    let m = adapted_mixup(&od, batch, mixing_set, &pool, &policy, &mut mixup_rng)?;
                    (m.features, m.labels)
                }
            };
            loss_sum += train_step(&mut model, &mut adam, &x, &y, &spec)?;
            batches += 1;
        }
        if !model.layers().iter().all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite())) {
            return Err(Error::Argument(format!(
                "weights became non-finite in epoch {epoch}; lower the learning rate"
            )));
        }

        let train_acc = accuracy(&model, &od, &od.hard_labels())?;
        let test_acc = accuracy(&model, &data.test, &truth_test)?;
        let bad = current.iter().filter(|id| mislabeled.contains(id)).count();
        let record = EpochRecord {
            strategy: config.strategy,
            noise_ratio: config.noise_ratio,
            assumed: config.assumed_noise,
            seed: config.seed,
            repeat,
            epoch,
            train_loss: if batches == 0 { 0.0 } else { loss_sum / batches as f64 },
            train_acc,
            test_acc,
            outliers_per_class: per_class,
            outliers: current.len(),
            mislabeled_in_outliers: bad,
            correct_in_outliers: current.len() - bad,
            cumulative_outliers: cumulative.len(),
            cumulative_mislabeled: cumulative.iter().filter(|id| mislabeled.contains(id)).count(),
            mislabeled_total: mislabeled.len(),
        };
        debug!(
            "repeat {repeat} epoch {epoch}: loss {:.4} train {:.4} test {:.4} |O| {}",
            record.train_loss, train_acc, test_acc, record.outliers
        );
        epochs.push(record);
    }
    info!(
        "{} noise {} assumed {} repeat {repeat}: final test accuracy {:.4}",
        config.strategy,
        config.noise_ratio,
        config.assumed_noise,
        epochs.last().map_or(0.0, |e| e.test_acc)
    );
    Ok((
        RepeatMetrics {
            repeat,
            noise: data.noise.clone(),
            epochs,
            od_trace,
        },
        model,
    ))
}

fn predict_chunked(model: &Mlp, x: &crate::numerics::Matrix) -> Result<crate::numerics::Matrix> {
    if x.rows() <= EVAL_CHUNK {
        return model.predict(x);
    }
    let mut out = Vec::with_capacity(x.rows() * model.class_count());
    let rows: Vec<usize> = (0..x.rows()).collect();
    for chunk in rows.chunks(EVAL_CHUNK) {
        out.extend_from_slice(model.predict(&x.select_rows(chunk))?.as_slice());
    }
    crate::numerics::Matrix::from_vec(x.rows(), model.class_count(), out)
}

/// Fraction of rows whose predicted class equals `targets`.
pub fn accuracy(model: &Mlp, dataset: &LabeledDataset, targets: &[usize]) -> Result<f64> {
    if dataset.is_empty() {
        return Ok(0.0);
    }
    let q = predict_chunked(model, dataset.features())?;
    let hits = q.row_iter().zip(targets).filter(|(row, &t)| argmax(row) == t).count();
    Ok(hits as f64 / dataset.len() as f64)
}
