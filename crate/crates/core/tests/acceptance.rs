//! Acceptance checks. Prints one `criterion N: PASS|FAIL` line per check and
//! exits non-zero if any fails.
//!
//! Scaled-down runs: a 4000-image binary digit subset (seed 1, 5 repeats,
//! 40 epochs) and the synthetic sensor windows (seed 1, 5 repeats, 30 epochs).
//! Set `MNIST_DIR` to a directory with the four original IDX files to also
//! check the full-data class counts.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use common::{integer_cap, mnist5k, ScalarNet};
use odmix::data::{binarize_mnist, encode_idx_images, encode_idx_labels, load_idx, parse_idx, write_idx, DigitGrouping};
use odmix::harness::{load_base, train_on, ExperimentConfig, OdTraceRecord, RunMetrics, Strategy};
use odmix::network::{backward, LossSpec, Mlp};
use odmix::numerics::{beta_sample, Matrix, SeededRng};
use odmix::outlier::NoiseAssumption;
use odmix::{Error, Execution};
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

// ---------------------------------------------------------------- criterion 1

fn finite_differences() -> Outcome {
    let beta = 0.1;
    let spec = LossSpec { entropy_weight: beta };
    let mut rng = SeededRng::new(101);
    let mut worst: f64 = 0.0;
    for widths in [[3, 5, 2], [10, 8, 2]] {
        let model = Mlp::new_random(&widths, &mut rng).map_err(fail)?;
        let n = 6;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..widths[0]).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        // soft targets so both loss terms and every output take part
        let y: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let a: f64 = rng.gen_range(0.05..0.95);
                vec![a, 1.0 - a]
            })
            .collect();
        let trace = model.forward(&Matrix::from_rows(&x).map_err(fail)?).map_err(fail)?;
        let grads = backward(&model, &trace, &Matrix::from_rows(&y).map_err(fail)?, &spec).map_err(fail)?;

        let mut net = ScalarNet::from_mlp(&model);
        let mean_loss = |net: &ScalarNet| x.iter().zip(&y).map(|(xi, yi)| net.loss(xi, yi, beta)).sum::<f64>() / n as f64;
        let h = 1e-6;
        let mut compare = |analytic: f64, numeric: f64| {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        };
        for l in 0..net.depth() {
            for i in 0..net.w[l].len() {
                for j in 0..net.w[l][i].len() {
                    let orig = net.w[l][i][j];
                    net.w[l][i][j] = orig + h;
                    let up = mean_loss(&net);
                    net.w[l][i][j] = orig - h;
                    let down = mean_loss(&net);
                    net.w[l][i][j] = orig;
                    compare(grads.layers[l].weights.get(i, j), (up - down) / (2.0 * h));
                }
            }
            for j in 0..net.b[l].len() {
                let orig = net.b[l][j];
                net.b[l][j] = orig + h;
                let up = mean_loss(&net);
                net.b[l][j] = orig - h;
                let down = mean_loss(&net);
                net.b[l][j] = orig;
                compare(grads.layers[l].bias[j], (up - down) / (2.0 * h));
            }
        }
    }
    ensure(worst < 1e-4, format!("max relative error {worst:.2e} (< 1e-4), beta = {beta}"))
}

// ---------------------------------------------------------------- criterion 2

fn oracle_equivalence() -> Outcome {
    use odmix::outlier::{detect_outliers, layer_mean_gradients_with, ClassSummaries, DetectionConfig, GradientSummary};

    let mut rng = SeededRng::new(202);
    let mut worst: f64 = 0.0;
    for widths in [vec![3, 5, 2], vec![10, 8, 2], vec![20, 16, 8, 2]] {
        let model = Mlp::new_random(&widths, &mut rng).map_err(fail)?;
        let n = 64;
        let x = Matrix::from_vec(n, widths[0], (0..n * widths[0]).map(|_| rng.sample(StandardNormal)).collect())
            .map_err(fail)?;
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let ds = odmix::data::LabeledDataset::from_classes(x, labels, 2).map_err(fail)?;
        let fast = layer_mean_gradients_with(&model, &ds, ds.ids(), Execution::default()).map_err(fail)?;
        let oracle = ScalarNet::from_mlp(&model);
        for (row, s) in fast.iter().enumerate() {
            let slow = oracle.layer_means(ds.features().row(row), ds.hard_label(row));
            for (a, b) in s.layer_means.iter().zip(&slow) {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
    }
    if worst > 1e-10 {
        return Err(format!("layer means differ from brute force by {worst:.2e}"));
    }

    let (mut clamped, mut truncated) = (0, 0);
    for case in 0..50 {
        let depth = rng.gen_range(1..4);
        let min_iqr = [1e-4, 1e-2, 0.5][rng.gen_range(0..3)];
        let (num, den) = [(1, 10), (3, 10), (5, 10)][rng.gen_range(0..3)];
        let mut next = 0u64;
        let groups: Vec<ClassSummaries> = (0..2)
            .map(|class| {
                let size = rng.gen_range(0..50);
                let scale = [1e-6, 1e-3, 1.0][rng.gen_range(0..3)];
                let summaries = (0..size)
                    .map(|_| {
                        next += 1;
                        let layer_means = (0..depth)
                            .map(|_| {
                                let u: f64 = rng.gen();
                                if u < 0.12 {
                                    scale * rng.gen_range(-40.0..40.0)
                                } else if u < 0.2 {
                                    scale * 0.5
                                } else {
                                    scale * rng.sample::<f64, _>(StandardNormal)
                                }
                            })
                            .collect();
                        GradientSummary { sample_id: next, layer_means }
                    })
                    .collect();
                ClassSummaries { class, summaries }
            })
            .collect();
        let config = DetectionConfig { min_iqr, cap_fraction: num as f64 / den as f64 };
        let report = detect_outliers(&groups, &config).map_err(fail)?;
        let expected: Vec<_> = groups
            .iter()
            .map(|g| {
                let samples: Vec<(u64, Vec<f64>)> =
                    g.summaries.iter().map(|s| (s.sample_id, s.layer_means.clone())).collect();
                common::oracle_class(&samples, min_iqr, num, den)
            })
            .collect();
        if report.outlier_set() != common::union(&expected) {
            return Err(format!("fixture {case}: outlier set differs from oracle"));
        }
        truncated += expected.iter().filter(|e| e.raw > e.flagged.len()).count();
        clamped += report.whiskers.iter().flat_map(|w| &w.layers).filter(|l| l.p75 - l.p25 < min_iqr).count();
    }
    ensure(
        clamped > 0 && truncated > 0,
        format!("brute-force gap {worst:.1e}; 50 fixtures identical (clamped layers {clamped}, truncated classes {truncated})"),
    )
}

// ---------------------------------------------------------------- criterion 3

fn beta_statistics() -> Outcome {
    let mut rng = SeededRng::new(303);
    let mut parts = Vec::new();
    let mut ok = true;
    for alpha in [0.4, 8.0, 32.0] {
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| beta_sample(&mut rng, alpha)).collect::<Result<_, _>>().map_err(fail)?;
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let expected = 1.0 / (8.0 * alpha + 4.0);
        let rel = (var - expected).abs() / expected;
        ok &= (mean - 0.5).abs() <= 0.02 && rel <= 0.10;
        parts.push(format!("a={alpha}: mean {mean:.4} var {var:.5} (rel {:.1}%)", rel * 100.0));
    }
    let zero_ok = (0..1000).all(|_| beta_sample(&mut rng, 0.0).ok() == Some(1.0));
    ok &= zero_ok;
    parts.push(format!("a=0 always 1: {zero_ok}"));
    ensure(ok, parts.join("; "))
}

// ------------------------------------------------------- shared training runs

const SEED: u64 = 1;
const REPEATS: usize = 5;

fn mnist_config(strategy: Strategy, noise_ratio: f64, assumed: NoiseAssumption) -> ExperimentConfig {
    let (images, labels) = mnist5k();
    ExperimentConfig {
        subset: 4000,
        strategy,
        noise_ratio,
        assumed_noise: assumed,
        seed: SEED,
        repeats: REPEATS,
        ..ExperimentConfig::mnist(images, labels)
    }
}

fn synth_config(strategy: Strategy, noise_ratio: f64, assumed: NoiseAssumption) -> ExperimentConfig {
    ExperimentConfig {
        strategy,
        noise_ratio,
        assumed_noise: assumed,
        seed: SEED,
        repeats: REPEATS,
        ..ExperimentConfig::default()
    }
}

/// Memoised runs keyed by their config text.
#[derive(Default)]
struct Runs {
    done: BTreeMap<String, RunMetrics>,
}

impl Runs {
    fn get(&mut self, config: &ExperimentConfig) -> Result<&RunMetrics, String> {
        let key = config.to_toml_string();
        if !self.done.contains_key(&key) {
            let start = Instant::now();
            let base = load_base(config).map_err(fail)?;
            let result = train_on(config, &base, Execution::default()).map_err(fail)?;
            eprintln!(
                "  ran {} noise {} assumed {} ({} epochs) in {:.1}s",
                config.strategy,
                config.noise_ratio,
                config.assumed_noise,
                config.epochs,
                start.elapsed().as_secs_f64()
            );
            self.done.insert(key.clone(), result);
        }
        Ok(&self.done[&key])
    }

    fn od_records(&self) -> impl Iterator<Item = (&ExperimentConfig, &OdTraceRecord)> {
        self.done.values().flat_map(|r| r.od_records().map(move |t| (&r.config, t)))
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

// ---------------------------------------------------------------- criterion 4

fn memorization(runs: &mut Runs) -> Outcome {
    let clean = runs.get(&mnist_config(Strategy::Erm, 0.0, NoiseAssumption::Massive))?.summary().mean_acc;
    let noisy = runs.get(&mnist_config(Strategy::Erm, 0.4, NoiseAssumption::Massive))?;
    let train_accs: Vec<f64> = noisy.repeats.iter().map(|r| r.final_train_acc()).collect();
    let train_mean = train_accs.iter().sum::<f64>() / train_accs.len() as f64;
    let test = noisy.summary().mean_acc;
    ensure(
        train_mean >= 0.9 && clean - test >= 0.15,
        format!(
            "40% noise: noisy-label train acc {} (>= 90%), test {} vs clean {} (gap {:.1} points, >= 15)",
            pct(train_mean),
            pct(test),
            pct(clean),
            (clean - test) * 100.0
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

fn oracle_mixup(runs: &mut Runs) -> Outcome {
    let reference = runs.get(&synth_config(Strategy::Erm, 0.0, NoiseAssumption::Little))?.summary().mean_acc;
    let mut parts = vec![format!("ERM 0% {}", pct(reference))];
    let mut ok = true;
    for noise in [0.1, 0.2, 0.3, 0.4] {
        let config = ExperimentConfig {
            oracle_outliers: true,
            ..synth_config(Strategy::MixOutlier, noise, NoiseAssumption::Massive)
        };
        let acc = runs.get(&config)?.summary().mean_acc;
        ok &= (acc - reference).abs() <= 0.03;
        parts.push(format!("oracle {}: {}", pct(noise), pct(acc)));
    }
    ensure(ok, parts.join(", "))
}

// ---------------------------------------------------------------- criterion 6

fn ordering(runs: &mut Runs) -> Outcome {
    let erm = runs.get(&mnist_config(Strategy::Erm, 0.4, NoiseAssumption::Massive))?.summary().mean_acc;
    let mixup = runs.get(&mnist_config(Strategy::Mixup, 0.4, NoiseAssumption::Massive))?.summary().mean_acc;
    let relabel = runs
        .get(&mnist_config(Strategy::MixAllOutlierRelabel, 0.4, NoiseAssumption::Massive))?
        .summary()
        .mean_acc;
    ensure(
        relabel >= mixup && mixup >= erm && relabel - erm >= 0.10,
        format!(
            "40% noise: mix-all-outlier-relabel {} >= mixup {} >= erm {}; margin {:.1} points (>= 10)",
            pct(relabel),
            pct(mixup),
            pct(erm),
            (relabel - erm) * 100.0
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn od_effectiveness(runs: &mut Runs) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for noise in [0.1, 0.2] {
        let config = ExperimentConfig {
            epochs: 5,
            ..mnist_config(Strategy::MixOutlier, noise, NoiseAssumption::Medium)
        };
        let result = runs.get(&config)?;
        let recalls: Vec<f64> = result
            .repeats
            .iter()
            .map(|r| {
                let last = r.epochs.last().unwrap();
                last.cumulative_mislabeled as f64 / last.mislabeled_total as f64
            })
            .collect();
        let mean = recalls.iter().sum::<f64>() / recalls.len() as f64;
        ok &= mean >= 0.8;
        parts.push(format!("{} noise: {} of mislabeled flagged by epoch 5", pct(noise), pct(mean)));
    }

    let clean = runs.get(&mnist_config(Strategy::MixOutlier, 0.0, NoiseAssumption::Medium))?;
    let mut clean_ok = true;
    let mut peak = 0;
    for rep in &clean.repeats {
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for t in rep.od_trace.iter().filter(|t| t.epoch == 1) {
            sizes.insert(t.class, t.size);
        }
        let bound: usize = sizes.values().map(|&n| integer_cap(0.3, n)).sum();
        let max = rep.epochs.iter().map(|e| e.outliers).max().unwrap_or(0);
        let last = rep.epochs.last().map_or(0, |e| e.outliers);
        peak = peak.max(max);
        clean_ok &= rep.epochs.iter().all(|e| e.mislabeled_in_outliers == 0 && e.outliers <= bound) && last <= max;
    }
    ok &= clean_ok;
    parts.push(format!("0% noise: no mislabeled in O and |O| bounded (peak {peak}): {clean_ok}"));
    ensure(ok, parts.join("; "))
}

// ---------------------------------------------------------------- criterion 8

fn odmix_bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_odmix")).args(args).output().expect("spawn odmix")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn cap_compliance(runs: &mut Runs) -> Outcome {
    runs.get(&ExperimentConfig {
        epochs: 10,
        ..mnist_config(Strategy::MixAllOutlier, 0.2, NoiseAssumption::Little)
    })?;
    runs.get(&synth_config(Strategy::DeleteOutlier, 0.3, NoiseAssumption::Little))?;
    let mut checked = 0;
    let mut per_level: BTreeMap<String, usize> = BTreeMap::new();
    for (config, t) in runs.od_records() {
        let limit = integer_cap(config.assumed_noise.upper_threshold(), t.size);
        if t.flagged > limit {
            return Err(format!(
                "{} {} epoch {} class {}: {} flagged > cap {limit}",
                config.strategy, config.assumed_noise, t.epoch, t.class, t.flagged
            ));
        }
        checked += 1;
        *per_level.entry(config.assumed_noise.to_string()).or_default() += 1;
    }

    let rejected = matches!(
        synth_config(Strategy::Erm, 0.5, NoiseAssumption::Massive).validate(),
        Err(Error::Config(_))
    );
    let dir = tempfile::tempdir().map_err(fail)?;
    let metrics = dir.path().join("m.jsonl");
    let out = odmix_bin(&[
        "train", "--seed", "1", "--repeats", "1", "--strategy", "erm", "--noise-ratio", "0.5", "--assumed-noise",
        "massive", "--metrics", p(&metrics),
    ]);
    let cli_rejected = !out.status.success() && !metrics.exists();
    ensure(
        checked > 0 && per_level.len() == 3 && rejected && cli_rejected,
        format!(
            "{checked} (epoch, class) records within cap {per_level:?}; noise 0.5 rejected by config: {rejected}, by CLI without output: {cli_rejected}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 9

fn cli_pipeline(dir: &Path, sequential: bool) -> Result<Vec<u8>, String> {
    fs::create_dir_all(dir).map_err(fail)?;
    let clean = dir.join("clean.bin");
    let noisy = dir.join("noisy.bin");
    let metrics = dir.join("metrics.jsonl");
    let trace = dir.join("trace.jsonl");
    let summary = dir.join("summary.csv");
    let mut steps: Vec<Vec<&str>> = vec![
        vec!["generate-data", "--seed", "9", "--dataset", "synth-bdd", "--out", p(&clean)],
        vec!["inject-noise", "--input", p(&clean), "--out", p(&noisy), "--noise-ratio", "0.3", "--seed", "9"],
        vec![
            "train", "--dataset", "cache", "--data-path", p(&noisy), "--seed", "9", "--repeats", "2", "--strategy",
            "mix-all-outlier-relabel", "--noise-ratio", "0.0", "--assumed-noise", "medium", "--epochs", "4",
            "--hidden-widths", "64,16", "--metrics", p(&metrics), "--od-trace", p(&trace), "--summary", p(&summary),
        ],
    ];
    if sequential {
        for s in &mut steps {
            s.insert(0, "--sequential");
        }
    }
    for args in &steps {
        let out = odmix_bin(args);
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    let mut bytes = Vec::new();
    for f in [&clean, &noisy, &metrics, &trace, &summary] {
        bytes.extend(fs::read(f).map_err(fail)?);
    }
    Ok(bytes)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let a = cli_pipeline(&dir.path().join("a"), false)?;
    let b = cli_pipeline(&dir.path().join("b"), false)?;
    let c = cli_pipeline(&dir.path().join("c"), true)?;
    let metrics = fs::read_to_string(dir.path().join("a/metrics.jsonl")).map_err(fail)?;
    let mislabeled = metrics.contains("\"mislabeled_total\":") && !metrics.contains("\"mislabeled_total\":0,");
    ensure(
        a == b && a == c && mislabeled,
        format!(
            "generate-data -> inject-noise -> train: {} bytes, repeat identical: {}, sequential identical: {}, 30% noise carried through cache: {mislabeled}",
            a.len(),
            a == b,
            a == c
        ),
    )
}

// --------------------------------------------------------------- criterion 10

fn format_fidelity() -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let (img, lbl) = (dir.path().join("i"), dir.path().join("l"));
    let mut rng = SeededRng::new(10);
    let pixels: Vec<u8> = (0..11 * 28 * 28).map(|_| rng.gen()).collect();
    let digits: Vec<u8> = (0..11).map(|_| rng.gen_range(0..10)).collect();
    write_idx(&img, &lbl, 28, 28, &pixels, &digits).map_err(fail)?;
    let raw = load_idx(&img, &lbl).map_err(fail)?;
    let back: Vec<u8> = raw.images.as_slice().iter().map(|v| (v * 255.0).round() as u8).collect();
    let round_trip = back == pixels
        && raw.digits == digits
        && fs::read(&img).map_err(fail)? == encode_idx_images(28, 28, &back)
        && fs::read(&lbl).map_err(fail)? == encode_idx_labels(&raw.digits);

    let images = encode_idx_images(2, 2, &[1, 2, 3, 4, 5, 6, 7, 8]);
    let labels = encode_idx_labels(&[3, 4]);
    let mut bad_magic = images.clone();
    bad_magic[3] = 0x01;
    let mut bad_label_magic = labels.clone();
    bad_label_magic[2] = 0x09;
    let positioned = matches!(parse_idx(&bad_magic, &labels), Err(Error::Format { offset: 0, .. }))
        && matches!(parse_idx(&images, &bad_label_magic), Err(Error::Format { offset: 0, .. }))
        && matches!(parse_idx(&images[..18], &labels), Err(Error::Format { offset: 18, .. }))
        && matches!(parse_idx(&images[..7], &labels), Err(Error::Format { offset: 7, .. }))
        && matches!(parse_idx(&images, &labels[..9]), Err(Error::Format { offset: 9, .. }));

    let mut detail = format!("fixture round trip: {round_trip}, positioned errors: {positioned}");
    let mut ok = round_trip && positioned;
    match std::env::var_os("MNIST_DIR") {
        Some(root) => {
            let root = PathBuf::from(root);
            let counts = |images: &str, labels: &str| -> Result<Vec<usize>, String> {
                let raw = load_idx(find(&root, images)?, find(&root, labels)?).map_err(fail)?;
                Ok(binarize_mnist(&raw, DigitGrouping::ZERO_TO_FOUR).map_err(fail)?.class_sizes())
            };
            let train = counts("train-images-idx3-ubyte", "train-labels-idx1-ubyte")?;
            let test = counts("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?;
            let full_ok = train == [30596, 29404] && test == [5139, 4862];
            ok &= full_ok;
            detail.push_str(&format!("; full data train {train:?} (want [30596, 29404]), test {test:?} (want [5139, 4862])"));
        }
        None => detail.push_str("; full-data counts skipped (MNIST_DIR not set)"),
    }
    ensure(ok, detail)
}

fn find(root: &Path, stem: &str) -> Result<PathBuf, String> {
    [stem.to_string(), format!("{stem}.gz")]
        .iter()
        .map(|name| root.join(name))
        .find(|path| path.exists())
        .ok_or_else(|| format!("{stem} not found in {}", root.display()))
}

fn main() {
    let mut runs = Runs::default();
    let mut failed = 0;
    let mut report = |n: usize, outcome: Outcome| {
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n}: {status} {detail}");
    };
    report(1, finite_differences());
    report(2, oracle_equivalence());
    report(3, beta_statistics());
    report(4, memorization(&mut runs));
    report(5, oracle_mixup(&mut runs));
    report(6, ordering(&mut runs));
    report(7, od_effectiveness(&mut runs));
    report(8, cap_compliance(&mut runs));
    report(9, determinism());
    report(10, format_fidelity());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
