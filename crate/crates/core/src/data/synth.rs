//! Synthetic multivariate sensor windows with one healthy and several fault
//! patterns.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{arg, Result};
use crate::numerics::{Matrix, SeededRng};

use super::dataset::LabeledDataset;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Samples per class.
    pub class_sizes: Vec<usize>,
    /// Distinct signal patterns per class; samples of a class cycle through
    /// its patterns.
    pub patterns_per_class: Vec<usize>,
    pub timesteps: usize,
    pub sensors: usize,
    /// Amplitude of the pattern-specific deviation from the shared baseline.
    pub signal: f64,
    /// Standard deviation of the per-sensor AR(1) noise.
    pub noise: f64,
    /// Lag-one autocorrelation of the noise.
    pub autocorrelation: f64,
}

impl Default for SynthConfig {
    /// 623 healthy and 624 faulty windows of 30 steps × 15 sensors; the faulty
    /// class mixes three patterns.
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            class_sizes: vec![623, 624],
            patterns_per_class: vec![1, 3],
            timesteps: 30,
            sensors: 15,
            signal: 1.0,
            noise: 0.3,
            autocorrelation: 0.6,
        }
    }
}

struct Pattern {
    amplitude: Vec<f64>,
    frequency: Vec<f64>,
    phase: Vec<f64>,
    offset: Vec<f64>,
}

impl Pattern {
    fn draw(rng: &mut SeededRng, sensors: usize) -> Pattern {
        Pattern {
            amplitude: (0..sensors).map(|_| rng.gen_range(0.5..1.5)).collect(),
            frequency: (0..sensors).map(|_| rng.gen_range(0.5..3.0)).collect(),
            phase: (0..sensors).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect(),
            offset: (0..sensors).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.5).collect(),
        }
    }

    fn value(&self, s: usize, t: usize, timesteps: usize) -> f64 {
        let x = t as f64 / timesteps as f64;
        self.amplitude[s] * (std::f64::consts::TAU * self.frequency[s] * x + self.phase[s]).sin() + self.offset[s]
    }
}

/// Generates the dataset. Identical configurations give identical bytes.
pub fn synth_bdd(config: &SynthConfig) -> Result<LabeledDataset> {
    let classes = config.class_sizes.len();
    if classes < 2 || config.patterns_per_class.len() != classes {
        return arg("need at least two classes and one pattern count per class");
    }
    if config.class_sizes.iter().any(|&n| n < 4) {
        return arg("every class needs at least 4 samples");
    }
    if config.patterns_per_class.contains(&0) || config.timesteps == 0 || config.sensors == 0 {
        return arg("pattern counts, timesteps and sensors must be positive");
    }
    if !(0.0..1.0).contains(&config.autocorrelation.abs()) || config.noise < 0.0 {
        return arg("noise must be >= 0 and |autocorrelation| < 1");
    }
    let root = SeededRng::new(config.seed);
    let mut shape_rng = root.child(0);
    let mut sample_rng = root.child(1);
    let (steps, sensors) = (config.timesteps, config.sensors);

    let baseline = Pattern::draw(&mut shape_rng, sensors);
    let patterns: Vec<Vec<Pattern>> = config
        .patterns_per_class
        .iter()
        .map(|&k| (0..k).map(|_| Pattern::draw(&mut shape_rng, sensors)).collect())
        .collect();

    let total: usize = config.class_sizes.iter().sum();
    let width = steps * sensors;
    let mut data = Vec::with_capacity(total * width);
    let mut labels = Vec::with_capacity(total);
    let innovation = config.noise * (1.0 - config.autocorrelation.powi(2)).sqrt();
    // classes interleaved so ids do not sort by class
    let mut remaining = config.class_sizes.clone();
    let mut emitted = vec![0usize; classes];
    while remaining.iter().any(|&r| r > 0) {
        for c in 0..classes {
            if remaining[c] == 0 {
                continue;
            }
            remaining[c] -= 1;
            let pattern = &patterns[c][emitted[c] % patterns[c].len()];
            emitted[c] += 1;
            let strength = config.signal * sample_rng.gen_range(0.4..1.6);
            let mut noise: Vec<f64> = (0..sensors)
                .map(|_| config.noise * sample_rng.sample::<f64, _>(StandardNormal))
                .collect();
            for t in 0..steps {
                for s in 0..sensors {
                    if t > 0 {
                        noise[s] = config.autocorrelation * noise[s]
                            + innovation * sample_rng.sample::<f64, _>(StandardNormal);
                    }
                    data.push(baseline.value(s, t, steps) + strength * pattern.value(s, t, steps) + noise[s]);
                }
            }
            labels.push(c);
        }
    }
    LabeledDataset::from_classes(Matrix::from_vec(total, width, data)?, labels, classes)
}
