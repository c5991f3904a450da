#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use odmix::network::Mlp;

pub fn testdata(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata").join(name)
}

pub fn mnist5k() -> (PathBuf, PathBuf) {
    (
        testdata("mnist5k-images-idx3-ubyte.gz"),
        testdata("mnist5k-labels-idx1-ubyte.gz"),
    )
}

/// Plain-loop copy of a network, used as an oracle.
pub struct ScalarNet {
    /// `w[l][i][j]`: input `i` to output `j` of layer `l`.
    pub w: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
}

pub struct ScalarPass {
    /// `a[0]` is the input, `a[l + 1]` the output of layer `l`.
    pub a: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl ScalarNet {
    pub fn from_mlp(model: &Mlp) -> ScalarNet {
        let mut w = Vec::new();
        let mut b = Vec::new();
        for layer in model.layers() {
            let (fi, fo) = layer.weights.shape();
            w.push((0..fi).map(|i| (0..fo).map(|j| layer.weights.get(i, j)).collect()).collect());
            b.push(layer.bias.clone());
        }
        ScalarNet { w, b }
    }

    pub fn depth(&self) -> usize {
        self.w.len()
    }

    pub fn forward(&self, x: &[f64]) -> ScalarPass {
        let mut a = vec![x.to_vec()];
        for l in 0..self.depth() {
            let input = &a[l];
            let fo = self.b[l].len();
            let mut out = vec![0.0; fo];
            for j in 0..fo {
                let mut z = self.b[l][j];
                for (i, v) in input.iter().enumerate() {
                    z += v * self.w[l][i][j];
                }
                out[j] = if l + 1 == self.depth() { sigmoid(z) } else { z.max(0.0) };
            }
            a.push(out);
        }
        let p = a.last().unwrap().clone();
        let s: f64 = p.iter().sum();
        let q = p.iter().map(|v| v / s).collect();
        ScalarPass { a, p, q }
    }

    /// `−Σ y ln q + β · (−Σ q ln q)` for one sample.
    pub fn loss(&self, x: &[f64], y: &[f64], beta: f64) -> f64 {
        let q = self.forward(x).q;
        let ce: f64 = y.iter().zip(&q).map(|(yk, qk)| -yk * qk.max(1e-12).ln()).sum();
        let ent: f64 = q.iter().map(|qk| -qk * qk.max(1e-12).ln()).sum();
        ce + beta * ent
    }

    /// Cross-entropy gradient of every weight for one sample and hard class,
    /// `g[l][i][j]`.
    pub fn weight_gradients(&self, x: &[f64], class: usize) -> Vec<Vec<Vec<f64>>> {
        let pass = self.forward(x);
        let depth = self.depth();
        let s: f64 = pass.p.iter().sum();
        // L = −ln p_c + ln Σp
        let mut delta: Vec<f64> = pass
            .p
            .iter()
            .enumerate()
            .map(|(k, &pk)| {
                let dl_dp = if k == class { -1.0 / pk } else { 0.0 } + 1.0 / s;
                dl_dp * pk * (1.0 - pk)
            })
            .collect();
        let mut grads = vec![Vec::new(); depth];
        for l in (0..depth).rev() {
            let input = &pass.a[l];
            grads[l] = input
                .iter()
                .map(|ai| delta.iter().map(|dj| ai * dj).collect())
                .collect();
            if l > 0 {
                let below = &pass.a[l];
                delta = (0..input.len())
                    .map(|i| {
                        let back: f64 = delta.iter().enumerate().map(|(j, dj)| self.w[l][i][j] * dj).sum();
                        if below[i] > 0.0 {
                            back
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
        grads
    }

    /// Per-layer mean of [`ScalarNet::weight_gradients`].
    pub fn layer_means(&self, x: &[f64], class: usize) -> Vec<f64> {
        self.weight_gradients(x, class)
            .iter()
            .map(|g| {
                let mut sum = 0.0;
                let mut n = 0usize;
                for row in g {
                    for v in row {
                        sum += v;
                        n += 1;
                    }
                }
                sum / n as f64
            })
            .collect()
    }
}

/// Result of the reference whisker procedure for one class.
#[derive(Debug, PartialEq)]
pub struct OracleClass {
    pub raw: usize,
    pub flagged: Vec<u64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Reference detection for one class. The cap is `⌈num · n / den⌉` computed
/// in integers.
pub fn oracle_class(samples: &[(u64, Vec<f64>)], min_iqr: f64, cap_num: usize, cap_den: usize) -> OracleClass {
    let n = samples.len();
    if n < 4 {
        return OracleClass { raw: 0, flagged: Vec::new() };
    }
    let depth = samples[0].1.len();
    let mut bounds = Vec::new();
    for l in 0..depth {
        let mut v: Vec<f64> = samples.iter().map(|s| s.1[l]).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (p25, p75) = (quantile(&v, 0.25), quantile(&v, 0.75));
        let iqr = if p75 - p25 < min_iqr { min_iqr } else { p75 - p25 };
        bounds.push((p25 - 1.5 * iqr, p75 + 1.5 * iqr, iqr));
    }
    let mut raw: Vec<(u64, f64)> = Vec::new();
    for (id, vals) in samples {
        let mut score: f64 = 0.0;
        let mut outside = false;
        for (v, (lo, hi, iqr)) in vals.iter().zip(&bounds) {
            let d = if v < lo {
                (lo - v) / iqr
            } else if v > hi {
                (v - hi) / iqr
            } else {
                continue;
            };
            outside = true;
            score = score.max(d);
        }
        if outside {
            raw.push((*id, score));
        }
    }
    let cap = (cap_num * n).div_ceil(cap_den);
    raw.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let count = raw.len();
    let mut flagged: Vec<u64> = raw.into_iter().take(cap).map(|e| e.0).collect();
    flagged.sort_unstable();
    OracleClass { raw: count, flagged }
}

pub fn union(classes: &[OracleClass]) -> BTreeSet<u64> {
    classes.iter().flat_map(|c| c.flagged.iter().copied()).collect()
}

/// Independent `⌈fraction · n⌉` for the fractions used by the noise
/// assumptions.
pub fn integer_cap(fraction: f64, n: usize) -> usize {
    let tenths = (fraction * 10.0).round() as usize;
    (tenths * n).div_ceil(10)
}
