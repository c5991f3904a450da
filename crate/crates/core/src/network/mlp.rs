use rand::Rng;

use crate::error::{arg, shape, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Independent logistic per output node.
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => logistic(z),
        }
    }
}

pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One fully connected layer. `weights` is `fan_in × fan_out`, so a batch
/// maps as `A · W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }
}

/// Fully connected network: ReLU on hidden layers, a logistic unit per class
/// on the output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    layers: Vec<DenseLayer>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub input: Matrix,
    /// Pre-activations per layer.
    pub pre: Vec<Matrix>,
    /// Activations per layer; the last entry holds the per-class logistic
    /// scores `p`.
    pub post: Vec<Matrix>,
    /// `p` normalised to sum to one per row.
    pub q: Matrix,
}

impl ForwardTrace {
    pub fn scores(&self) -> &Matrix {
        self.post.last().expect("a network has at least one layer")
    }

    /// Activation feeding layer `l` (the input for `l = 0`).
    pub fn layer_input(&self, l: usize) -> &Matrix {
        if l == 0 {
            &self.input
        } else {
            &self.post[l - 1]
        }
    }

    pub fn predicted_classes(&self) -> Vec<usize> {
        self.q.row_iter().map(argmax).collect()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl Mlp {
    /// Uniform `±1/√fan_in` weights and zero biases.
    pub fn new_random<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let data = (0..w[0] * w[1])
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                DenseLayer {
                    weights: Matrix::from_raw(w[0], w[1], data),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        Ok(Mlp {
            widths: widths.to_vec(),
            layers,
        })
    }

    pub fn zeros(widths: &[usize]) -> Result<Self> {
        check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer {
                weights: Matrix::zeros(w[0], w[1]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(Mlp {
            widths: widths.to_vec(),
            layers,
        })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return arg("a network needs at least one layer");
        }
        let mut widths = vec![layers[0].fan_in()];
        for (i, layer) in layers.iter().enumerate() {
            if layer.fan_in() != *widths.last().unwrap() {
                return shape(format!(
                    "layer {i} expects {} inputs but the previous layer has {} outputs",
                    layer.fan_in(),
                    widths.last().unwrap()
                ));
            }
            if layer.bias.len() != layer.fan_out() {
                return shape(format!("layer {i} bias length {}", layer.bias.len()));
            }
            if !layer.weights.is_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
                return arg(format!("layer {i} has non-finite parameters"));
            }
            widths.push(layer.fan_out());
        }
        check_widths(&widths)?;
        Ok(Mlp { widths, layers })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    /// Number of weight layers.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn class_count(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            Activation::Sigmoid
        } else {
            Activation::Relu
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardTrace> {
        if batch.cols() != self.input_width() {
            return shape(format!(
                "batch has {} features, network expects {}",
                batch.cols(),
                self.input_width()
            ));
        }
        let mut pre = Vec::with_capacity(self.depth());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.depth());
        for (l, layer) in self.layers.iter().enumerate() {
            let input = post.last().unwrap_or(batch);
            let mut z = input.matmul(&layer.weights)?;
            z.add_row_in_place(&layer.bias)?;
            let act = self.activation(l);
            let a = z.map(|v| act.apply(v));
            pre.push(z);
            post.push(a);
        }
        let q = normalise_rows(post.last().unwrap());
        Ok(ForwardTrace {
            input: batch.clone(),
            pre,
            post,
            q,
        })
    }

    /// Normalised class distribution `q` for each row of `batch`.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward(batch)?.q)
    }
}

pub(crate) fn normalise_rows(p: &Matrix) -> Matrix {
    let mut q = p.clone();
    for r in 0..q.rows() {
        let row = q.row_mut(r);
        let s: f64 = row.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    q
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return arg("widths must list at least an input and an output width");
    }
    if widths.contains(&0) {
        return arg("layer widths must be positive");
    }
    Ok(())
}
