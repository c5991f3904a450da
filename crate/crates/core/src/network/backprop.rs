use crate::error::{shape, Result};
use crate::numerics::Matrix;

use super::loss::{output_delta, LossSpec};
use super::mlp::{Activation, ForwardTrace, Mlp};

/// Gradient of one layer's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients for every layer of a network, in layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Gradients {
            layers: model
                .layers()
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.fan_in(), l.fan_out()),
                    bias: vec![0.0; l.fan_out()],
                })
                .collect(),
        }
    }
}

/// Per-sample gradients with respect to every layer's pre-activations,
/// starting from the output layer's `delta`.
pub(crate) fn layer_deltas(model: &Mlp, trace: &ForwardTrace, output: Matrix) -> Result<Vec<Matrix>> {
    let depth = model.depth();
    if trace.pre.len() != depth || output.shape() != trace.scores().shape() {
        return shape("trace does not belong to this network");
    }
    let mut deltas = vec![output];
    for l in (0..depth - 1).rev() {
        let upstream = deltas.last().unwrap();
        let mut d = upstream.matmul_nt(&model.layers()[l + 1].weights)?;
        debug_assert_eq!(model.activation(l), Activation::Relu);
        let z = trace.pre[l].as_slice();
        for (v, &zi) in d.as_mut_slice().iter_mut().zip(z) {
            if zi <= 0.0 {
                *v = 0.0;
            }
        }
        deltas.push(d);
    }
    deltas.reverse();
    Ok(deltas)
}

/// Analytic gradient of the batch-mean composite loss.
pub fn backward(model: &Mlp, trace: &ForwardTrace, labels: &Matrix, spec: &LossSpec) -> Result<Gradients> {
    let n = trace.input.rows().max(1) as f64;
    let deltas = layer_deltas(model, trace, output_delta(trace, labels, spec)?)?;
    let layers = deltas
        .iter()
        .enumerate()
        .map(|(l, d)| {
            let mut weights = trace.layer_input(l).matmul_tn(d)?;
            weights.scale(1.0 / n);
            let bias = d.column_sums().into_iter().map(|s| s / n).collect();
            Ok(LayerGradient { weights, bias })
        })
        .collect::<Result<_>>()?;
    Ok(Gradients { layers })
}
