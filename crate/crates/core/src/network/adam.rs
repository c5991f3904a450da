use crate::error::{shape, Result};

use super::backprop::{Gradients, LayerGradient};
use super::mlp::Mlp;

/// Adam optimiser state with bias-corrected moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub first: Vec<LayerGradient>,
    pub second: Vec<LayerGradient>,
}

impl AdamState {
    pub fn new(model: &Mlp, lr: f64) -> Self {
        let zeros = Gradients::zeros_like(model).layers;
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }
}

/// One Adam update of `model` in place.
pub fn adam_step(model: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.layers.len() != model.depth() || state.first.len() != model.depth() {
        return shape("gradient / optimiser state do not match the network depth");
    }
    for (l, layer) in model.layers().iter().enumerate() {
        let g = &grads.layers[l];
        if g.weights.shape() != layer.weights.shape() || g.bias.len() != layer.bias.len() {
            return shape(format!("gradient shape mismatch in layer {l}"));
        }
        if state.first[l].weights.shape() != layer.weights.shape() {
            return shape(format!("optimiser state shape mismatch in layer {l}"));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let (lr, eps) = (state.lr, state.eps);
    let update = |param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..param.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for (l, layer) in model.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[l];
        let (m, v) = (&mut state.first[l], &mut state.second[l]);
        update(
            layer.weights.as_mut_slice(),
            g.weights.as_slice(),
            m.weights.as_mut_slice(),
            v.weights.as_mut_slice(),
        );
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
    Ok(())
}
