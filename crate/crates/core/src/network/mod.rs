//! Fully connected classifier, composite loss, backprop and Adam.

mod adam;
mod backprop;
mod checkpoint;
mod loss;
mod mlp;

pub use adam::{adam_step, AdamState};
pub use backprop::{backward, Gradients, LayerGradient};
pub(crate) use backprop::layer_deltas;
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use loss::{loss, output_delta, sample_losses, validate_label_rows, LossSpec, LOG_FLOOR};
pub use mlp::{argmax, Activation, DenseLayer, ForwardTrace, Mlp};

use crate::error::Result;
use crate::numerics::Matrix;

/// Forward, backward and one Adam update on a batch. Returns the batch loss
/// measured before the update.
pub fn train_step(
    model: &mut Mlp,
    adam: &mut AdamState,
    features: &Matrix,
    labels: &Matrix,
    spec: &LossSpec,
) -> Result<f64> {
    let trace = model.forward(features)?;
    let value = loss(&trace, labels, spec)?;
    let grads = backward(model, &trace, labels, spec)?;
    adam_step(model, &grads, adam)?;
    Ok(value)
}
