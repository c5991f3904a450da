use crate::data::{one_hot, LabeledDataset, SampleId};
use crate::error::{arg, Result};
use crate::exec::Execution;
use crate::network::{layer_deltas, output_delta, LossSpec, Mlp};

/// Samples evaluated together in one forward/backward pass.
const SHARD: usize = 256;

/// Mean over all weight entries of each layer of one sample's cross-entropy
/// gradient. Biases are not included.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSummary {
    pub sample_id: SampleId,
    pub layer_means: Vec<f64>,
}

/// Layer-mean gradient summaries for `ids`, in the given order.
///
/// Each sample's loss is the plain cross-entropy against the one-hot argmax
/// of its stored label. A dense layer's per-sample weight gradient is the
/// outer product of its input activation and its pre-activation delta, so
/// its mean is `(Σ a)(Σ δ) / (fan_in · fan_out)`.
pub fn layer_mean_gradients(model: &Mlp, dataset: &LabeledDataset, ids: &[SampleId]) -> Result<Vec<GradientSummary>> {
    layer_mean_gradients_with(model, dataset, ids, Execution::default())
}

pub fn layer_mean_gradients_with(
    model: &Mlp,
    dataset: &LabeledDataset,
    ids: &[SampleId],
    exec: Execution,
) -> Result<Vec<GradientSummary>> {
    if ids.is_empty() {
        return arg("no samples to summarise");
    }
    let rows = dataset.rows_of(ids)?;
    let shards: Vec<&[usize]> = rows.chunks(SHARD).collect();
    let parts = exec.try_map(&shards, |shard| summarise_shard(model, dataset, shard))?;
    Ok(parts.into_iter().flatten().collect())
}

fn summarise_shard(model: &Mlp, dataset: &LabeledDataset, rows: &[usize]) -> Result<Vec<GradientSummary>> {
    let features = dataset.features().select_rows(rows);
    let hard: Vec<usize> = rows.iter().map(|&r| dataset.hard_label(r)).collect();
    let targets = one_hot(&hard, dataset.class_count())?;
    let trace = model.forward(&features)?;
    let out = output_delta(&trace, &targets, &LossSpec::cross_entropy_only())?;
    let deltas = layer_deltas(model, &trace, out)?;

    let mut summaries: Vec<GradientSummary> = rows
        .iter()
        .map(|&r| GradientSummary {
            sample_id: dataset.ids()[r],
            layer_means: Vec::with_capacity(model.depth()),
        })
        .collect();
    for (l, delta) in deltas.iter().enumerate() {
        let input = trace.layer_input(l);
        let entries = (input.cols() * delta.cols()) as f64;
        for (i, s) in summaries.iter_mut().enumerate() {
            let a: f64 = input.row(i).iter().sum();
            let d: f64 = delta.row(i).iter().sum();
            s.layer_means.push(a * d / entries);
        }
    }
    Ok(summaries)
}
