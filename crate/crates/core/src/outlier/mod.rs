//! Gradient-based outlier detection.
//!
//! A sample whose layer-mean gradient lies outside its class's whiskers in
//! any layer is inconsistent with the current hypothesis update and gets
//! flagged, subject to a per-class cap derived from the assumed noise level.

mod detect;
mod gradients;

pub use detect::{
    detect_outliers, group_by_class, outlier_cap, ClassOutcome, ClassSummaries, Composition, DetectionConfig,
    LayerWhisker, NoiseAssumption, OutlierReport, WhiskerBounds,
};
pub use gradients::{layer_mean_gradients, layer_mean_gradients_with, GradientSummary};

use crate::data::LabeledDataset;
use crate::error::Result;
use crate::exec::Execution;
use crate::network::Mlp;

/// Summaries for every sample of `dataset`, grouped by observed hard label,
/// then whisker detection. Composition is attached when ground truth exists.
pub fn detect_on_dataset(
    model: &Mlp,
    dataset: &LabeledDataset,
    config: &DetectionConfig,
    exec: Execution,
) -> Result<OutlierReport> {
    let summaries = layer_mean_gradients_with(model, dataset, dataset.ids(), exec)?;
    let groups = group_by_class(summaries, dataset.class_count(), |id| {
        dataset.hard_label(dataset.row_of(id).expect("id taken from the dataset"))
    });
    let mut report = detect_outliers(&groups, config)?;
    if dataset.ground_truth().is_some() {
        report.attach_composition(|id| {
            let row = dataset.row_of(id).expect("id taken from the dataset");
            Some(dataset.hard_label(row)) != dataset.truth_of(row)
        });
    }
    Ok(report)
}
