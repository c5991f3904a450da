//! Dataset construction: IDX digits, windowed sensor tables, synthetic
//! sensor data, splits and symmetric label noise.

mod cache;
mod dataset;
mod idx;
mod noise;
mod synth;
mod window;

pub use cache::{decode_dataset, encode_dataset, read_dataset, write_dataset};
pub use dataset::{one_hot, LabeledDataset, SampleId};
pub use idx::{
    binarize_mnist, encode_idx_images, encode_idx_labels, load_idx, parse_idx, write_idx, DigitGrouping, RawDigits,
};
pub use noise::{inject_symmetric_noise, split, NoiseRecord};
pub use synth::{synth_bdd, SynthConfig};
pub use window::{window_csv, window_csv_reader, Standardizer, WindowLabels, WindowSpec};
