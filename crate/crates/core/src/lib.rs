//! Training under label noise with gradient-based outlier detection and
//! adapted mixup.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, order statistics and seeded sampling.
//! - [`network`]: a fully connected network with analytic backprop, the
//!   cross-entropy + entropy loss and Adam.
//! - [`outlier`]: per-sample layer-mean gradients and per-class whisker
//!   based outlier detection.
//! - [`augment`]: mixup, adapted mixup and permanent relabeling.
//! - [`data`]: IDX/CSV ingestion, synthetic sensor data, splits and
//!   symmetric label noise.
//! - [`harness`]: training strategies, the epoch loop, suites, reports and
//!   the command line front end.

pub mod augment;
pub mod data;
pub mod error;
pub mod exec;
pub mod harness;
pub mod network;
pub mod numerics;
pub mod outlier;

pub use error::{Error, Result};
pub use exec::Execution;
