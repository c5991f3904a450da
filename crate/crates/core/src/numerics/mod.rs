//! Dense math, order statistics and seeded random sampling.

mod matrix;
mod rng;
pub(crate) mod stats;

pub use matrix::Matrix;
pub use rng::{beta_sample, gamma_sample, SeededRng, Stream};
pub use stats::{mean_std, percentile};
