//! Empirical Gaussian processes: mean and covariance functions learned
//! directly from a corpus of historical sample paths.
//!
//! Two estimators are provided:
//!
//! * [`empirical_prior`]: dense paths are linearly interpolated onto a shared
//!   reference grid, centered, and compressed with a thin SVD into a small set
//!   of basis rows ("eigen-observations"). Covariance queries cost `O(M)` per
//!   pair of locations regardless of how many paths were used for fitting.
//! * [`em_prior`]: sparse, irregular observations are tied to latent values on
//!   a reference grid through kernel interpolation weights, and the latent mean
//!   and covariance are estimated with closed-form EM. Queries away from the
//!   grid fall back to a parametric base kernel.
//!
//! Either prior can be conditioned on new observations with [`inference`] and
//! scored with [`metrics`].
//!
//! Run `cargo run --example <name>` for end-to-end walkthroughs, or use the
//! `egp` binary for the file-based pipeline.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod em_prior;
pub mod empirical_prior;
pub mod error;
pub mod inference;
pub mod kernels;
pub mod metrics;
pub mod numerics;
pub mod rng;

pub use dataset::{Corpus, SamplePath, WindowConfig};
pub use em_prior::{EmConfig, EmPrior};
pub use empirical_prior::DensePrior;
pub use error::{Error, Result};
pub use inference::{GaussianPredictive, Prior, PriorHandle};
pub use kernels::{KernelFamily, KernelSpec, MeanSpec};

/// `n` equally spaced points on `[start, end]`.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}
