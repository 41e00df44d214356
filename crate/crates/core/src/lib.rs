//! Bayesian estimation of sparse spiked covariance matrices.
//!
//! The covariance is modelled as `Σ = U Λ Uᵀ + σ² I` with a jointly row-sparse
//! orthonormal frame `U`. Inference runs on the reparametrization
//! `Σ = B Bᵀ + σ² I`, with a matrix spike-and-slab LASSO prior on the rows of
//! `B` and a Metropolis-within-Gibbs sampler over the latent factor model
//! `y = B z + ε`.
//!
//! Module map:
//!
//! - [`linalg`]: norms, SVD/eigen helpers, orthogonal alignment, CS
//!   decomposition and subspace distances.
//! - [`prior`]: the matrix spike-and-slab LASSO prior.
//! - [`sampler`]: the posterior sampler.
//! - [`estimators`]: posterior summaries, rank estimation, key features.
//! - [`synth`]: ground truth generation and data simulation.
//! - [`harness`]: configuration, persistence, losses and experiments.

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod prior;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
pub use linalg::{Mat, OrthoFrame};
