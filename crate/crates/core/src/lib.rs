//! Outlier-robust identification of SISO linear time-invariant systems.
//!
//! The impulse response `g(1..n)` of a strictly causal system is estimated
//! from input/output records under a stable spline Gaussian prior
//! `g ~ N(0, λ K_β)`. Two estimators are provided:
//!
//! * [`ssml`]: Gaussian noise, hyperparameters `(λ, β)` by marginal
//!   likelihood, posterior mean plug-in (SS-ML).
//! * [`gibbs`]: Laplacian noise written as a scale mixture of Gaussians,
//!   posterior mean by Gibbs sampling over `(g, λ, τ₁..τ_N)` (SS-GS),
//!   initialised from the SS-ML estimate.
//!
//! [`bench`] reproduces the Monte Carlo protocol used to compare the two
//! under Gaussian-mixture outlier noise, and [`cli`] exposes the file formats
//! and commands used by the `robust-sysid` binary.

pub mod bench;
pub mod cli;
pub mod dist;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod kernel;
mod linalg;
pub mod model;
mod posterior;
pub mod ssml;
mod stats;

pub use error::{Error, Result};
pub use kernel::{KernelMatrix, KernelOrder, KernelSpec};
pub use model::{Dataset, Hyperparameters, ImpulseResponse, RegressorMatrix};
pub use posterior::PosteriorForm;
