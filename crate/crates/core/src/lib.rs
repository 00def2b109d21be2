//! Information mechanics toolkit.
//!
//! Estimates entropy `H`, Fisher trace `J` and the scale-invariant information
//! potential `Phi = H + (N/2) log(J / (2 pi e N))` for Gaussian, mixture and
//! grid densities, and audits the identities that tie them together:
//!
//! - [`bayes`]: the pointwise surprisal identity under Bayes' rule and its
//!   entropy and Fisher projections, in closed form and by joint Monte Carlo.
//! - [`spectral`]: Fourier-multiplier projections `<Δ^m S>` of the surprisal
//!   and the cutoff-robustness experiment that singles out `m <= 1`.
//! - [`heatflow`]: the Gaussian smoothing semigroup, de Bruijn's identity,
//!   Fisher dissipation and the monotone decay of `Phi`.
//! - [`landscape`]: Boltzmann mixtures over energy landscapes and the
//!   relation between `Phi` and the number of resolved local minima.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod cli;
pub mod density;
pub mod error;
pub mod estimators;
pub mod fft;
pub mod heatflow;
pub mod landscape;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod stencil;
pub mod suite;

pub use density::{discretize, surprisal_field, GaussianComponent, GaussianMixture, GridDensity, GridSpec};
pub use error::{Error, Result};
pub use estimators::{info_state, EstimatorBudget, InfoState};
