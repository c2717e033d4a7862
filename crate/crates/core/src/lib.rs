//! Spectral clustering for two-component Gaussian mixtures in the allometric
//! extension relationship: the leading eigenvectors of both component
//! covariances coincide and are parallel to the difference of the means.
//!
//! The crate provides
//!
//! * [`numerics`]: Jacobi eigensolver, SPD square roots, the normal CDF;
//! * [`model`]: construction and validation of allometric-extension models and
//!   the exact eigenstructure of the mixture covariance;
//! * [`sampler`]: reproducible counter-based sampling from the mixture;
//! * [`clustering`]: sign-of-principal-score clustering and its error metrics;
//! * [`bounds`]: closed-form evaluators for the misclassification bounds;
//! * [`experiments`]: a seeded Monte Carlo harness comparing the two.

// `!(x > 0.0)` is used deliberately so NaN lands on the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod clustering;
mod error;
pub mod experiments;
pub mod format;
pub mod model;
pub mod numerics;
pub mod sampler;

pub use error::{Error, Result};

/// Version string recorded in every output sidecar.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
