//! Constrained joint maximum likelihood estimation (CJMLE) for exploratory
//! item factor analysis of binary response matrices.
//!
//! The crate fits `P(y_ij = 1) = f(d_j + a_jᵀθ_i)` by maximizing the joint
//! likelihood over observed cells subject to `√(1 + ‖θ_i‖²) ≤ C` and
//! `√(d_j² + ‖a_j‖²) ≤ C`, using alternating projected gradient descent
//! that is parallel over persons and over items.
//!
//! Modules:
//! - [`model`]: link functions, data containers, likelihood and gradients
//! - [`optimizer`]: the constrained alternating minimization
//! - [`identify`]: standardization, Procrustes alignment and recovery metrics
//! - [`simulate`]: generators for synthetic studies
//! - [`crossval`]: entry-wise cross-validation for choosing K

pub mod crossval;
pub mod error;
pub mod identify;
mod linalg;
pub mod model;
pub mod optimizer;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{LinkFunction, ParameterSet, ResponseData};
pub use optimizer::{fit, FitConfig, FitReport};
