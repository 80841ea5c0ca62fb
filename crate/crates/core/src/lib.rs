//! Numerical toolkit for the Gaussian approximation gap
//! Δ_f = |E f(W_n) − E f(Z)| of standardized i.i.d. sums: Edgeworth
//! corrections, non-uniform bounds, ReLU/ridge integral representations,
//! Gaussian mollification bounds and Monte Carlo oracles.

pub mod dist_zoo;
pub mod edgeworth;
pub mod error;
pub mod mc_oracle;
pub mod norm_moments;
pub mod normball;
pub mod numerics;
pub mod relu_delta;
pub mod ridge_repr;

pub use error::{CoreError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
