//! Shared numerical substrate: quadrature, special functions, RNG streams,
//! sphere sampling and streaming statistics.

mod quadrature;
mod rng;
mod rules;
mod special;
mod sphere;
mod stats;

pub use quadrature::{integrate_1d, integrate_semi_infinite, QuadratureSpec};
pub use rng::{RngStream, StreamRng};
pub use rules::{gauss_hermite, gauss_legendre, GaussRule};
pub use special::{gamma, gauss_cdf, gauss_pdf, gauss_sf, ln_gamma};
pub use sphere::{sphere_sample, unit_sphere_area};
pub use stats::{loglog_slope, Welford};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateKind {
    MonteCarlo,
    Quadrature,
    ClosedForm,
}

/// A value with an uncertainty descriptor. `err` is a standard error for
/// Monte Carlo values and an error estimate for quadrature values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
    pub kind: EstimateKind,
}

impl Estimate {
    pub fn closed_form(value: f64) -> Self {
        Self { value, err: 0.0, kind: EstimateKind::ClosedForm }
    }

    pub fn quadrature(value: f64, err: f64) -> Self {
        Self { value, err: err.abs(), kind: EstimateKind::Quadrature }
    }

    pub fn monte_carlo(value: f64, se: f64) -> Self {
        Self { value, err: se.abs(), kind: EstimateKind::MonteCarlo }
    }
}
