use thiserror::Error;

use crate::numerics::Estimate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("tolerance not met: best estimate {} with error {}", .best.value, .best.err)]
    ToleranceNotMet { best: Estimate },

    #[error("integrand is not finite at x = {x} (value {value})")]
    NonFiniteIntegrand { x: f64, value: f64 },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("moment absent: {0}")]
    MomentAbsent(&'static str),

    #[error("bound vacuous: (sup+1/2n)^n does not decay (base {base})")]
    VacuousBound { base: f64 },

    #[error("test function returned a non-finite value on sample {index} (input {input})")]
    NonFiniteSample { index: u64, input: f64 },

    #[error("representation hypothesis fails at x: {0}")]
    HypothesisFails(String),

    #[error("ill-conditioned frequency: |h^(a)| = {0:e}")]
    IllConditionedFrequency(f64),

    #[error("no frequency with |h^(a)| > 1e-8 found in the scan range")]
    NoUsableFrequency,

    #[error("f not admissible: {0}")]
    NotAdmissible(String),

    #[error("ball bound needs 6 positive covariance eigenvalues, found {0}")]
    InsufficientEigenvalues(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("direction has zero projected variance")]
    DegenerateDirection,

    #[error("atom {index} has negative bound {bound}")]
    NegativeAtomBound { index: usize, bound: f64 },

    #[error("unknown model: {0}")]
    UnknownModel(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn domain(msg: impl Into<String>) -> CoreError {
    CoreError::Domain(msg.into())
}
