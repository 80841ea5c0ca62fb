//! Gaussian mollification and the Euclidean-ball route to Δ_f.
//!
//! With f_h = f ∗ N(0, h²I), Δ_f ≤ 2‖f_h − f‖∞ + Δ_{f_h}, and Δ_{f_h} is
//! controlled by ball probabilities through the level sets of
//! exp(−‖w − y‖²/(2h²)), which are balls of radius √(2h² log(1/t)).

use std::f64::consts::{E, PI};

use rayon::prelude::*;

use crate::dist_zoo::MultivariateModel;
use crate::edgeworth::BoundConstants;
use crate::error::{domain, CoreError, Result};
use crate::numerics::{
    gamma, gauss_hermite, gauss_pdf, integrate_semi_infinite, sphere_sample, unit_sphere_area, Estimate,
    QuadratureSpec, RngStream, Welford,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MollifierKernel {
    Gaussian,
    /// 2K − K∗K: for the Gaussian, 2·N(0, h²) − N(0, 2h²).
    GaussianTwiced,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierSpec {
    pub h: f64,
    pub kernel: MollifierKernel,
}

impl MollifierSpec {
    pub fn new(h: f64, kernel: MollifierKernel) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(domain("bandwidth h must be positive"));
        }
        Ok(Self { h, kernel })
    }
}

/// Gauss–Hermite points per axis for d ≥ 3, about 2·10⁶ nodes in total.
fn hermite_points(d: usize) -> usize {
    ((2e6f64).powf(1.0 / d as f64).floor() as usize).clamp(3, 40)
}

fn gauss_smooth(f: &(dyn Fn(&[f64]) -> f64 + Sync), h: f64, x: &[f64], q: &QuadratureSpec) -> Result<f64> {
    let d = x.len();
    match d {
        0 => Err(domain("point must have at least one coordinate")),
        1 => {
            let g = |z: f64| gauss_pdf(z) * (f(&[x[0] + h * z]) + f(&[x[0] - h * z]));
            Ok(integrate_semi_infinite(g, 0.0, q)?.value)
        }
        2 => {
            let inner = |z0: f64| -> Result<f64> {
                let g = |z1: f64| gauss_pdf(z1) * (f(&[x[0] + h * z0, x[1] + h * z1]) + f(&[x[0] + h * z0, x[1] - h * z1]));
                Ok(integrate_semi_infinite(g, 0.0, q)?.value)
            };
            let failure = std::cell::RefCell::new(None);
            let outer = |z0: f64| {
                let v = |s: f64| match inner(s) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        f64::NAN
                    }
                };
                gauss_pdf(z0) * (v(z0) + v(-z0))
            };
            let r = integrate_semi_infinite(outer, 0.0, q);
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            Ok(r?.value)
        }
        _ => {
            let rule = gauss_hermite(hermite_points(d));
            let m = rule.nodes.len();
            let total = m.pow(d as u32);
            let sum: f64 = (0..total)
                .into_par_iter()
                .map(|mut k| {
                    let mut y = vec![0.0; d];
                    let mut w = 1.0;
                    for (yi, xi) in y.iter_mut().zip(x) {
                        let j = k % m;
                        k /= m;
                        *yi = xi + h * rule.nodes[j];
                        w *= rule.weights[j];
                    }
                    w * f(&y)
                })
                .sum();
            Ok(sum)
        }
    }
}

/// f_h(x) = ∫ φ_h(x − y) f(y) dy. Iterated adaptive quadrature for d ≤ 2,
/// tensor Gauss–Hermite above.
pub fn mollify_gauss(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    spec: MollifierSpec,
    x: &[f64],
    q: &QuadratureSpec,
) -> Result<f64> {
    MollifierSpec::new(spec.h, spec.kernel)?;
    match spec.kernel {
        MollifierKernel::Gaussian => gauss_smooth(f, spec.h, x, q),
        MollifierKernel::GaussianTwiced => {
            Ok(2.0 * gauss_smooth(f, spec.h, x, q)? - gauss_smooth(f, spec.h * 2f64.sqrt(), x, q)?)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSup {
    /// max over the probe grid of |f_h − f|; a lower estimate of the sup norm.
    pub value: f64,
    pub at: Vec<f64>,
}

pub fn sup_approx_error(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    spec: MollifierSpec,
    probe_grid: &[Vec<f64>],
    q: &QuadratureSpec,
) -> Result<ProbeSup> {
    if probe_grid.is_empty() {
        return Err(CoreError::Empty("probe grid"));
    }
    let mut best = ProbeSup { value: 0.0, at: probe_grid[0].clone() };
    for x in probe_grid {
        let e = (mollify_gauss(f, spec, x, q)? - f(x)).abs();
        if e > best.value {
            best = ProbeSup { value: e, at: x.clone() };
        }
    }
    Ok(best)
}

/// Inputs of the ball inequality; needs six positive eigenvalues of Σ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallBoundInputs {
    /// E‖X‖³.
    pub beta3_norm: f64,
    /// E‖X‖² = tr Σ.
    pub sigma2_trace: f64,
    pub top_eigs: [f64; 6],
    pub n: u64,
    pub constants: BoundConstants,
}

impl BallBoundInputs {
    pub fn new(beta3_norm: f64, sigma2_trace: f64, eigs: &[f64], n: u64, constants: BoundConstants) -> Result<Self> {
        let positive = eigs.iter().filter(|&&e| e > 0.0).count();
        if eigs.len() < 6 || positive < 6 {
            return Err(CoreError::InsufficientEigenvalues(positive.min(eigs.len())));
        }
        if n == 0 || !(beta3_norm > 0.0) || !(sigma2_trace > 0.0) {
            return Err(domain("ball inputs need n ≥ 1 and positive moments"));
        }
        let mut top = [0.0; 6];
        let mut sorted = eigs.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        top.copy_from_slice(&sorted[..6]);
        Ok(Self { beta3_norm, sigma2_trace, top_eigs: top, n, constants })
    }

    pub fn from_model(model: &MultivariateModel, n: u64, constants: BoundConstants) -> Result<Self> {
        Self::new(model.beta3_norm(), model.trace_sigma2(), model.eigenvalues(), n, constants)
    }

    /// σ₁⋯σ₆.
    pub fn sigma_product(&self) -> f64 {
        self.top_eigs.iter().map(|e| e.sqrt()).product()
    }

    fn prefactor(&self) -> f64 {
        self.constants.scale * self.beta3_norm / (self.n as f64).sqrt()
    }
}

/// |P(‖W_n − y‖ ≤ R) − P(‖W − y‖ ≤ R)| bound with r = |R − ‖y‖|:
/// Cβ₃n^{-1/2}/(1 + r³/σ³)·{R³e^{−cr²/σ²}/(σ₁⋯σ₆) + 1/σ³ + e^{−cr²/σ²}/(σ₁⋯σ₆)^{1/2}}.
pub fn senatov_ball_delta(inputs: &BallBoundInputs, radius: f64, center_dist: f64) -> Result<f64> {
    if !(radius >= 0.0 && center_dist >= 0.0) {
        return Err(domain("radius and center distance must be nonnegative"));
    }
    let s2 = inputs.sigma2_trace;
    let s3 = s2.powf(1.5);
    let r = (radius - center_dist).abs();
    let decay = (-inputs.constants.decay * r * r / s2).exp();
    let p = inputs.sigma_product();
    let brace = radius.powi(3) * decay / p + 1.0 / s3 + decay / p.sqrt();
    Ok(inputs.prefactor() / (1.0 + r.powi(3) / s3) * brace)
}

/// (3/2)^{5/2} e^{1/e} 2³.
pub fn holder_constant() -> f64 {
    1.5f64.powf(2.5) * E.powf(1.0 / E) * 8.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderIntegrals {
    /// Bound on ∫₀¹ (2τ log 1/t)^{3/2} 1{‖y‖ < √(8τ log 1/t)} dt.
    pub i1_bound: f64,
    /// ∫₀¹ 1{‖y‖ < √(8τ log 1/t)} dt = exp(−‖y‖²/(8τ)).
    pub i2_exact: f64,
    /// Bound on ∫₀¹ (2τ log 1/t)^{3/2} 1{‖y‖ ≥ √(8τ log 1/t)} dt.
    pub i3_bound: f64,
}

/// t-integrals of the ball bound at level-set scale τ (radius √(2τ log 1/t)).
pub fn holder_t_integrals(norm_y: f64, tau: f64) -> Result<HolderIntegrals> {
    if !(norm_y >= 0.0 && tau > 0.0) {
        return Err(domain("need ‖y‖ ≥ 0 and τ > 0"));
    }
    Ok(HolderIntegrals {
        i1_bound: holder_constant() * tau.powf(1.5) * (-norm_y * norm_y / (16.0 * tau)).exp(),
        i2_exact: (-norm_y * norm_y / (8.0 * tau)).exp(),
        i3_bound: (2.0 * tau).powf(1.5) * gamma(2.5),
    })
}

/// Quadrature values of the three t-integrals, for comparison with
/// `holder_t_integrals`. The indicator cuts [0, 1] at t* = exp(−‖y‖²/(8τ)).
pub fn holder_t_quadrature(norm_y: f64, tau: f64, q: &QuadratureSpec) -> Result<(f64, f64, f64)> {
    let cut = (-norm_y * norm_y / (8.0 * tau)).exp();
    let g = |t: f64| if t <= 0.0 { 0.0 } else { (2.0 * tau * (1.0 / t).ln()).max(0.0).powf(1.5) };
    // u = log(1/t) removes the endpoint singularity: dt = e^{−u} du
    let gu = |u: f64| (2.0 * tau * u).powf(1.5) * (-u).exp();
    let u_cut = norm_y * norm_y / (8.0 * tau);
    let i1 = integrate_semi_infinite(gu, u_cut, q)?.value;
    let i2 = integrate_semi_infinite(|u: f64| (-u).exp(), u_cut, q)?.value;
    let i3 = if cut >= 1.0 { 0.0 } else { crate::numerics::integrate_1d(g, cut, 1.0, q)?.value };
    Ok((i1, i2, i3))
}

/// y-integration settings for `normball_delta_bound`.
#[derive(Clone, Copy, Debug)]
pub struct BallIntegration {
    pub quad: QuadratureSpec,
    /// Sphere directions for the angular average; ignored for radial f.
    pub directions: usize,
    pub rng: RngStream,
    /// f depends on ‖y‖ only.
    pub radial: bool,
}

impl Default for BallIntegration {
    fn default() -> Self {
        Self {
            quad: QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-10, ..Default::default() },
            directions: 256,
            rng: RngStream::new(0x6261_6c6c, 0),
            radial: false,
        }
    }
}

/// Cβ₃/(n^{1/2}(2π)^{d/2})·[h³/(σ₁⋯σ₆) + 1/σ³ + 1/(σ₁⋯σ₆)^{1/2}]·∫[8σ³/(8σ³ + h³‖s‖³) + e^{−‖s‖²/16}]|f(hs)| ds.
///
/// h is the kernel bandwidth, so the level-set scale is h². The s-integral
/// runs in polar form: radial quadrature along sphere directions.
pub fn normball_delta_bound(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    model: &MultivariateModel,
    h: f64,
    n: u64,
    k: BoundConstants,
    integ: &BallIntegration,
) -> Result<Estimate> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(domain("bandwidth h must be positive"));
    }
    let inputs = BallBoundInputs::from_model(model, n, k)?;
    let d = model.dim();
    let s2 = inputs.sigma2_trace;
    let s3 = s2.powf(1.5);
    let p = inputs.sigma_product();
    let bracket = h.powi(3) / p + 1.0 / s3 + 1.0 / p.sqrt();
    let weight = |r: f64| 8.0 * s3 / (8.0 * s3 + (h * r).powi(3)) + (-r * r / 16.0).exp();
    let along = |a: &[f64]| -> Result<f64> {
        let g = |r: f64| {
            let y: Vec<f64> = a.iter().map(|v| h * r * v).collect();
            r.powi(d as i32 - 1) * weight(r) * f(&y).abs()
        };
        integrate_semi_infinite(g, 0.0, &integ.quad).map(|e| e.value).map_err(|e| match e {
            CoreError::Divergent(_) | CoreError::ToleranceNotMet { .. } | CoreError::NonFiniteIntegrand { .. } => {
                CoreError::NotAdmissible("weighted integral of |f(hs)| is not finite".into())
            }
            other => other,
        })
    };
    let area = unit_sphere_area(d);
    let integral = if integ.radial {
        let mut e1 = vec![0.0; d];
        e1[0] = 1.0;
        Estimate::quadrature(area * along(&e1)?, 0.0)
    } else {
        if integ.directions < 2 {
            return Err(domain("need at least 2 directions"));
        }
        let dirs = sphere_sample(d, integ.directions, integ.rng)?;
        let vals: Vec<Result<f64>> = dirs.par_iter().map(|a| along(a)).collect();
        let mut w = Welford::new();
        for v in vals {
            w.push(v?);
        }
        Estimate::monte_carlo(area * w.mean, area * w.std_error())
    };
    let scale = inputs.prefactor() * bracket / (2.0 * PI).powf(d as f64 / 2.0);
    Ok(Estimate { value: scale * integral.value, err: scale * integral.err, kind: integral.kind })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandwidthChoice {
    pub h_star: f64,
    pub total: f64,
    /// (h, 2‖f_h − f‖ on the probe grid, ball bound) per admissible grid point.
    pub profile: Vec<(f64, f64, f64)>,
}

/// argmin over the grid of 2·sup_approx_error + normball_delta_bound, ties to smaller h.
#[allow(clippy::too_many_arguments)]
pub fn optimize_bandwidth(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    model: &MultivariateModel,
    n: u64,
    h_grid: &[f64],
    kernel: MollifierKernel,
    k: BoundConstants,
    probe_grid: &[Vec<f64>],
    integ: &BallIntegration,
) -> Result<BandwidthChoice> {
    if h_grid.is_empty() {
        return Err(CoreError::Empty("bandwidth grid"));
    }
    let mut grid = h_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut profile = Vec::new();
    let mut last_err = None;
    for &h in &grid {
        let spec = MollifierSpec::new(h, kernel)?;
        let bound = match normball_delta_bound(f, model, h, n, k, integ) {
            Ok(b) => b.value,
            Err(e @ CoreError::NotAdmissible(_)) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let bias = 2.0 * sup_approx_error(f, spec, probe_grid, &integ.quad)?.value;
        profile.push((h, bias, bound));
    }
    let best = profile
        .iter()
        .fold(None::<(f64, f64)>, |acc, &(h, b, d)| match acc {
            Some((_, t)) if t <= b + d => acc,
            _ => Some((h, b + d)),
        })
        .ok_or_else(|| last_err.unwrap_or(CoreError::NotAdmissible("no admissible bandwidth".into())))?;
    Ok(BandwidthChoice { h_star: best.0, total: best.1, profile })
}
