//! Half-space representations of functions with known Fourier data.
//!
//! With the convention f(x) = ∫ e^{i⟨ω,x⟩} f̌(ω) dω and f̌ = |f̌|e^{ib}:
//!
//!   f(x) = f(0) + ∇f(0)·x − ∫ Σ_{ε=±1} ∫₀^∞ (ε⟨ω,x⟩ − u)₊ cos(u + εb(ω)) du |f̌(ω)| dω
//!
//! and, for an integrable activation h with ȟ(a) = |ȟ(a)|e^{ic_h} ≠ 0,
//!
//!   f(x) = (2π|ȟ(a)|)^{-1} ∫∫ h(⟨ω,x⟩/a + u) cos(au + c_h − b(ω)) |f̌(ω)| du dω.

use std::cell::{Cell, RefCell};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dist_zoo::{MultivariateModel, UnivariateModel};
use crate::edgeworth::{char_decay_term, charfn_sup_default, BoundConstants, BoundReport};
use crate::error::{domain, CoreError, Result};
use crate::numerics::{
    gauss_legendre, gauss_pdf, integrate_1d, integrate_semi_infinite, sphere_sample, unit_sphere_area, Estimate,
    GaussRule, QuadratureSpec, RngStream, Welford,
};
use crate::relu_delta::kappa;

/// Smallest |ȟ(a)| accepted for the activation representation.
pub const MIN_ACTIVATION_FOURIER: f64 = 1e-8;

type VecFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VecTransform = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;
type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type ScalarTransform = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// w·exp(−Σ_j α_j (x_j − μ_j)²).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussComponent {
    pub weight: f64,
    pub alpha: Vec<f64>,
    pub center: Vec<f64>,
}

impl GaussComponent {
    fn eval(&self, x: &[f64]) -> f64 {
        let q: f64 = self.alpha.iter().zip(&self.center).zip(x).map(|((a, m), v)| a * (v - m).powi(2)).sum();
        self.weight * (-q).exp()
    }

    /// Each factor's transform is e^{−iω_jμ_j} times the N(0, 2α_j) density.
    fn transform(&self, w: &[f64]) -> Complex64 {
        let mut phase = 0.0;
        let mut mag = self.weight;
        for ((a, m), o) in self.alpha.iter().zip(&self.center).zip(w) {
            mag *= (-o * o / (4.0 * a)).exp() / (4.0 * PI * a).sqrt();
            phase -= o * m;
        }
        Complex64::from_polar(mag, phase)
    }

    fn proposal_density(&self, w: &[f64]) -> f64 {
        self.alpha.iter().zip(w).map(|(a, o)| (-o * o / (4.0 * a)).exp() / (4.0 * PI * a).sqrt()).product()
    }
}

/// A test function with analytic Fourier transform.
#[derive(Clone)]
pub struct FourierFunction {
    name: String,
    dim: usize,
    f: VecFn,
    transform: VecTransform,
    f0: f64,
    grad0: Vec<f64>,
    omega_box: Vec<f64>,
    mixture: Option<Vec<GaussComponent>>,
}

impl fmt::Debug for FourierFunction {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("FourierFunction").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl FourierFunction {
    /// General constructor. `omega_box` holds the half-widths outside which
    /// |f̌| is negligible; tensor quadrature integrates over that box.
    pub fn new(
        name: &str,
        f: VecFn,
        transform: VecTransform,
        f0: f64,
        grad0: Vec<f64>,
        omega_box: Vec<f64>,
    ) -> Result<Self> {
        let dim = grad0.len();
        if dim == 0 || omega_box.len() != dim {
            return Err(domain("gradient and ω box must have the function's dimension"));
        }
        if omega_box.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(domain("ω box half-widths must be positive and finite"));
        }
        Ok(Self { name: name.to_string(), dim, f, transform, f0, grad0, omega_box, mixture: None })
    }

    /// Finite signed mixture of anisotropic Gaussian bumps.
    pub fn gaussian_mixture(name: &str, components: Vec<GaussComponent>) -> Result<Self> {
        let first = components.first().ok_or(CoreError::Empty("mixture components"))?;
        let dim = first.alpha.len();
        for c in &components {
            if c.alpha.len() != dim || c.center.len() != dim || dim == 0 {
                return Err(domain("mixture components must share one positive dimension"));
            }
            if c.alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) || !c.weight.is_finite() {
                return Err(domain("mixture widths must be positive and weights finite"));
            }
        }
        let zero = vec![0.0; dim];
        let f0: f64 = components.iter().map(|c| c.eval(&zero)).sum();
        let grad0: Vec<f64> = (0..dim)
            .map(|j| components.iter().map(|c| c.eval(&zero) * 2.0 * c.alpha[j] * c.center[j]).sum())
            .collect();
        // N(0, 2α) tails beyond 10 standard deviations are below e^{-50}
        let omega_box: Vec<f64> = (0..dim)
            .map(|j| components.iter().map(|c| 10.0 * (2.0 * c.alpha[j]).sqrt()).fold(0.0, f64::max))
            .collect();
        let cf = components.clone();
        let ct = components.clone();
        Ok(Self {
            name: name.to_string(),
            dim,
            f: Arc::new(move |x| cf.iter().map(|c| c.eval(x)).sum()),
            transform: Arc::new(move |w| ct.iter().map(|c| c.transform(w)).sum()),
            f0,
            grad0,
            omega_box,
            mixture: Some(components),
        })
    }

    /// exp(−‖x‖²/2) in d dimensions; f̌ is the standard normal density.
    pub fn gaussian(d: usize) -> Result<Self> {
        Self::gaussian_mixture(
            &format!("gauss:d={d}"),
            vec![GaussComponent { weight: 1.0, alpha: vec![0.5; d], center: vec![0.0; d] }],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn fourier(&self, w: &[f64]) -> Complex64 {
        (self.transform)(w)
    }

    pub fn fourier_magnitude(&self, w: &[f64]) -> f64 {
        self.fourier(w).norm()
    }

    /// b(ω) ∈ (−π, π].
    pub fn phase(&self, w: &[f64]) -> f64 {
        let p = self.fourier(w).arg();
        if p == -PI {
            PI
        } else {
            p
        }
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn grad0(&self) -> &[f64] {
        &self.grad0
    }

    pub fn omega_box(&self) -> &[f64] {
        &self.omega_box
    }

    pub fn components(&self) -> Option<&[GaussComponent]> {
        self.mixture.as_deref()
    }

    /// E f(W) for W ~ N(0, Σ), available for Gaussian mixtures:
    /// det(I + 2DΣ)^{-1/2} exp(−μᵀ(Σ + (2D)^{-1})^{-1}μ/2) per component.
    pub fn gaussian_expectation(&self, cov: &DMatrix<f64>) -> Option<f64> {
        let comps = self.mixture.as_ref()?;
        if cov.nrows() != self.dim || cov.ncols() != self.dim {
            return None;
        }
        let mut total = 0.0;
        for c in comps {
            let d2 = DMatrix::from_diagonal(&DVector::from_iterator(self.dim, c.alpha.iter().map(|a| 2.0 * a)));
            let det = (DMatrix::identity(self.dim, self.dim) + &d2 * cov).determinant();
            let inv = DMatrix::from_diagonal(&DVector::from_iterator(self.dim, c.alpha.iter().map(|a| 0.5 / a)));
            let mu = DVector::from_column_slice(&c.center);
            let m = (cov + inv).try_inverse()?;
            total += c.weight * (-0.5 * mu.dot(&(m * &mu))).exp() / det.sqrt();
        }
        Some(total)
    }
}

/// How ω-integrals are evaluated.
#[derive(Clone, Copy, Debug)]
pub enum OmegaRule {
    /// Nested adaptive quadrature over the ω box.
    Tensor(QuadratureSpec),
    /// Importance sampling from the Gaussian-mixture envelope of |f̌|.
    ImportanceSampled { samples: u64, rng: RngStream },
}

impl OmegaRule {
    /// Tensor quadrature for d ≤ 3, importance sampling above.
    pub fn auto(d: usize, spec: QuadratureSpec, rng: RngStream) -> Self {
        if d <= 3 {
            Self::Tensor(spec)
        } else {
            Self::ImportanceSampled { samples: 1_000_000, rng }
        }
    }
}

fn nested(g: &dyn Fn(&[f64]) -> f64, half: &[f64], spec: &QuadratureSpec) -> Result<Estimate> {
    let point = RefCell::new(vec![0.0; half.len()]);
    nested_level(g, half, spec, &point, 0)
}

fn nested_level(
    g: &dyn Fn(&[f64]) -> f64,
    half: &[f64],
    spec: &QuadratureSpec,
    point: &RefCell<Vec<f64>>,
    level: usize,
) -> Result<Estimate> {
    let last = level + 1 == half.len();
    let failure: RefCell<Option<CoreError>> = RefCell::new(None);
    let inner_err = Cell::new(0.0f64);
    let inner_spec = spec.with_abs_tol(spec.abs_tol / (2.0 * half[level]));
    let h = |w: f64| {
        point.borrow_mut()[level] = w;
        if last {
            let p = point.borrow();
            return g(&p);
        }
        match nested_level(g, half, &inner_spec, point, level + 1) {
            Ok(e) => {
                inner_err.set(inner_err.get().max(e.err));
                e.value
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let res = integrate_1d(h, -half[level], half[level], spec);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let e = res?;
    Ok(Estimate::quadrature(e.value, e.err + 2.0 * half[level] * inner_err.get()))
}

/// ∫ g(ω) dω. Under importance sampling g must vanish where |f̌| does.
pub fn integrate_omega(
    fm: &FourierFunction,
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    rule: OmegaRule,
) -> Result<Estimate> {
    integrate_omega_scaled(fm, g, rule, 1.0)
}

fn integrate_omega_scaled(
    fm: &FourierFunction,
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    rule: OmegaRule,
    box_scale: f64,
) -> Result<Estimate> {
    match rule {
        OmegaRule::Tensor(spec) => {
            spec.validate()?;
            let half: Vec<f64> = fm.omega_box.iter().map(|l| l * box_scale).collect();
            nested(g, &half, &spec)
        }
        OmegaRule::ImportanceSampled { samples, rng } => {
            let comps = fm.mixture.as_ref().ok_or_else(|| {
                domain("importance sampling needs a Gaussian-mixture envelope of |f̌|")
            })?;
            if samples < 100 {
                return Err(domain("importance sampling needs at least 100 samples"));
            }
            let total: f64 = comps.iter().map(|c| c.weight.abs()).sum();
            let acc = crate::mc_oracle::run_chunked(samples, rng, || vec![Welford::new()], |acc, r, _| {
                let mut pick = r.random::<f64>() * total;
                let mut k = 0;
                while k + 1 < comps.len() && pick >= comps[k].weight.abs() {
                    pick -= comps[k].weight.abs();
                    k += 1;
                }
                let w: Vec<f64> = comps[k]
                    .alpha
                    .iter()
                    .map(|a| {
                        let z: f64 = StandardNormal.sample(r);
                        z * (2.0 * a).sqrt()
                    })
                    .collect();
                let q: f64 = comps.iter().map(|c| c.weight.abs() / total * c.proposal_density(&w)).sum();
                let y = g(&w) / q;
                if !y.is_finite() {
                    return Err(CoreError::NonFiniteIntegrand { x: w[0], value: y });
                }
                acc[0].push(y);
                Ok(())
            })?;
            Ok(Estimate::monte_carlo(acc[0].mean, acc[0].std_error()))
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_point(fm: &FourierFunction, x: &[f64]) -> Result<()> {
    if x.len() != fm.dim {
        return Err(domain(format!("point has length {}, function dimension is {}", x.len(), fm.dim)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(domain("point must be finite"));
    }
    Ok(())
}

/// −∫₀^∞ [(z − u)₊e^{iu} + (−z − u)₊e^{−iu}] du by quadrature; equals e^{iz} − iz − 1.
pub fn relu_complex_identity(z: f64, spec: &QuadratureSpec) -> Result<Complex64> {
    if !z.is_finite() {
        return Err(domain("z must be finite"));
    }
    if z == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let a = z.abs();
    let s = z.signum();
    let re = integrate_1d(|u| (a - u) * u.cos(), 0.0, a, spec)?.value;
    let im = integrate_1d(|u| (a - u) * u.sin(), 0.0, a, spec)?.value;
    // the second term is the mirror image of the first
    Ok(-Complex64::new(re, s * im))
}

/// ∫ min{2|⟨ω,x⟩|, ⟨ω,x⟩²/2} |f̌(ω)| dω. Under tensor quadrature the
/// integral is recomputed on the doubled ω box; growth signals divergence.
pub fn barron_condition(fm: &FourierFunction, x: &[f64], rule: OmegaRule) -> Result<Estimate> {
    check_point(fm, x)?;
    if x.iter().all(|&v| v == 0.0) {
        return Ok(Estimate::closed_form(0.0));
    }
    let g = |w: &[f64]| {
        let z = dot(w, x).abs();
        (2.0 * z).min(0.5 * z * z) * fm.fourier_magnitude(w)
    };
    let fails = || CoreError::HypothesisFails(format!("representation hypothesis fails at x = {x:?}"));
    let base = match integrate_omega_scaled(fm, &g, rule, 1.0) {
        Err(CoreError::Divergent(_)) | Err(CoreError::NonFiniteIntegrand { .. }) => return Err(fails()),
        r => r?,
    };
    if let OmegaRule::Tensor(spec) = rule {
        let wide = integrate_omega_scaled(fm, &g, rule, 2.0)?;
        let slack = 10.0 * (base.err + wide.err) + spec.abs_tol.max(1e-6 * wide.value.abs());
        if (wide.value - base.value).abs() > slack {
            return Err(fails());
        }
    }
    Ok(base)
}

const U_RULE_POINTS: usize = 16;

fn u_rule() -> &'static GaussRule {
    use std::sync::OnceLock;
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(U_RULE_POINTS))
}

/// ∫₀^∞ (z − u)₊ cos(u + c) du by composite Gauss–Legendre on [0, z].
pub fn relu_cos_integral(z: f64, c: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let panels = (z / 1.5).ceil() as usize;
    u_rule().composite(|u| (z - u) * (u + c).cos(), 0.0, z, panels)
}

/// f(0) + ∇f(0)·x minus the ReLU double integral.
pub fn reconstruct_ridge(fm: &FourierFunction, x: &[f64], rule: OmegaRule) -> Result<Estimate> {
    barron_condition(fm, x, rule)?;
    let g = |w: &[f64]| {
        let z = dot(w, x);
        let f = fm.fourier(w);
        let (mag, b) = (f.norm(), f.arg());
        mag * (relu_cos_integral(z, b) + relu_cos_integral(-z, -b))
    };
    let integral = integrate_omega(fm, &g, rule)?;
    Ok(Estimate { value: fm.f0 + dot(&fm.grad0, x) - integral.value, ..integral })
}

/// Integrable activation with a usable frequency a.
#[derive(Clone)]
pub struct ActivationModel {
    name: String,
    h: ScalarFn,
    h_fourier: ScalarTransform,
    a: f64,
    c_h: f64,
    fourier_abs: f64,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for ActivationModel {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("ActivationModel")
            .field("name", &self.name)
            .field("a", &self.a)
            .field("c_h", &self.c_h)
            .field("abs_h_fourier", &self.fourier_abs)
            .finish()
    }
}

fn activation_spec() -> QuadratureSpec {
    QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-12, ..Default::default() }
}

/// ∫_ℝ g over pieces split at sorted breakpoints.
fn integrate_line(g: &dyn Fn(f64) -> f64, breaks: &[f64], spec: &QuadratureSpec) -> Result<Estimate> {
    let (lo, hi) = match (breaks.first(), breaks.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => (0.0, 0.0),
    };
    let left = integrate_semi_infinite(|s| g(-s), -lo, spec)?;
    let right = integrate_semi_infinite(g, hi, spec)?;
    let mut value = left.value + right.value;
    let mut err = left.err + right.err;
    for w in breaks.windows(2) {
        let e = integrate_1d(g, w[0], w[1], spec)?;
        value += e.value;
        err += e.err;
    }
    Ok(Estimate::quadrature(value, err))
}

/// ȟ(a) = (2π)^{-1} ∫ h(t) e^{−iat} dt by quadrature.
fn fourier_by_quadrature(h: &dyn Fn(f64) -> f64, a: f64, breaks: &[f64]) -> Result<Complex64> {
    let spec = activation_spec();
    let re = integrate_line(&|t| h(t) * (a * t).cos(), breaks, &spec)?.value;
    let im = integrate_line(&|t| -h(t) * (a * t).sin(), breaks, &spec)?.value;
    Ok(Complex64::new(re, im) / (2.0 * PI))
}

impl ActivationModel {
    /// Validates ∫|h| < ∞ and |ȟ(a)| ≥ MIN_ACTIVATION_FOURIER. `breakpoints`
    /// are points where h is not smooth.
    pub fn new(name: &str, h: ScalarFn, h_fourier: ScalarTransform, a: f64, breakpoints: Vec<f64>) -> Result<Self> {
        if !a.is_finite() {
            return Err(domain("frequency must be finite"));
        }
        let mut breaks = breakpoints;
        breaks.sort_by(f64::total_cmp);
        integrate_line(&|t| h(t).abs(), &breaks, &activation_spec())
            .map_err(|_| domain(format!("activation {name} is not integrable")))?;
        let v = h_fourier(a);
        if !(v.norm() >= MIN_ACTIVATION_FOURIER) {
            return Err(CoreError::IllConditionedFrequency(v.norm()));
        }
        Ok(Self { name: name.to_string(), h, h_fourier, a, c_h: v.arg(), fourier_abs: v.norm(), breakpoints: breaks })
    }

    /// h(t) = e^{−t²/2}, ȟ(a) = e^{−a²/2}/√(2π).
    pub fn gaussian_bump(a: f64) -> Result<Self> {
        Self::new(
            "gauss_bump",
            Arc::new(|t| (-0.5 * t * t).exp()),
            Arc::new(|a| Complex64::new((-0.5 * a * a).exp() / (2.0 * PI).sqrt(), 0.0)),
            a,
            vec![],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn h(&self, t: f64) -> f64 {
        (self.h)(t)
    }

    pub fn h_fourier(&self, a: f64) -> Complex64 {
        (self.h_fourier)(a)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn c_h(&self) -> f64 {
        self.c_h
    }

    pub fn abs_fourier(&self) -> f64 {
        self.fourier_abs
    }
}

/// Window h(t) = σ(t + α) − σ(t − α) of a bounded nondecreasing sigmoid.
/// ȟ is computed by quadrature. If |ȟ(probe_a)| is too small, a ∈ {0.1, 0.2, …, 20}
/// is scanned for the first usable frequency.
pub fn funahashi_window(sigmoid: ScalarFn, alpha: f64, probe_a: f64) -> Result<ActivationModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(domain("window half-width α must be positive"));
    }
    let (lo, hi) = (sigmoid(-1e6), sigmoid(1e6));
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(domain("sigmoid must be bounded and non-constant"));
    }
    let mut prev = sigmoid(-50.0);
    for i in 1..=1000 {
        let s = sigmoid(-50.0 + 0.1 * i as f64);
        if s < prev {
            return Err(domain("sigmoid must be nondecreasing"));
        }
        prev = s;
    }
    let sg = sigmoid.clone();
    let h: ScalarFn = Arc::new(move |t| sg(t + alpha) - sg(t - alpha));
    let breaks = vec![-alpha, alpha];
    let hf = h.clone();
    let bf = breaks.clone();
    let h_fourier: ScalarTransform =
        Arc::new(move |a| fourier_by_quadrature(hf.as_ref(), a, &bf).unwrap_or(Complex64::new(f64::NAN, f64::NAN)));
    let usable = |a: f64| h_fourier(a).norm() >= MIN_ACTIVATION_FOURIER;
    let a = if usable(probe_a) {
        probe_a
    } else {
        (1..=200).map(|k| 0.1 * k as f64).find(|&a| usable(a)).ok_or(CoreError::NoUsableFrequency)?
    };
    ActivationModel::new(&format!("window:α={alpha}"), h, h_fourier, a, breaks)
}

pub fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn heaviside(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// (2π|ȟ(a)|)^{-1} ∫∫ h(⟨ω,x⟩/a + u) cos(au + c_h − b(ω)) |f̌(ω)| du dω.
///
/// With v = ⟨ω,x⟩/a + u the u-integral is H_c cos θ − H_s sin θ, θ = c_h − b − ⟨ω,x⟩,
/// where H_c, H_s are the cosine and sine integrals of h at a, taken by quadrature of h.
pub fn reconstruct_activation(
    fm: &FourierFunction,
    act: &ActivationModel,
    x: &[f64],
    rule: OmegaRule,
) -> Result<Estimate> {
    check_point(fm, x)?;
    if act.a == 0.0 {
        return Err(domain("frequency a = 0 cannot rescale ⟨ω,x⟩"));
    }
    let spec = activation_spec();
    let hc = integrate_line(&|v| act.h(v) * (act.a * v).cos(), &act.breakpoints, &spec)?.value;
    let hs = integrate_line(&|v| act.h(v) * (act.a * v).sin(), &act.breakpoints, &spec)?.value;
    let norm = 2.0 * PI * act.fourier_abs;
    let g = |w: &[f64]| {
        let f = fm.fourier(w);
        let theta = act.c_h - f.arg() - dot(w, x);
        f.norm() * (hc * theta.cos() - hs * theta.sin())
    };
    let e = integrate_omega(fm, &g, rule)?;
    Ok(Estimate { value: e.value / norm, err: e.err / norm, kind: e.kind })
}

/// Bound on |Δ_ReLU(t)| for a univariate law at sample size n, returned
/// per t as a moment part and a characteristic-function part.
pub type ReluEnvelope = Box<dyn Fn(f64) -> BoundReport + Send + Sync>;

/// |t φ(t)| |μ₃|/(6√n σ³) + C[β₄/(σ⁴n) + n⁶(sup + 1/(2n))ⁿ] κ(t): the Edgeworth
/// term plus the pointwise remainder bound.
pub fn relu_envelope(k: BoundConstants) -> impl Fn(&UnivariateModel, u64) -> Result<ReluEnvelope> + Sync {
    move |model, n| {
        if n == 0 {
            return Err(domain("n must be at least 1"));
        }
        let m = *model.moments();
        let sup = charfn_sup_default(model)?;
        let (decay, base, vacuous) = char_decay_term(&sup, n);
        let edge = m.mu3.abs() / (6.0 * (n as f64).sqrt() * m.sigma2.powf(1.5));
        let mf = m.kurtosis()? / n as f64;
        Ok(Box::new(move |t: f64| {
            let kap = kappa(t);
            BoundReport {
                moment_term: edge * (t * gauss_pdf(t)).abs() + k.scale * mf * kap,
                char_term: k.scale * decay * kap,
                char_base: base,
                vacuous,
            }
        }))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RidgeBoundSpec {
    /// Angle grid size for d = 2, sphere samples for d ≥ 3. Ignored for d = 1.
    pub directions: usize,
    pub rng: RngStream,
    pub quad: QuadratureSpec,
}

impl Default for RidgeBoundSpec {
    fn default() -> Self {
        Self {
            directions: 64,
            rng: RngStream::new(0x0072_6964_6765, 0),
            quad: QuadratureSpec { abs_tol: 1e-10, rel_tol: 1e-9, ..Default::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeBound {
    pub moment_part: Estimate,
    pub char_part: f64,
    pub vacuous_directions: Vec<Vec<f64>>,
    pub directions: usize,
}

impl RidgeBound {
    pub fn total(&self) -> f64 {
        self.moment_part.value + self.char_part
    }

    pub fn valid(&self) -> Result<f64> {
        if self.vacuous_directions.is_empty() {
            Ok(self.total())
        } else {
            Err(CoreError::VacuousBound { base: f64::NAN })
        }
    }
}

struct DirectionTerm {
    moment: f64,
    char: f64,
    vacuous: bool,
}

/// Bound on |E f(W_n) − E f(W)| from the ReLU representation.
///
/// Writing ω = r·a and ⟨ω, W_n⟩ = r s_a V_n with s_a² = aᵀΣa, each direction
/// contributes s_a² ∫₀^∞ B_a(t) dt · [R(a) + R(−a)] where B_a is the univariate
/// envelope for the law of ⟨a, X⟩ and R(a) = ∫₀^∞ r^{d+1} |f̌(ra)| dr. Finite
/// R(±a) also certifies the moment hypothesis E⟨ω,W⟩²|f̌| < ∞.
pub fn delta_bound_ridge<E>(
    fm: &FourierFunction,
    envelope: &E,
    model: &MultivariateModel,
    n: u64,
    spec: &RidgeBoundSpec,
) -> Result<RidgeBound>
where
    E: Fn(&UnivariateModel, u64) -> Result<ReluEnvelope> + Sync,
{
    let d = fm.dim;
    if model.dim() != d {
        return Err(domain("model and function dimensions differ"));
    }
    let (dirs, weight, monte_carlo) = match d {
        1 => (vec![vec![1.0], vec![-1.0]], 1.0, false),
        2 => {
            if spec.directions < 4 {
                return Err(domain("need at least 4 directions"));
            }
            let m = spec.directions;
            let dirs = (0..m)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / m as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect();
            (dirs, 2.0 * PI / m as f64, false)
        }
        _ => {
            if spec.directions < 2 {
                return Err(domain("need at least 2 directions"));
            }
            (sphere_sample(d, spec.directions, spec.rng)?, unit_sphere_area(d), true)
        }
    };
    let radial = |a: &[f64]| -> Result<f64> {
        let mut w = vec![0.0; d];
        let g = |r: f64| {
            for (wi, ai) in w.iter_mut().zip(a) {
                *wi = r * ai;
            }
            r.powi(d as i32 + 1) * fm.fourier_magnitude(&w)
        };
        let g = std::cell::RefCell::new(g);
        match integrate_semi_infinite(|r| (g.borrow_mut())(r), 0.0, &spec.quad) {
            Ok(e) => Ok(e.value),
            Err(CoreError::Divergent(_)) => {
                Err(CoreError::HypothesisFails(format!("∫ r^(d+1)|f̌(ra)| dr diverges along a = {a:?}")))
            }
            Err(e) => Err(e),
        }
    };
    let terms: Vec<Result<DirectionTerm>> = dirs
        .par_iter()
        .map(|a| {
            let proj = model.project(a)?;
            let s2 = proj.moments().sigma2;
            let env = envelope(&proj, n)?;
            let im = integrate_semi_infinite(|t| env(t).moment_term, 0.0, &spec.quad)?.value;
            let ic = integrate_semi_infinite(|t| env(t).char_term, 0.0, &spec.quad).map(|e| e.value).unwrap_or(f64::INFINITY);
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            let r = radial(a)? + radial(&neg)?;
            Ok(DirectionTerm { moment: s2 * im * r, char: s2 * ic * r, vacuous: env(0.0).vacuous })
        })
        .collect();
    let mut mom = Welford::new();
    let mut chr = 0.0;
    let mut vacuous_directions = Vec::new();
    for (a, t) in dirs.iter().zip(terms) {
        let t = t?;
        mom.push(t.moment);
        chr += t.char;
        if t.vacuous {
            vacuous_directions.push(a.clone());
        }
    }
    let count = dirs.len();
    let moment_part = if monte_carlo {
        Estimate::monte_carlo(weight * mom.mean, weight * mom.std_error())
    } else {
        Estimate::quadrature(weight * mom.mean * count as f64, 0.0)
    };
    let char_part = if monte_carlo { weight * chr / count as f64 } else { weight * chr };
    Ok(RidgeBound { moment_part, char_part, vacuous_directions, directions: count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc_oracle::estimate_delta_multi;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tensor() -> OmegaRule {
        OmegaRule::Tensor(QuadratureSpec { abs_tol: 1e-9, rel_tol: 1e-9, ..Default::default() })
    }

    /// ∫₀^Z (Z − u) cos(u + c) du = −Z sin c + cos c − cos(Z + c).
    fn relu_cos_closed(z: f64, c: f64) -> f64 {
        if z <= 0.0 {
            0.0
        } else {
            -z * c.sin() + c.cos() - (z + c).cos()
        }
    }

    fn shifted_mixture() -> FourierFunction {
        FourierFunction::gaussian_mixture(
            "mix2",
            vec![
                GaussComponent { weight: 1.0, alpha: vec![0.5, 0.8], center: vec![0.3, -0.2] },
                GaussComponent { weight: -0.4, alpha: vec![1.2, 0.6], center: vec![-0.5, 0.4] },
            ],
        )
        .unwrap()
    }

    fn lattice(d: usize) -> Vec<Vec<f64>> {
        if d == 1 {
            (0..25).map(|i| vec![-3.0 + 0.25 * i as f64]).collect()
        } else {
            let mut v = Vec::new();
            for i in 0..5 {
                for j in 0..5 {
                    v.push(vec![-2.0 + i as f64, -2.0 + j as f64]);
                }
            }
            v
        }
    }

    #[test]
    fn complex_identity_examples() {
        let s = QuadratureSpec::default();
        assert_eq!(relu_complex_identity(0.0, &s).unwrap(), Complex64::new(0.0, 0.0));
        let p = relu_complex_identity(PI, &s).unwrap();
        assert!((p - Complex64::new(-2.0, -PI)).norm() < 1e-10);
        let one = relu_complex_identity(1.0, &s).unwrap();
        assert!((one - Complex64::new(-0.459698, -0.158529)).norm() < 1e-6);
    }

    #[test]
    fn complex_identity_grid() {
        let s = QuadratureSpec::default();
        for i in 0..81 {
            let z = -20.0 + 0.5 * i as f64;
            let lhs = relu_complex_identity(z, &s).unwrap();
            let rhs = Complex64::new(z.cos() - 1.0, z.sin() - z);
            assert!((lhs - rhs).norm() < 1e-9, "z={z}");
            assert!(rhs.norm() <= (2.0 * z.abs()).min(0.5 * z * z) + 1e-12);
            let mirror = relu_complex_identity(-z, &s).unwrap();
            assert!((mirror - lhs.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn relu_cos_matches_closed_form() {
        for &z in &[0.0, 0.3, 1.0, 7.7, 41.0, 90.0] {
            for &c in &[-2.0, 0.0, 0.4, PI] {
                assert!((relu_cos_integral(z, c) - relu_cos_closed(z, c)).abs() < 1e-11, "z={z} c={c}");
            }
        }
    }

    #[test]
    fn mixture_fourier_data() {
        let f = shifted_mixture();
        assert_relative_eq!(f.f0(), f.eval(&[0.0, 0.0]), max_relative = 1e-15);
        let h = 1e-6;
        for j in 0..2 {
            let mut p = vec![0.0; 2];
            let mut m = vec![0.0; 2];
            p[j] = h;
            m[j] = -h;
            let fd = (f.eval(&p) - f.eval(&m)) / (2.0 * h);
            assert!((fd - f.grad0()[j]).abs() < 1e-8);
        }
        let w = [0.7, -1.3];
        let neg = [-0.7, 1.3];
        assert_relative_eq!(f.fourier_magnitude(&w), f.fourier_magnitude(&neg), max_relative = 1e-14);
        assert_relative_eq!(f.phase(&w), -f.phase(&neg), max_relative = 1e-14);
        // inverse transform at one point by tensor quadrature
        let x = [0.4, 1.1];
        let g = |o: &[f64]| {
            let c = f.fourier(o);
            c.re * dot(o, &x).cos() - c.im * dot(o, &x).sin()
        };
        let back = integrate_omega(&f, &g, tensor()).unwrap();
        assert!((back.value - f.eval(&x)).abs() < 1e-8);
        let g1 = FourierFunction::gaussian(1).unwrap();
        assert_relative_eq!(g1.fourier_magnitude(&[0.3]), gauss_pdf(0.3), max_relative = 1e-14);
    }

    #[test]
    fn gaussian_expectation_closed_form() {
        let m = MultivariateModel::box_aniso(2).unwrap();
        let f = shifted_mixture();
        let exact = f.gaussian_expectation(m.covariance()).unwrap();
        // tensor quadrature of f against the N(0, Σ) density
        let cov = m.covariance().clone();
        let inv = cov.clone().try_inverse().unwrap();
        let det = cov.determinant();
        let spec = QuadratureSpec { abs_tol: 1e-10, rel_tol: 1e-10, ..Default::default() };
        let q = integrate_1d(
            |x| {
                integrate_1d(
                    |y| {
                        let v = DVector::from_column_slice(&[x, y]);
                        f.eval(&[x, y]) * (-0.5 * v.dot(&(&inv * &v))).exp() / (2.0 * PI * det.sqrt())
                    },
                    -12.0,
                    12.0,
                    &spec,
                )
                .unwrap()
                .value
            },
            -12.0,
            12.0,
            &spec,
        )
        .unwrap();
        assert!((q.value - exact).abs() < 1e-8, "{} vs {exact}", q.value);
    }

    #[test]
    fn barron_examples() {
        let f = FourierFunction::gaussian(1).unwrap();
        assert_eq!(barron_condition(&f, &[0.0], tensor()).unwrap().value, 0.0);
        let b1 = barron_condition(&f, &[1.0], tensor()).unwrap();
        let spec = QuadratureSpec::default();
        let oracle = integrate_semi_infinite(|w| 2.0 * (2.0 * w).min(0.5 * w * w) * gauss_pdf(w), 0.0, &spec).unwrap();
        assert!((b1.value - oracle.value).abs() < 1e-8);
        let b2 = barron_condition(&f, &[2.0], tensor()).unwrap();
        assert!(b2.value <= 4.0 * b1.value);
    }

    #[test]
    fn barron_detects_divergence() {
        // |f̌| = 1/(π(1 + ω²)); min{2|ω|, ω²/2}|f̌| ~ 2/(π|ω|) is not integrable
        let f = FourierFunction::new(
            "cauchy_like",
            Arc::new(|x: &[f64]| (-x[0].abs()).exp()),
            Arc::new(|w: &[f64]| Complex64::new(1.0 / (PI * (1.0 + w[0] * w[0])), 0.0)),
            1.0,
            vec![0.0],
            vec![1e4],
        )
        .unwrap();
        assert!(matches!(barron_condition(&f, &[1.0], tensor()), Err(CoreError::HypothesisFails(_))));
    }

    #[test]
    fn ridge_examples() {
        let f = FourierFunction::gaussian(1).unwrap();
        assert_eq!(reconstruct_ridge(&f, &[0.0], tensor()).unwrap().value, 1.0);
        let r = reconstruct_ridge(&f, &[1.0], tensor()).unwrap();
        assert!((r.value - (-0.5f64).exp()).abs() < 1e-8);
        let l = reconstruct_ridge(&f, &[-1.0], tensor()).unwrap();
        assert!((l.value - r.value).abs() < 1e-8);
    }

    #[test]
    fn ridge_lattice_1d_2d() {
        for f in [FourierFunction::gaussian(1).unwrap(), FourierFunction::gaussian(2).unwrap(), shifted_mixture()] {
            for x in lattice(f.dim()) {
                let r = reconstruct_ridge(&f, &x, tensor()).unwrap();
                assert!((r.value - f.eval(&x)).abs() < 1e-8, "{} at {x:?}: {} vs {}", f.name(), r.value, f.eval(&x));
            }
        }
    }

    #[test]
    fn ridge_importance_sampled() {
        let f = FourierFunction::gaussian(4).unwrap();
        let x = [0.5, -0.3, 0.2, 0.1];
        let rule = OmegaRule::ImportanceSampled { samples: 200_000, rng: RngStream::new(11, 0) };
        let r = reconstruct_ridge(&f, &x, rule).unwrap();
        assert!((r.value - f.eval(&x)).abs() < 4.0 * r.err, "{r:?} vs {}", f.eval(&x));
    }

    #[test]
    fn activation_examples() {
        let bump = ActivationModel::gaussian_bump(1.0).unwrap();
        assert_eq!(bump.c_h(), 0.0);
        let f1 = FourierFunction::gaussian(1).unwrap();
        let at0 = reconstruct_activation(&f1, &bump, &[0.0], tensor()).unwrap();
        assert!((at0.value - 1.0).abs() < 1e-8);
        let at1 = reconstruct_activation(&f1, &bump, &[1.0], tensor()).unwrap();
        assert!((at1.value - 0.606531).abs() < 1e-6);
        let r = reconstruct_ridge(&f1, &[1.0], tensor()).unwrap();
        assert!((at1.value - r.value).abs() < 1e-8);
        let m = shifted_mixture();
        for x in lattice(2) {
            let v = reconstruct_activation(&m, &bump, &x, tensor()).unwrap();
            assert!((v.value - m.eval(&x)).abs() < 1e-8, "{x:?}");
        }
        let tiny = ActivationModel::gaussian_bump(7.0);
        assert!(matches!(tiny, Err(CoreError::IllConditionedFrequency(_))));
    }

    #[test]
    fn activation_even_function_symmetric() {
        let f = FourierFunction::gaussian(2).unwrap();
        let act = funahashi_window(Arc::new(logistic), 1.0, 0.7).unwrap();
        for x in [[0.5, 1.0], [2.0, -0.3]] {
            let p = reconstruct_activation(&f, &act, &x, tensor()).unwrap();
            let m = reconstruct_activation(&f, &act, &[-x[0], -x[1]], tensor()).unwrap();
            assert!((p.value - m.value).abs() < 1e-8);
            assert!((p.value - f.eval(&x)).abs() < 1e-7);
        }
    }

    #[test]
    fn window_examples() {
        let logi = funahashi_window(Arc::new(logistic), 1.0, 0.0).unwrap();
        assert!((logi.h_fourier(0.0).re - 1.0 / PI).abs() < 1e-10);
        let step = funahashi_window(Arc::new(heaviside), 1.0, 1.0).unwrap();
        assert!((step.h_fourier(1.0).re - 1f64.sin() / PI).abs() < 1e-10);
        assert!(step.h_fourier(1.0).im.abs() < 1e-10);
        // sin(αa) vanishes at a = π: the scan moves past it
        let scanned = funahashi_window(Arc::new(heaviside), 1.0, PI).unwrap();
        assert!(scanned.a() != PI && scanned.abs_fourier() >= MIN_ACTIVATION_FOURIER);
        let f = FourierFunction::gaussian(1).unwrap();
        assert!(reconstruct_activation(&f, &logi, &[1.0], tensor()).is_err());
        assert!(funahashi_window(Arc::new(|t: f64| -t.tanh()), 1.0, 0.5).is_err());
        assert!(funahashi_window(Arc::new(logistic), 0.0, 0.5).is_err());
    }

    #[test]
    fn heaviside_window_reconstructs() {
        let f = FourierFunction::gaussian(1).unwrap();
        let act = funahashi_window(Arc::new(heaviside), 1.0, 1.0).unwrap();
        for &x in &[-2.0, 0.0, 1.5] {
            let v = reconstruct_activation(&f, &act, &[x], tensor()).unwrap();
            assert!((v.value - f.eval(&[x])).abs() < 1e-7);
        }
    }

    fn quick() -> RidgeBoundSpec {
        RidgeBoundSpec { directions: 16, ..Default::default() }
    }

    #[test]
    fn ridge_bound_gaussian_law_and_scaling() {
        let f = FourierFunction::gaussian(2).unwrap();
        let env = relu_envelope(BoundConstants::default());
        let g = MultivariateModel::gauss_iso(2).unwrap();
        let b = delta_bound_ridge(&f, &env, &g, 100, &quick()).unwrap();
        assert!(b.moment_part.value >= 0.0);
        let mc = estimate_delta_multi(&g, |x| f.eval(x), 100, 100_000, RngStream::new(3, 0), f.gaussian_expectation(g.covariance())).unwrap();
        assert!(mc.delta.abs() < 4.0 * mc.se);
        // symmetric law: the Edgeworth term vanishes and the rest scales as 1/n
        let u = MultivariateModel::box_aniso(2).unwrap();
        let b1 = delta_bound_ridge(&f, &env, &u, 100, &quick()).unwrap();
        let b2 = delta_bound_ridge(&f, &env, &u, 200, &quick()).unwrap();
        assert_relative_eq!(b1.moment_part.value, 2.0 * b2.moment_part.value, max_relative = 1e-3);
    }

    #[test]
    fn ridge_bound_dominates_mc() {
        let f = FourierFunction::gaussian(2).unwrap();
        let env = relu_envelope(BoundConstants::default());
        let m = MultivariateModel::exp_product(2).unwrap();
        let b = delta_bound_ridge(&f, &env, &m, 100, &quick()).unwrap();
        assert!(!b.vacuous_directions.is_empty());
        assert!(b.valid().is_err());
        let mc =
            estimate_delta_multi(&m, |x| f.eval(x), 100, 1_000_000, RngStream::new(4, 0), f.gaussian_expectation(m.covariance()))
                .unwrap();
        assert!(b.moment_part.value >= mc.abs_delta, "{b:?} vs {mc:?}");
    }

    #[test]
    fn ridge_bound_monotone_in_envelope() {
        let f = FourierFunction::gaussian(2).unwrap();
        let env = relu_envelope(BoundConstants::default());
        let bigger = |m: &UnivariateModel, n: u64| -> Result<ReluEnvelope> {
            let e = env(m, n)?;
            Ok(Box::new(move |t| e(t).scaled(1.5)))
        };
        let u = MultivariateModel::box_aniso(2).unwrap();
        let a = delta_bound_ridge(&f, &env, &u, 50, &quick()).unwrap();
        let b = delta_bound_ridge(&f, &bigger, &u, 50, &quick()).unwrap();
        assert!(b.moment_part.value >= a.moment_part.value && b.char_part >= a.char_part);
    }

    #[test]
    fn ridge_bound_higher_dimension() {
        let f = FourierFunction::gaussian(3).unwrap();
        let env = relu_envelope(BoundConstants::default());
        let u = MultivariateModel::box_aniso(3).unwrap();
        let b = delta_bound_ridge(&f, &env, &u, 100, &RidgeBoundSpec { directions: 24, ..Default::default() }).unwrap();
        assert!(b.moment_part.value > 0.0 && b.moment_part.err > 0.0);
        assert!(delta_bound_ridge(&f, &env, &MultivariateModel::box_aniso(2).unwrap(), 100, &quick()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn phase_in_range_and_hermitian(w0 in -6.0f64..6.0, w1 in -6.0f64..6.0) {
            let f = shifted_mixture();
            let p = f.phase(&[w0, w1]);
            prop_assert!(p > -PI && p <= PI);
            prop_assert!(f.fourier_magnitude(&[w0, w1]) >= 0.0);
            let a = f.fourier(&[w0, w1]);
            let b = f.fourier(&[-w0, -w1]);
            prop_assert!((a - b.conj()).norm() < 1e-15);
        }

        #[test]
        fn relu_cos_agrees(z in 0.0f64..60.0, c in -PI..PI) {
            prop_assert!((relu_cos_integral(z, c) - relu_cos_closed(z, c)).abs() < 1e-10);
        }
    }
}
