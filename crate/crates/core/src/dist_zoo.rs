//! Catalog of mean-zero laws: moments, characteristic functions, samplers
//! and directional projections.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{domain, CoreError, Result};
use crate::numerics::{gamma, gauss_pdf, integrate_1d, integrate_semi_infinite, QuadratureSpec, RngStream, StreamRng};

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const PROJECTION_DRAWS: usize = 200_000;
const TAIL_DRAWS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentSet {
    pub sigma2: f64,
    pub mu3: f64,
    pub beta3: f64,
    beta4: Option<f64>,
}

impl MomentSet {
    pub fn new(sigma2: f64, mu3: f64, beta3: f64, beta4: Option<f64>) -> Result<Self> {
        let slack = 1e-9;
        let ok = sigma2 > 0.0
            && beta3 >= sigma2.powf(1.5) * (1.0 - slack)
            && mu3.abs() <= beta3 * (1.0 + slack)
            && beta4.is_none_or(|b4| b4 >= sigma2 * sigma2 * (1.0 - slack));
        if !ok {
            return Err(domain(format!("inconsistent moments σ²={sigma2}, μ₃={mu3}, β₃={beta3}, β₄={beta4:?}")));
        }
        Ok(Self { sigma2, mu3, beta3, beta4 })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// β₄, or `MomentAbsent` for laws without a finite fourth moment.
    pub fn beta4(&self) -> Result<f64> {
        self.beta4.ok_or(CoreError::MomentAbsent("beta4"))
    }

    /// β₄/σ⁴.
    pub fn kurtosis(&self) -> Result<f64> {
        Ok(self.beta4()? / (self.sigma2 * self.sigma2))
    }

    /// Lower cutoff σ²/(12β₃) of the characteristic-function sup.
    pub fn char_cutoff(&self) -> f64 {
        self.sigma2 / (12.0 * self.beta3)
    }
}

/// Building blocks. Every variant has mean zero; the base laws have unit
/// variance except the Bernoulli.
#[derive(Clone, Debug, PartialEq)]
pub enum Law {
    Normal,
    /// Exp(1) − 1.
    CenteredExp,
    /// Uniform on [−√3, √3].
    SymUniform,
    /// Bernoulli(p) − p.
    CenteredBernoulli { p: f64 },
    /// ±1 with equal probability: 2·(Bernoulli(1/2) − 1/2), a unit-variance lattice law.
    Rademacher,
    /// Σ c_j Y_j with independent Y_j.
    Combination { coeffs: Vec<f64>, parts: Vec<Law> },
}

impl Law {
    fn base_moments(&self) -> (f64, f64, f64, f64) {
        match self {
            Law::Normal => (1.0, 0.0, 2.0 * (2.0 / PI).sqrt(), 3.0),
            Law::CenteredExp => (1.0, 2.0, 12.0 / std::f64::consts::E - 2.0, 9.0),
            Law::SymUniform => (1.0, 0.0, 3.0 * SQRT_3 / 4.0, 9.0 / 5.0),
            Law::CenteredBernoulli { p } => {
                let q = 1.0 - p;
                (p * q, p * q * (q - p), p * q * (q * q + p * p), p * q * (q.powi(3) + p.powi(3)))
            }
            Law::Rademacher => (1.0, 0.0, 1.0, 1.0),
            Law::Combination { .. } => unreachable!("combinations have no closed-form β₃"),
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            Law::Normal => StandardNormal.sample(rng),
            Law::CenteredExp => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            Law::SymUniform => SQRT_3 * (2.0 * rng.random::<f64>() - 1.0),
            Law::CenteredBernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0 - p
                } else {
                    -p
                }
            }
            Law::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Law::Combination { coeffs, parts } => coeffs.iter().zip(parts).map(|(c, l)| c * l.sample(rng)).sum(),
        }
    }

    /// Unstandardized sum of `k` independent draws, from the exact law of the
    /// sum where one is available.
    pub fn sum_of(&self, k: u64, rng: &mut StreamRng) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let kf = k as f64;
        match self {
            Law::Normal => {
                let z: f64 = StandardNormal.sample(rng);
                kf.sqrt() * z
            }
            Law::CenteredExp => {
                if k == 1 {
                    self.sample(rng)
                } else {
                    Gamma::new(kf, 1.0).expect("valid shape").sample(rng) - kf
                }
            }
            Law::CenteredBernoulli { p } => Binomial::new(k, *p).expect("valid p").sample(rng) as f64 - kf * p,
            Law::Rademacher => 2.0 * Binomial::new(k, 0.5).expect("valid p").sample(rng) as f64 - kf,
            Law::SymUniform => (0..k).map(|_| self.sample(rng)).sum(),
            Law::Combination { coeffs, parts } => coeffs.iter().zip(parts).map(|(c, l)| c * l.sum_of(k, rng)).sum(),
        }
    }

    pub fn char_fn(&self, b: f64) -> Complex64 {
        match self {
            Law::Normal => Complex64::new((-0.5 * b * b).exp(), 0.0),
            Law::CenteredExp => Complex64::from_polar(1.0, -b) / Complex64::new(1.0, -b),
            Law::SymUniform => {
                let z = SQRT_3 * b;
                Complex64::new(if z == 0.0 { 1.0 } else { z.sin() / z }, 0.0)
            }
            Law::CenteredBernoulli { p } => {
                Complex64::from_polar(1.0 - p, -b * p) + Complex64::from_polar(*p, b * (1.0 - p))
            }
            Law::Rademacher => Complex64::new(b.cos(), 0.0),
            Law::Combination { coeffs, parts } => {
                coeffs.iter().zip(parts).map(|(c, l)| l.char_fn(c * b)).product()
            }
        }
    }

    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            Law::Normal => Some(gauss_pdf(x)),
            Law::CenteredExp => Some(if x > -1.0 { (-(x + 1.0)).exp() } else { 0.0 }),
            Law::SymUniform => Some(if x.abs() <= SQRT_3 { 0.5 / SQRT_3 } else { 0.0 }),
            _ => None,
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            Law::Normal => (f64::NEG_INFINITY, f64::INFINITY),
            Law::CenteredExp => (-1.0, f64::INFINITY),
            Law::SymUniform => (-SQRT_3, SQRT_3),
            Law::CenteredBernoulli { p } => (-p, 1.0 - p),
            Law::Rademacher => (-1.0, 1.0),
            Law::Combination { coeffs, parts } => coeffs.iter().zip(parts).fold((0.0, 0.0), |(lo, hi), (c, l)| {
                let (a, b) = l.support();
                let (a, b) = if *c >= 0.0 { (c * a, c * b) } else { (c * b, c * a) };
                (lo + a, hi + b)
            }),
        }
    }
}

fn fingerprint(xs: &[f64]) -> u64 {
    xs.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, x| (h ^ x.to_bits()).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnivariateModel {
    name: String,
    law: Law,
    moments: MomentSet,
}

impl UnivariateModel {
    pub fn normal() -> Self {
        Self::base("normal", Law::Normal)
    }

    pub fn centered_exp() -> Self {
        Self::base("exp_centered", Law::CenteredExp)
    }

    pub fn sym_uniform() -> Self {
        Self::base("uniform_sym", Law::SymUniform)
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(domain(format!("Bernoulli parameter must lie in (0, 1), got {p}")));
        }
        Ok(Self::base(&format!("bernoulli:p={p}"), Law::CenteredBernoulli { p }))
    }

    fn base(name: &str, law: Law) -> Self {
        let (s2, m3, b3, b4) = law.base_moments();
        let moments = MomentSet::new(s2, m3, b3, Some(b4)).expect("catalog moments are consistent");
        Self { name: name.to_string(), law, moments }
    }

    /// Law of Σ c_j Y_j for independent unit-variance `parts`. Variance, μ₃
    /// and β₄ are exact (cumulants add); β₃ is exact for a single term and
    /// Monte Carlo otherwise.
    pub fn combination(name: &str, coeffs: Vec<f64>, parts: Vec<Law>) -> Result<Self> {
        let terms: Vec<(f64, Law)> = coeffs.into_iter().zip(parts).filter(|(c, _)| *c != 0.0).collect();
        if terms.is_empty() {
            return Err(CoreError::DegenerateDirection);
        }
        if terms.len() == 1 && terms[0].0 == 1.0 {
            return Ok(Self { name: name.to_string(), ..Self::base(name, terms[0].1.clone()) });
        }
        let mut s2 = 0.0;
        let mut m3 = 0.0;
        let mut k4 = 0.0;
        for (c, l) in &terms {
            let (ls2, lm3, _, lb4) = l.base_moments();
            s2 += c * c * ls2;
            m3 += c.powi(3) * lm3;
            k4 += c.powi(4) * (lb4 - 3.0 * ls2 * ls2);
        }
        let b4 = 3.0 * s2 * s2 + k4;
        let (coeffs, parts): (Vec<f64>, Vec<Law>) = terms.into_iter().unzip();
        let law = Law::Combination { coeffs: coeffs.clone(), parts: parts.clone() };
        let b3 = if coeffs.len() == 1 {
            coeffs[0].abs().powi(3) * parts[0].base_moments().2
        } else {
            let mut rng = RngStream::new(0x0062_6574_6133, fingerprint(&coeffs)).rng();
            (0..PROJECTION_DRAWS).map(|_| law.sample(&mut rng).abs().powi(3)).sum::<f64>() / PROJECTION_DRAWS as f64
        };
        // MC noise may put β₃ slightly under σ³ for near-Gaussian projections.
        let b3 = b3.max(s2.powf(1.5)).max(m3.abs());
        Ok(Self { name: name.to_string(), law, moments: MomentSet::new(s2, m3, b3, Some(b4))? })
    }

    /// Parses catalog names such as `exp_centered` or `bernoulli:p=0.3`.
    pub fn from_name(name: &str) -> Result<Self> {
        let (head, params) = split_name(name)?;
        match (head, params.as_slice()) {
            ("normal", []) => Ok(Self::normal()),
            ("exp_centered", []) => Ok(Self::centered_exp()),
            ("uniform_sym", []) => Ok(Self::sym_uniform()),
            ("bernoulli", [("p", p)]) => Self::bernoulli(*p),
            _ => Err(CoreError::UnknownModel(name.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    pub fn moments(&self) -> &MomentSet {
        &self.moments
    }

    pub fn char_fn(&self, b: f64) -> Complex64 {
        self.law.char_fn(b)
    }

    pub fn density(&self, x: f64) -> Option<f64> {
        self.law.density(x)
    }

    pub fn has_density(&self) -> bool {
        self.law.density(0.0).is_some()
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.law.sample(rng)
    }

    /// Unstandardized sum of `k` draws.
    pub fn sum_increment(&self, k: u64, rng: &mut StreamRng) -> f64 {
        self.law.sum_of(k, rng)
    }

    /// One realization of (nσ²)^{-1/2} Σ W_i.
    pub fn sample_sum(&self, n: u64, rng: &mut StreamRng) -> Result<f64> {
        if n == 0 {
            return Err(domain("sample_sum needs n ≥ 1"));
        }
        Ok(self.law.sum_of(n, rng) / (n as f64 * self.moments.sigma2).sqrt())
    }

    /// First draw of `sample_sum` on a fresh stream.
    pub fn sample_sum_on(&self, n: u64, stream: RngStream) -> Result<f64> {
        self.sample_sum(n, &mut stream.rng())
    }

    /// Largest |W| on the support, if bounded.
    pub fn support_bound(&self) -> Option<f64> {
        let (lo, hi) = self.law.support();
        let m = lo.abs().max(hi.abs());
        m.is_finite().then_some(m)
    }

    /// E[|W|^p 1{|W| ≥ c}] and E[|W|^p 1{|W| < c}] for p ∈ {3, 4}.
    pub fn split_abs_moment(&self, p: i32, c: f64) -> Result<(f64, f64)> {
        let total = match p {
            3 => self.moments.beta3,
            4 => self.moments.beta4()?,
            _ => return Err(domain("split_abs_moment supports p = 3 or 4")),
        };
        if c <= 0.0 {
            return Ok((total, 0.0));
        }
        if self.support_bound().is_some_and(|m| m < c) {
            return Ok((0.0, total));
        }
        let tail = match &self.law {
            Law::CenteredBernoulli { p: q } => [1.0 - q, -q]
                .iter()
                .zip([*q, 1.0 - q])
                .filter(|(x, _)| x.abs() >= c)
                .map(|(x, w)| w * x.abs().powi(p))
                .sum(),
            Law::Rademacher => f64::from(u8::from(c <= 1.0)),
            Law::Combination { .. } => {
                let mut rng = RngStream::new(0x7461_696c, fingerprint(&[c, p as f64])).rng();
                let s: f64 = (0..TAIL_DRAWS)
                    .map(|_| self.law.sample(&mut rng).abs())
                    .filter(|x| *x >= c)
                    .map(|x| x.powi(p))
                    .sum();
                s / TAIL_DRAWS as f64
            }
            _ => self.density_tail(p, c)?,
        };
        Ok((tail, (total - tail).max(0.0)))
    }

    fn density_tail(&self, p: i32, c: f64) -> Result<f64> {
        let spec = QuadratureSpec { abs_tol: 1e-14, rel_tol: 1e-11, ..Default::default() };
        let dens = |x: f64| x.abs().powi(p) * self.law.density(x).unwrap_or(0.0);
        let (lo, hi) = self.law.support();
        let mut tail = 0.0;
        if hi > c {
            tail += if hi.is_finite() { integrate_1d(dens, c, hi, &spec)?.value } else { integrate_semi_infinite(dens, c, &spec)?.value };
        }
        if lo < -c {
            let refl = |x: f64| dens(-x);
            tail += if lo.is_finite() { integrate_1d(refl, c, -lo, &spec)?.value } else { integrate_semi_infinite(refl, c, &spec)?.value };
        }
        Ok(tail)
    }
}

fn split_name(name: &str) -> Result<(&str, Vec<(&str, f64)>)> {
    let mut it = name.split(':');
    let head = it.next().unwrap_or("");
    let mut params = Vec::new();
    for part in it.flat_map(|s| s.split(',')) {
        let (k, v) = part.split_once('=').ok_or_else(|| CoreError::UnknownModel(name.to_string()))?;
        let v: f64 = v.trim().parse().map_err(|_| CoreError::UnknownModel(name.to_string()))?;
        params.push((k.trim(), v));
    }
    Ok((head, params))
}

/// X = A·Y with independent standardized components Y_j.
#[derive(Clone, Debug)]
pub struct MultivariateModel {
    name: String,
    mixing: DMatrix<f64>,
    parts: Vec<Law>,
    covariance: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    beta3_norm: f64,
}

impl MultivariateModel {
    pub fn gauss_iso(d: usize) -> Result<Self> {
        check_dim(d)?;
        let mut m = Self::linear(&format!("gauss_iso:d={d}"), DMatrix::identity(d, d), vec![Law::Normal; d])?;
        // E‖Z‖³ = 2^{3/2} Γ((d+3)/2)/Γ(d/2)
        m.beta3_norm = 2f64.powf(1.5) * gamma((d as f64 + 3.0) / 2.0) / gamma(d as f64 / 2.0);
        Ok(m)
    }

    pub fn exp_product(d: usize) -> Result<Self> {
        check_dim(d)?;
        Self::linear(&format!("exp_product:d={d}"), DMatrix::identity(d, d), vec![Law::CenteredExp; d])
    }

    /// Independent ±1 coordinates, a lattice law in every axis direction.
    pub fn rademacher_product(d: usize) -> Result<Self> {
        check_dim(d)?;
        Self::linear(&format!("rademacher_product:d={d}"), DMatrix::identity(d, d), vec![Law::Rademacher; d])
    }

    /// Uniform box mapped by a fixed lower-bidiagonal matrix: diagonal
    /// 1.5 − j/d, subdiagonal 0.3.
    pub fn box_aniso(d: usize) -> Result<Self> {
        check_dim(d)?;
        let mut a = DMatrix::zeros(d, d);
        for j in 0..d {
            a[(j, j)] = 1.5 - j as f64 / d as f64;
            if j > 0 {
                a[(j, j - 1)] = 0.3;
            }
        }
        Self::linear(&format!("box_aniso:d={d}"), a, vec![Law::SymUniform; d])
    }

    /// General linear model. `parts` must be unit-variance base laws.
    pub fn linear(name: &str, mixing: DMatrix<f64>, parts: Vec<Law>) -> Result<Self> {
        if mixing.ncols() != parts.len() || mixing.nrows() == 0 {
            return Err(domain("mixing matrix shape does not match the component list"));
        }
        if parts.iter().any(|l| !matches!(l, Law::Normal | Law::CenteredExp | Law::SymUniform | Law::Rademacher)) {
            return Err(domain("multivariate components must be unit-variance base laws"));
        }
        let covariance = &mixing * mixing.transpose();
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(covariance.clone()).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let mut m = Self { name: name.to_string(), mixing, parts, covariance, eigenvalues, beta3_norm: 0.0 };
        let mut rng = RngStream::new(0x006e_6f72_6d33, fingerprint(m.mixing.as_slice())).rng();
        let mut x = vec![0.0; m.dim()];
        let mut acc = 0.0;
        for _ in 0..PROJECTION_DRAWS {
            m.sample_into(&mut rng, &mut x);
            acc += x.iter().map(|v| v * v).sum::<f64>().powf(1.5);
        }
        m.beta3_norm = acc / PROJECTION_DRAWS as f64;
        Ok(m)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let (head, params) = split_name(name)?;
        let d = match params.as_slice() {
            [("d", d)] if *d >= 1.0 && d.fract() == 0.0 => *d as usize,
            _ => return Err(CoreError::UnknownModel(name.to_string())),
        };
        match head {
            "gauss_iso" => Self::gauss_iso(d),
            "exp_product" => Self::exp_product(d),
            "box_aniso" => Self::box_aniso(d),
            "rademacher_product" => Self::rademacher_product(d),
            _ => Err(CoreError::UnknownModel(name.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.mixing.nrows()
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Eigenvalues of Σ, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace_sigma2(&self) -> f64 {
        self.covariance.trace()
    }

    pub fn op_norm(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// E‖X‖³.
    pub fn beta3_norm(&self) -> f64 {
        self.beta3_norm
    }

    pub fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let y: Vec<f64> = self.parts.iter().map(|l| l.sample(rng)).collect();
        self.apply(&y, out);
    }

    /// n^{-1/2} Σ X_i into `out`.
    pub fn sample_sum_into(&self, n: u64, rng: &mut StreamRng, out: &mut [f64]) {
        let scale = (n as f64).sqrt();
        let y: Vec<f64> = self.parts.iter().map(|l| l.sum_of(n, rng) / scale).collect();
        self.apply(&y, out);
    }

    /// Standardized component sums Y-side, advanced by `k` further summands.
    /// Used for nested sums across a grid of n.
    pub fn component_increment(&self, k: u64, rng: &mut StreamRng, acc: &mut [f64]) {
        for (a, l) in acc.iter_mut().zip(&self.parts) {
            *a += l.sum_of(k, rng);
        }
    }

    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o = (0..y.len()).map(|j| self.mixing[(i, j)] * y[j]).sum();
        }
    }

    fn coefficients(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.dim() {
            return Err(domain(format!("direction has length {}, model dimension is {}", a.len(), self.dim())));
        }
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(domain(format!("direction must be a unit vector, ‖a‖ = {norm}")));
        }
        Ok((self.mixing.transpose() * DVector::from_column_slice(a)).iter().copied().collect())
    }

    /// Law of ⟨a, X⟩.
    pub fn project(&self, a: &[f64]) -> Result<UnivariateModel> {
        let c = self.coefficients(a)?;
        UnivariateModel::combination(&format!("{}·a", self.name), c, self.parts.clone())
    }

    /// max over directions of E⟨a,X⟩⁴ / (E⟨a,X⟩²)², exact through cumulants.
    pub fn l4_l2_constant(&self, directions: &[Vec<f64>]) -> Result<f64> {
        if directions.is_empty() {
            return Err(CoreError::Empty("direction set"));
        }
        let mut best: f64 = 1.0;
        for a in directions {
            let c = self.coefficients(a)?;
            let s2: f64 = c.iter().map(|x| x * x).sum();
            if s2 <= 1e-300 {
                return Err(CoreError::DegenerateDirection);
            }
            let k4: f64 = c.iter().zip(&self.parts).map(|(x, l)| x.powi(4) * (l.base_moments().3 - 3.0)).sum();
            best = best.max((3.0 * s2 * s2 + k4) / (s2 * s2));
        }
        Ok(best)
    }

    /// E‖W_n‖⁴ for the standardized sum of n copies.
    pub fn norm4_moment(&self, n: u64) -> f64 {
        let m = self.mixing.transpose() * &self.mixing;
        let tr = m.trace();
        let tr2 = (&m * &m).trace();
        let excess: f64 = self.parts.iter().enumerate().map(|(j, l)| m[(j, j)].powi(2) * (l.base_moments().3 - 3.0)).sum();
        tr * tr + 2.0 * tr2 + excess / n as f64
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    Ok(())
}

/// Catalog names with a short description.
pub fn catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("normal", "standard normal"),
        ("exp_centered", "Exp(1) − 1"),
        ("uniform_sym", "uniform on [−√3, √3]"),
        ("bernoulli:p=<p>", "Bernoulli(p) − p, lattice law"),
        ("gauss_iso:d=<d>", "standard Gaussian in d dimensions"),
        ("exp_product:d=<d>", "independent Exp(1) − 1 coordinates"),
        ("box_aniso:d=<d>", "uniform box under a fixed bidiagonal map"),
        ("rademacher_product:d=<d>", "independent ±1 coordinates, lattice law"),
    ]
}
