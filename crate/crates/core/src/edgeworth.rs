//! One-term Edgeworth CDF, the non-uniform error bound with its
//! fourth-moment form, and the characteristic-function sup.

use std::f64::consts::PI;

use crate::dist_zoo::{MomentSet, UnivariateModel};
use crate::error::{domain, CoreError, Result};
use crate::numerics::gauss_cdf;

/// Unknown absolute constants. `scale` is the C multiplying every bound,
/// `decay` the c in exponential terms exp(−c r²/σ²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundConstants {
    pub scale: f64,
    pub decay: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self { scale: 1.0, decay: 0.5 }
    }
}

impl BoundConstants {
    pub fn new(scale: f64, decay: f64) -> Result<Self> {
        if !(scale > 0.0 && decay > 0.0) {
            return Err(domain(format!("bound constants must be positive, got C={scale}, c={decay}")));
        }
        Ok(Self { scale, decay })
    }
}

/// (1 − x²)e^{−x²/2} μ₃ / (6√(2πn) σ³).
pub fn edgeworth_correction(m: &MomentSet, n: u64, x: f64) -> f64 {
    (1.0 - x * x) * (-0.5 * x * x).exp() * m.mu3 / (6.0 * (2.0 * PI * n as f64).sqrt() * m.sigma2.powf(1.5))
}

pub fn edgeworth_cdf(m: &MomentSet, n: u64, x: f64) -> f64 {
    gauss_cdf(x) + edgeworth_correction(m, n, x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharSupEstimate {
    pub b0: f64,
    pub b_max: f64,
    pub sup_abs_v: f64,
    pub argmax: f64,
    pub vacuous: bool,
}

pub const VACUITY_GAP: f64 = 1e-9;

/// sup of |v(b)| over [b0, b_max] with b0 = σ²/(12β₃): grid scan, then a
/// golden-section refinement around the best grid point.
pub fn charfn_sup(model: &UnivariateModel, grid_step: f64, b_max: f64) -> Result<CharSupEstimate> {
    let b0 = model.moments().char_cutoff();
    if !(grid_step > 0.0) || !(b_max > b0) {
        return Err(domain(format!("charfn_sup needs grid_step > 0 and b_max > b0 = {b0}")));
    }
    let v = |b: f64| model.char_fn(b).norm();
    let steps = ((b_max - b0) / grid_step).ceil() as usize;
    let (mut argmax, mut best) = (b0, v(b0));
    for i in 1..=steps {
        let b = (b0 + i as f64 * grid_step).min(b_max);
        let y = v(b);
        if y > best {
            best = y;
            argmax = b;
        }
    }
    let (mut lo, mut hi) = ((argmax - grid_step).max(b0), (argmax + grid_step).min(b_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (v(x1), v(x2));
    for _ in 0..120 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = v(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = v(x2);
        }
    }
    for (b, y) in [(x1, f1), (x2, f2)] {
        if y > best {
            best = y;
            argmax = b;
        }
    }
    let sup_abs_v = best.min(1.0);
    Ok(CharSupEstimate { b0, b_max, sup_abs_v, argmax, vacuous: sup_abs_v >= 1.0 - VACUITY_GAP })
}

/// `charfn_sup` with step 0.005 and b_max = b0 + 50/σ.
pub fn charfn_sup_default(model: &UnivariateModel) -> Result<CharSupEstimate> {
    let m = model.moments();
    charfn_sup(model, 5e-3, m.char_cutoff() + 50.0 / m.sigma())
}

/// A bound split into its moment part and its characteristic-function part
/// C·n⁶(sup|v| + 1/(2n))ⁿ·(weight). The report is vacuous when the base
/// sup|v| + 1/(2n) is not below 1 or the sup itself is flagged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    pub moment_term: f64,
    pub char_term: f64,
    pub char_base: f64,
    pub vacuous: bool,
}

impl BoundReport {
    pub fn total(&self) -> f64 {
        self.moment_term + self.char_term
    }

    /// The total, or `VacuousBound` when the characteristic term does not decay.
    pub fn valid(&self) -> Result<f64> {
        if self.vacuous {
            Err(CoreError::VacuousBound { base: self.char_base })
        } else {
            Ok(self.total())
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { moment_term: self.moment_term * factor, char_term: self.char_term * factor, ..*self }
    }
}

/// n⁶(sup + 1/(2n))ⁿ evaluated in log space, with the base and vacuity flag.
pub fn char_decay_term(sup: &CharSupEstimate, n: u64) -> (f64, f64, bool) {
    let nf = n as f64;
    let base = sup.sup_abs_v + 0.5 / nf;
    let value = (6.0 * nf.ln() + nf * base.ln()).exp();
    (value, base, sup.vacuous || base >= 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundVariant {
    K3,
    FourthMoment,
}

/// Non-uniform bound on |F_n(x) − Φ(x) − correction(x)|.
pub fn nonuniform_bound(
    model: &UnivariateModel,
    n: u64,
    x: f64,
    k: BoundConstants,
    variant: BoundVariant,
) -> Result<BoundReport> {
    let sup = charfn_sup_default(model)?;
    nonuniform_bound_with(model, n, x, k, variant, &sup)
}

/// As `nonuniform_bound`, reusing a precomputed characteristic sup.
pub fn nonuniform_bound_with(
    model: &UnivariateModel,
    n: u64,
    x: f64,
    k: BoundConstants,
    variant: BoundVariant,
    sup: &CharSupEstimate,
) -> Result<BoundReport> {
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    let m = model.moments();
    let nf = n as f64;
    let s = m.sigma();
    let w = 1.0 + x.abs();
    let moment_term = match variant {
        BoundVariant::FourthMoment => k.scale * m.beta4()? / (m.sigma2 * m.sigma2 * nf * w.powi(4)),
        BoundVariant::K3 => {
            let c = s * w * nf.sqrt();
            let (tail3, _) = model.split_abs_moment(3, c)?;
            let (_, body4) = model.split_abs_moment(4, c)?;
            k.scale * (tail3 / (s.powi(3) * nf.sqrt() * w.powi(3)) + body4 / (s.powi(4) * nf * w.powi(4)))
        }
    };
    let (decay, base, vacuous) = char_decay_term(sup, n);
    Ok(BoundReport { moment_term, char_term: k.scale * decay / w.powi(4), char_base: base, vacuous })
}
