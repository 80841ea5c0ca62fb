//! Δ_ReLU(t) = E(W_n − t)₊ − E(Z − t)₊: Monte Carlo, the Edgeworth
//! prediction, κ(t), the pointwise and integrated bounds, and the closed-form
//! tail integrals behind them.

use std::f64::consts::PI;

use crate::dist_zoo::{MomentSet, UnivariateModel};
use crate::edgeworth::{char_decay_term, charfn_sup_default, BoundConstants, BoundReport, CharSupEstimate};
use crate::error::{domain, Result};
use crate::mc_oracle::{estimate_delta_grid, Controls, DeltaEstimate};
use crate::numerics::{gauss_pdf, gauss_sf, integrate_semi_infinite, QuadratureSpec, RngStream};

const CF_SWITCH: f64 = 2.5;
const CF_TERMS: usize = 300;

/// E(Z − t)₊ = φ(t) − t(1 − Φ(t)). For large t the difference cancels, so it
/// is evaluated as φ(t)·R·q with Mills ratio R = 1/(t + q) and the continued
/// fraction q = 1/(t + 2/(t + 3/(t + ...))).
pub fn gauss_relu_mean(t: f64) -> f64 {
    if t < CF_SWITCH {
        return gauss_pdf(t) - t * gauss_sf(t);
    }
    let mut q = 0.0;
    for k in (2..=CF_TERMS).rev() {
        q = k as f64 / (t + q);
    }
    q = 1.0 / (t + q);
    gauss_pdf(t) * q / (t + q)
}

/// E(Z − t)₊² = (1 + t²)(1 − Φ(t)) − tφ(t).
fn gauss_relu_second(t: f64) -> f64 {
    (1.0 + t * t) * gauss_sf(t) - t * gauss_pdf(t)
}

pub fn delta_relu_mc(model: &UnivariateModel, n: u64, t: f64, reps: u64, rng: RngStream) -> Result<DeltaEstimate> {
    Ok(delta_relu_sweep(model, &[n], &[t], reps, rng, Controls::None)?[0][0])
}

/// Δ_ReLU on an (n, t) grid from one pool of nested sums. Indexed `[n][t]`.
pub fn delta_relu_sweep(
    model: &UnivariateModel,
    ns: &[u64],
    ts: &[f64],
    reps: u64,
    rng: RngStream,
    controls: Controls,
) -> Result<Vec<Vec<DeltaEstimate>>> {
    if reps < 10_000 {
        return Err(domain("ReLU deltas need at least 10⁴ replications"));
    }
    let fs: Vec<Box<dyn Fn(f64) -> f64 + Sync>> =
        ts.iter().map(|&t| Box::new(move |w: f64| (w - t).max(0.0)) as Box<dyn Fn(f64) -> f64 + Sync>).collect();
    let refs: Vec<&(dyn Fn(f64) -> f64 + Sync)> = fs.iter().map(|f| f.as_ref()).collect();
    let means: Vec<f64> = ts.iter().map(|&t| gauss_relu_mean(t)).collect();
    estimate_delta_grid(model, ns, &refs, &means, controls, reps, rng)
}

/// Predicted Δ_ReLU(t) ≈ tφ(t)μ₃/(6√n σ³), from integrating the CDF
/// correction: ∫_t^∞ (1 − x²)φ(x)dx = −tφ(t) and Δ_ReLU(t) = ∫_t^∞ (Φ − F_n).
pub fn edgeworth_relu_prediction(m: &MomentSet, n: u64, t: f64) -> f64 {
    t * gauss_pdf(t) * m.mu3 / (6.0 * (n as f64).sqrt() * m.sigma2.powf(1.5))
}

/// The same term with the opposite sign, kept for diagnostics.
pub fn edgeworth_relu_prediction_flipped(m: &MomentSet, n: u64, t: f64) -> f64 {
    -edgeworth_relu_prediction(m, n, t)
}

/// κ(t) = ∫₀^∞ (1 + |t + s|)^{-4} ds.
pub fn kappa(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (3.0 * (1.0 + t).powi(3))
    } else {
        2.0 / 3.0 - 1.0 / (3.0 * (1.0 - t).powi(3))
    }
}

fn moment_factor(m: &MomentSet, n: u64) -> Result<f64> {
    Ok(m.kurtosis()? / n as f64)
}

/// C·[β₄/(σ⁴n) + n⁶(sup|v| + 1/(2n))ⁿ]·κ(t).
pub fn relu_pointwise_bound(model: &UnivariateModel, n: u64, t: f64, k: BoundConstants) -> Result<BoundReport> {
    let sup = charfn_sup_default(model)?;
    relu_pointwise_bound_with(model, n, t, k, &sup)
}

pub fn relu_pointwise_bound_with(
    model: &UnivariateModel,
    n: u64,
    t: f64,
    k: BoundConstants,
    sup: &CharSupEstimate,
) -> Result<BoundReport> {
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    let (decay, base, vacuous) = char_decay_term(sup, n);
    let w = k.scale * kappa(t);
    Ok(BoundReport { moment_term: w * moment_factor(model.moments(), n)?, char_term: w * decay, char_base: base, vacuous })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Zeta2Bound {
    /// Predicted ∫₀^∞ Δ_ReLU(t) dt = μ₃/(6√(2πn) σ³).
    pub prediction: f64,
    /// Bound on |∫₀^∞ Δ_ReLU − prediction|: (C/6)[β₄/(σ⁴n) + n⁶(sup + 1/(2n))ⁿ].
    pub bound: BoundReport,
}

pub fn zeta2_prediction(m: &MomentSet, n: u64) -> f64 {
    m.mu3 / (m.sigma2.powf(1.5) * 6.0 * (2.0 * PI * n as f64).sqrt())
}

pub fn zeta2_bound(model: &UnivariateModel, n: u64, k: BoundConstants) -> Result<Zeta2Bound> {
    let sup = charfn_sup_default(model)?;
    // κ(0) = 1/3 and ∫₀^∞ κ(t) dt = 1/6
    let r = relu_pointwise_bound_with(model, n, 0.0, k, &sup)?.scaled(0.5);
    Ok(Zeta2Bound { prediction: zeta2_prediction(model.moments(), n), bound: r })
}

/// t grid [0, t_max] with step h for the integrated ReLU gap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapezoidGrid {
    pub t_max: f64,
    pub step: f64,
}

impl Default for TrapezoidGrid {
    fn default() -> Self {
        Self { t_max: 8.0, step: 0.05 }
    }
}

impl TrapezoidGrid {
    fn intervals(&self) -> usize {
        (self.t_max / self.step).round() as usize
    }

    /// Trapezoid of t ↦ (w − t)₊ over the grid plus the exact tail (w − t_max)₊²/2.
    pub fn relu_integral(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let k = self.intervals();
        let h = self.t_max / k as f64;
        let m = ((w / h).ceil() as usize).min(k + 1) as f64;
        let sum = m * w - h * m * (m - 1.0) / 2.0;
        let over = (w - self.t_max).max(0.0);
        h * (sum - 0.5 * (w + over)) + 0.5 * over * over
    }

    /// Same rule applied to t ↦ E(Z − t)₊ with the exact Gaussian tail.
    pub fn gaussian_integral(&self) -> f64 {
        let k = self.intervals();
        let h = self.t_max / k as f64;
        let inner: f64 = (1..k).map(|i| gauss_relu_mean(i as f64 * h)).sum();
        h * (inner + 0.5 * (gauss_relu_mean(0.0) + gauss_relu_mean(self.t_max))) + 0.5 * gauss_relu_second(self.t_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Zeta2Estimate {
    pub n: u64,
    /// Trapezoid-in-t estimate of ∫₀^∞ Δ_ReLU(t) dt.
    pub mc: DeltaEstimate,
    /// |trapezoid − exact| on the same samples, using ∫₀^∞ (w − t)₊ dt = (w₊)²/2.
    pub disc_err: f64,
}

impl Zeta2Estimate {
    pub fn combined_err(&self) -> f64 {
        self.mc.se + self.disc_err
    }
}

pub fn zeta2_mc(
    model: &UnivariateModel,
    ns: &[u64],
    grid: TrapezoidGrid,
    reps: u64,
    rng: RngStream,
    controls: Controls,
) -> Result<Vec<Zeta2Estimate>> {
    if !(grid.step > 0.0 && grid.t_max > grid.step) {
        return Err(domain("trapezoid grid needs 0 < step < t_max"));
    }
    let trap = move |w: f64| grid.relu_integral(w);
    let exact = |w: f64| 0.5 * w.max(0.0).powi(2);
    let fs: [&(dyn Fn(f64) -> f64 + Sync); 2] = [&trap, &exact];
    // ∫₀^∞ E(Z − t)₊ dt = E(Z₊)²/2 = 1/4
    let means = [grid.gaussian_integral(), 0.25];
    let est = estimate_delta_grid(model, ns, &fs, &means, controls, reps, rng)?;
    Ok(ns
        .iter()
        .zip(est)
        .map(|(&n, row)| Zeta2Estimate { n, mc: row[0], disc_err: (row[0].delta - row[1].delta).abs() })
        .collect())
}

/// |E|W_n| − E|Z|| through |x| = (x)₊ + (−x)₊. Indexed by n.
pub fn abs_moment_gap_mc(
    model: &UnivariateModel,
    ns: &[u64],
    reps: u64,
    rng: RngStream,
    controls: Controls,
) -> Result<Vec<DeltaEstimate>> {
    let f = |w: f64| w.max(0.0) + (-w).max(0.0);
    let est = estimate_delta_grid(model, ns, &[&f], &[2.0 * gauss_relu_mean(0.0)], controls, reps, rng)?;
    Ok(est.into_iter().map(|row| row[0]).collect())
}

/// 2C[β₄/(σ⁴n) + n⁶(sup + 1/(2n))ⁿ]κ(0).
pub fn abs_moment_bound(model: &UnivariateModel, n: u64, k: BoundConstants) -> Result<BoundReport> {
    Ok(relu_pointwise_bound(model, n, 0.0, k)?.scaled(2.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailIntegrals {
    /// ∫₀^∞ (1 − (t+s)²)φ(t+s) ds; closed form −tφ(t).
    pub hermite_tail: f64,
    /// ∫₀^∞ (1 + |t+s|)^{-4} ds; closed form κ(t).
    pub kappa_quadrature: f64,
}

pub fn relu_tail_integrals(t: f64) -> Result<TailIntegrals> {
    if !t.is_finite() {
        return Err(domain("t must be finite"));
    }
    let spec = QuadratureSpec { abs_tol: 1e-13, rel_tol: 1e-13, ..Default::default() };
    let hermite = |s: f64| {
        let x = t + s;
        (1.0 - x * x) * gauss_pdf(x)
    };
    let hermite_tail = integrate_semi_infinite(hermite, 0.0, &spec)?.value;
    let g = |s: f64| (1.0 + (t + s).abs()).powi(-4);
    let kappa_quadrature = if t < 0.0 {
        // split at the kink s = −t
        crate::numerics::integrate_1d(g, 0.0, -t, &spec)?.value + integrate_semi_infinite(g, -t, &spec)?.value
    } else {
        integrate_semi_infinite(g, 0.0, &spec)?.value
    };
    Ok(TailIntegrals { hermite_tail, kappa_quadrature })
}

/// E(Z − t)₊ by quadrature of the Gaussian survival function.
pub fn gauss_relu_mean_quadrature(t: f64) -> Result<f64> {
    let spec = QuadratureSpec { abs_tol: 1e-14, rel_tol: 1e-13, ..Default::default() };
    Ok(integrate_semi_infinite(|s| gauss_sf(s + t), 0.0, &spec)?.value)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReluDeltaReport {
    pub t: f64,
    pub mc: DeltaEstimate,
    pub prediction: f64,
    pub bound: BoundReport,
    pub kappa_t: f64,
}

impl ReluDeltaReport {
    /// |mc − prediction|.
    pub fn residual(&self) -> f64 {
        (self.mc.delta - self.prediction).abs()
    }
}

pub fn relu_delta_report(
    model: &UnivariateModel,
    n: u64,
    ts: &[f64],
    reps: u64,
    rng: RngStream,
    k: BoundConstants,
) -> Result<Vec<ReluDeltaReport>> {
    let sup = charfn_sup_default(model)?;
    let mc = delta_relu_sweep(model, &[n], ts, reps, rng, Controls::None)?;
    ts.iter()
        .zip(&mc[0])
        .map(|(&t, &mc)| {
            Ok(ReluDeltaReport {
                t,
                mc,
                prediction: edgeworth_relu_prediction(model.moments(), n, t),
                bound: relu_pointwise_bound_with(model, n, t, k, &sup)?,
                kappa_t: kappa(t),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::function::gamma::gamma_ur;

    /// Exact E(W_n − t)₊ for centered Exp(1): √n·W_n + n ~ Gamma(n, 1).
    fn exp_relu_exact(n: u64, t: f64) -> f64 {
        let nf = n as f64;
        let c = nf + t * nf.sqrt();
        (nf * gamma_ur(nf + 1.0, c) - c * gamma_ur(nf, c)) / nf.sqrt()
    }

    #[test]
    fn relu_mean_examples() {
        assert_relative_eq!(gauss_relu_mean(0.0), 1.0 / (2.0 * PI).sqrt(), max_relative = 1e-15);
        assert!(gauss_relu_mean(10.0) < 1e-20 && gauss_relu_mean(10.0) > 0.0);
        assert_relative_eq!(gauss_relu_mean(-1.0), 1.0 + gauss_relu_mean(1.0), epsilon = 1e-15);
        assert_relative_eq!(gauss_relu_mean(1.0), 0.0833155, epsilon = 5e-8);
    }

    #[test]
    fn relu_mean_matches_quadrature() {
        for &t in &[-4.0, -1.0, 0.0, 0.7, 2.4, 2.6, 4.0, 7.5] {
            let q = gauss_relu_mean_quadrature(t).unwrap();
            assert_relative_eq!(gauss_relu_mean(t), q, max_relative = 1e-9, epsilon = 1e-15);
        }
    }

    #[test]
    fn continued_fraction_is_continuous_at_switch() {
        let lo = gauss_pdf(CF_SWITCH) - CF_SWITCH * gauss_sf(CF_SWITCH);
        assert_relative_eq!(gauss_relu_mean(CF_SWITCH), lo, max_relative = 1e-12);
    }

    #[test]
    fn prediction_examples() {
        let exp = UnivariateModel::centered_exp();
        assert_eq!(edgeworth_relu_prediction(exp.moments(), 100, 0.0), 0.0);
        assert_eq!(edgeworth_relu_prediction(UnivariateModel::sym_uniform().moments(), 100, 1.3), 0.0);
        let want = (-0.5f64).exp() * 2.0 / (6.0 * (200.0 * PI).sqrt());
        assert_relative_eq!(edgeworth_relu_prediction(exp.moments(), 100, 1.0), want, max_relative = 1e-14);
        assert_relative_eq!(want, 0.0080657, epsilon = 5e-8);
        assert_eq!(edgeworth_relu_prediction_flipped(exp.moments(), 100, 1.0), -want);
    }

    #[test]
    fn prediction_sign_matches_exact_gamma_gap() {
        // the exact gap for Exp(1)−1 at t=1 is positive and close to the prediction
        for &n in &[100u64, 400, 1600] {
            let exact = exp_relu_exact(n, 1.0) - gauss_relu_mean(1.0);
            let pred = edgeworth_relu_prediction(UnivariateModel::centered_exp().moments(), n, 1.0);
            assert!(exact > 0.0);
            assert!((exact - pred).abs() < 0.2 / n as f64, "n={n}: {exact} vs {pred}");
        }
    }

    #[test]
    fn exact_gap_at_zero() {
        // E(W_n)₊ = nⁿ⁺¹e⁻ⁿ/(n!√n); gap ≈ −1/(12n√(2π))
        let n = 400u64;
        let exact = exp_relu_exact(n, 0.0) - gauss_relu_mean(0.0);
        let ln = (n as f64 + 1.0) * (n as f64).ln() - n as f64 - crate::numerics::ln_gamma(n as f64 + 1.0);
        assert_relative_eq!(exp_relu_exact(n, 0.0), ln.exp() / (n as f64).sqrt(), max_relative = 1e-10);
        assert_relative_eq!(exact, -1.0 / (12.0 * n as f64 * (2.0 * PI).sqrt()), max_relative = 0.01);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(0.0), 1.0 / 3.0);
        assert_relative_eq!(kappa(1.0), 1.0 / 24.0, max_relative = 1e-15);
        assert_relative_eq!(kappa(-1.0), 0.625, max_relative = 1e-15);
        assert_relative_eq!(kappa(-2.0), 2.0 / 3.0 - 1.0 / 81.0, max_relative = 1e-15);
        assert!(kappa(1e6) < 1e-17);
        assert_relative_eq!(kappa(-1e6), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn tail_integrals_match_closed_forms() {
        let at0 = relu_tail_integrals(0.0).unwrap();
        assert!(at0.hermite_tail.abs() < 1e-12);
        assert_relative_eq!(relu_tail_integrals(1.0).unwrap().hermite_tail, -0.2419707, epsilon = 5e-8);
        assert_relative_eq!(relu_tail_integrals(-2.0).unwrap().kappa_quadrature, 0.6543210, epsilon = 5e-8);
        for i in 0..=40 {
            let t = -5.0 + 0.25 * i as f64;
            let r = relu_tail_integrals(t).unwrap();
            assert!((r.hermite_tail + t * gauss_pdf(t)).abs() < 1e-9, "t={t}");
            assert!((r.kappa_quadrature - kappa(t)).abs() < 1e-9, "t={t}");
        }
        assert!(relu_tail_integrals(f64::NAN).is_err());
    }

    #[test]
    fn pointwise_bound_example_and_limits() {
        let exp = UnivariateModel::centered_exp();
        let k = BoundConstants::default();
        let b = relu_pointwise_bound(&exp, 100, 0.0, k).unwrap();
        assert_relative_eq!(b.moment_term, 0.03, max_relative = 1e-12);
        // exp's characteristic function sup is ≈ 0.9994, so n=100 leaves the char term vacuous
        assert!(b.vacuous);
        let far = relu_pointwise_bound(&exp, 100, 1e5, k).unwrap();
        assert!(far.moment_term < 1e-15);
        let neg = relu_pointwise_bound(&exp, 100, -1e5, k).unwrap();
        assert_relative_eq!(neg.moment_term, 0.09 * 2.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn zeta2_examples() {
        let k = BoundConstants::default();
        let exp = UnivariateModel::centered_exp();
        let z = zeta2_bound(&exp, 100, k).unwrap();
        assert_relative_eq!(z.prediction, 2.0 / (6.0 * (200.0 * PI).sqrt()), max_relative = 1e-14);
        assert_relative_eq!(z.prediction, 0.0132981, epsilon = 5e-8);
        assert_relative_eq!(z.bound.moment_term, 9.0 / 600.0, max_relative = 1e-12);
        let z2 = zeta2_bound(&exp, 200, k).unwrap();
        assert_relative_eq!(z.bound.moment_term, 2.0 * z2.bound.moment_term, max_relative = 1e-14);
        assert_eq!(zeta2_bound(&UnivariateModel::sym_uniform(), 100, k).unwrap().prediction, 0.0);
    }

    #[test]
    fn trapezoid_rule_per_sample() {
        let g = TrapezoidGrid::default();
        assert_eq!(g.relu_integral(-0.3), 0.0);
        // exact on grid nodes; small error between nodes
        for &w in &[0.05, 1.0, 2.5, 9.0] {
            assert_relative_eq!(g.relu_integral(w), 0.5 * w * w, max_relative = 1e-12);
        }
        let w = 1.025;
        assert!((g.relu_integral(w) - 0.5 * w * w).abs() < g.step * g.step);
        // Gaussian side: ∫₀^∞ E(Z − t)₊ dt = 1/4 up to O(h²)
        assert!((g.gaussian_integral() - 0.25).abs() < g.step * g.step / 12.0);
    }

    #[test]
    fn zeta2_mc_tracks_exact_integral() {
        let exp = UnivariateModel::centered_exp();
        let r = zeta2_mc(&exp, &[100], TrapezoidGrid::default(), 200_000, RngStream::new(5, 0), Controls::Powers(4))
            .unwrap();
        let z = zeta2_prediction(exp.moments(), 100);
        assert!(r[0].disc_err < 1e-5, "disc {}", r[0].disc_err);
        assert!((r[0].mc.delta - z).abs() < 4.0 * r[0].combined_err() + 0.1 / 100.0, "{:?} vs {z}", r[0]);
    }

    #[test]
    fn relu_mc_normal_is_null() {
        let r = delta_relu_sweep(
            &UnivariateModel::normal(),
            &[10],
            &[-1.0, 0.0, 1.0],
            50_000,
            RngStream::new(1, 0),
            Controls::None,
        )
        .unwrap();
        for d in &r[0] {
            assert!(d.delta.abs() <= 4.0 * d.se, "{d:?}");
        }
        assert!(delta_relu_mc(&UnivariateModel::normal(), 10, 0.0, 100, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn relu_mc_matches_gamma_oracle() {
        let exp = UnivariateModel::centered_exp();
        let d = delta_relu_mc(&exp, 100, 1.0, 200_000, RngStream::new(2, 0)).unwrap();
        let exact = exp_relu_exact(100, 1.0) - gauss_relu_mean(1.0);
        assert!((d.delta - exact).abs() < 4.0 * d.se, "{d:?} vs {exact}");
    }

    #[test]
    fn abs_moment_gap_symmetric() {
        let u = UnivariateModel::sym_uniform();
        let g = abs_moment_gap_mc(&u, &[20], 100_000, RngStream::new(3, 0), Controls::Powers(4)).unwrap();
        // uniform: E|W_n| − E|Z| ≈ −(kurt−3)/(8n)·2φ(0)... within a loose envelope
        assert!(g[0].delta.abs() < 4.0 * g[0].se + 0.05 / 20.0, "{:?}", g[0]);
        let b = abs_moment_bound(&u, 20, BoundConstants::default()).unwrap();
        assert_relative_eq!(b.moment_term, 2.0 * 1.8 / 20.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn report_fields() {
        let r = relu_delta_report(
            &UnivariateModel::centered_exp(),
            100,
            &[0.0, 1.0],
            20_000,
            RngStream::new(4, 0),
            BoundConstants::default(),
        )
        .unwrap();
        for x in &r {
            assert!(x.kappa_t > 0.0 && x.kappa_t < 2.0 / 3.0);
            assert!(x.bound.total() >= 0.0);
            assert!(x.residual() >= 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn relu_mean_reflection(t in -8.0f64..8.0) {
            prop_assert!((gauss_relu_mean(t) - gauss_relu_mean(-t) + t).abs() < 1e-12);
        }

        #[test]
        fn relu_mean_convex_nonincreasing(t in -6.0f64..6.0, h in 1e-3f64..0.5) {
            let (a, b, c) = (gauss_relu_mean(t - h), gauss_relu_mean(t), gauss_relu_mean(t + h));
            prop_assert!(a >= b && b >= c);
            prop_assert!(a + c - 2.0 * b >= -1e-14);
        }

        #[test]
        fn kappa_decreasing_in_range(t in -50.0f64..50.0, h in 1e-6f64..1.0) {
            let k = kappa(t);
            prop_assert!(k > 0.0 && k < 2.0 / 3.0);
            prop_assert!(kappa(t + h) < k);
        }
    }

    #[test]
    fn kappa_continuous_at_zero() {
        assert_relative_eq!(kappa(-1e-12), kappa(0.0), epsilon = 1e-11);
    }
}
