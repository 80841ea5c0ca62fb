//! ‖x‖ = c_d E_a[(⟨a, x⟩)₊] over uniform directions, and the resulting
//! bound on |E‖W_n‖ − E‖Z′‖| with Z′ ~ N(0, Σ).

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dist_zoo::MultivariateModel;
use crate::edgeworth::{char_decay_term, charfn_sup_default, BoundConstants, BoundReport};
use crate::error::{domain, CoreError, Result};
use crate::mc_oracle::{run_chunked, CoMoments, DeltaEstimate};
use crate::numerics::{integrate_1d, integrate_semi_infinite, ln_gamma, sphere_sample, Estimate, QuadratureSpec, RngStream, Welford};
use crate::relu_delta::kappa;

/// c_d = 1/E[(w₁)₊] for w uniform on S^{d−1}. The first coordinate has
/// density ∝ (1 − x²)^{(d−3)/2}; with x = sin θ the integral is smooth.
pub fn c_d(d: usize) -> Result<f64> {
    match d {
        0 => Err(domain("dimension must be at least 1")),
        1 => Ok(2.0),
        _ => {
            let df = d as f64;
            let norm = (ln_gamma(df / 2.0) - ln_gamma((df - 1.0) / 2.0)).exp() / PI.sqrt();
            let spec = QuadratureSpec { abs_tol: 1e-13, rel_tol: 1e-12, ..Default::default() };
            let m = integrate_1d(|t: f64| t.sin() * t.cos().powi(d as i32 - 2), 0.0, PI / 2.0, &spec)?.value;
            Ok(1.0 / (norm * m))
        }
    }
}

/// Monte Carlo E[(w₁)₊] on S^{d−1}.
pub fn positive_part_mean_mc(d: usize, samples: usize, rng: RngStream) -> Result<Estimate> {
    if samples < 2 {
        return Err(domain("need at least 2 samples"));
    }
    let mut w = Welford::new();
    for a in sphere_sample(d, samples, rng)? {
        w.push(a[0].max(0.0));
    }
    Ok(Estimate::monte_carlo(w.mean, w.std_error()))
}

/// c_d from `positive_part_mean_mc`, with a delta-method standard error.
pub fn c_d_mc(d: usize, samples: usize, rng: RngStream) -> Result<Estimate> {
    let e = positive_part_mean_mc(d, samples, rng)?;
    Ok(Estimate::monte_carlo(1.0 / e.value, e.err / (e.value * e.value)))
}

#[derive(Clone, Copy, Debug)]
pub struct SphereRidgeSpec {
    pub d: usize,
    pub n_directions: usize,
    pub rng: RngStream,
}

/// c_d times the direction average of (⟨a, x⟩)₊.
pub fn norm_via_ridge(x: &[f64], spec: &SphereRidgeSpec) -> Result<Estimate> {
    if x.len() != spec.d {
        return Err(domain("point dimension differs from the spec"));
    }
    if spec.n_directions < 2 {
        return Err(domain("need at least 2 directions"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(domain("point must be finite"));
    }
    let c = c_d(spec.d)?;
    let mut w = Welford::new();
    for a in sphere_sample(spec.d, spec.n_directions, spec.rng)? {
        w.push(a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>().max(0.0));
    }
    Ok(Estimate::monte_carlo(c * w.mean, c * w.std_error()))
}

/// E‖Z′‖ for Z′ ~ N(0, Σ) from the eigenvalues λ of Σ:
/// (1/√π) ∫₀^∞ (1 − Π(1 + 2u²λ_j)^{−1/2}) u^{−2} du.
pub fn gaussian_norm_mean(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.is_empty() || eigenvalues.iter().any(|&l| !(l >= 0.0)) {
        return Err(domain("eigenvalues must be nonnegative"));
    }
    let g = |u: f64| {
        if u == 0.0 {
            return eigenvalues.iter().sum::<f64>();
        }
        let s = u * u;
        let log_p: f64 = eigenvalues.iter().map(|l| -0.5 * (2.0 * s * l).ln_1p()).sum();
        -log_p.exp_m1() / s
    };
    let spec = QuadratureSpec { abs_tol: 1e-13, rel_tol: 1e-13, ..Default::default() };
    Ok(integrate_semi_infinite(g, 0.0, &spec)?.value / PI.sqrt())
}

/// E‖W_n‖ − E‖Z′‖ with Z′ = A·Z drawn alongside each W_n.
pub fn expected_norm_gap(model: &MultivariateModel, n: u64, reps: u64, rng: RngStream) -> Result<DeltaEstimate> {
    if n == 0 || reps < 100 {
        return Err(domain("need n ≥ 1 and at least 100 replications"));
    }
    let d = model.dim();
    let k = model.mixing().ncols();
    let acc = run_chunked(reps, rng, || vec![Welford::new()], |acc, r, _| {
        let mut x = vec![0.0; d];
        model.sample_sum_into(n, r, &mut x);
        let wn = norm(&x);
        let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(r)).collect();
        model.apply(&z, &mut x);
        acc[0].push(wn - norm(&x));
        Ok(())
    })?;
    let w = acc[0];
    Ok(delta(w.mean, w.std_error(), w.count))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn delta(value: f64, se: f64, count: u64) -> DeltaEstimate {
    DeltaEstimate { delta: value, abs_delta: value.abs(), se, replications: count }
}

/// E‖W_n‖ − E‖Z′‖ on an ascending n grid from nested sums. The Gaussian side
/// is exact; with `control_variates` the W side is adjusted by ‖W_n‖² (mean
/// tr Σ) and ‖W_n‖⁴ (mean from `norm4_moment`).
pub fn expected_norm_gap_sweep(
    model: &MultivariateModel,
    ns: &[u64],
    reps: u64,
    rng: RngStream,
    control_variates: bool,
) -> Result<Vec<DeltaEstimate>> {
    if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("n grid must be positive and strictly ascending"));
    }
    if reps < 100 {
        return Err(domain("need at least 100 replications"));
    }
    let gauss = gaussian_norm_mean(model.eigenvalues())?;
    let d = model.dim();
    let k = model.mixing().ncols();
    let width = if control_variates { 3 } else { 1 };
    let acc = run_chunked(reps, rng, || vec![CoMoments::new(width); ns.len()], |acc, r, _| {
        let mut y = vec![0.0; k];
        let mut x = vec![0.0; d];
        let mut scaled = vec![0.0; k];
        let mut prev = 0;
        let mut row = [0.0; 3];
        for (cell, &n) in acc.iter_mut().zip(ns) {
            model.component_increment(n - prev, r, &mut y);
            prev = n;
            let s = (n as f64).sqrt();
            for (o, v) in scaled.iter_mut().zip(&y) {
                *o = v / s;
            }
            model.apply(&scaled, &mut x);
            let sq: f64 = x.iter().map(|v| v * v).sum();
            row[0] = sq.sqrt();
            row[1] = sq;
            row[2] = sq * sq;
            cell.push(&row[..width]);
        }
        Ok(())
    })?;
    Ok(ns
        .iter()
        .zip(&acc)
        .map(|(&n, cell)| {
            let means = if control_variates { vec![model.trace_sigma2(), model.norm4_moment(n)] } else { vec![] };
            let (m, se) = cell.control_variate_mean(&means);
            delta(m - gauss, se, cell.count)
        })
        .collect())
}

/// Coordinate axes ± plus `extra` uniform directions.
pub fn probe_directions(d: usize, extra: usize, rng: RngStream) -> Result<Vec<Vec<f64>>> {
    let mut dirs = Vec::with_capacity(2 * d + extra);
    for j in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[j] = s;
            dirs.push(e);
        }
    }
    if extra > 0 {
        dirs.extend(sphere_sample(d, extra, rng)?);
    }
    Ok(dirs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormGapBound {
    pub c_d: f64,
    pub op_norm_sqrt: f64,
    /// max over the probe directions of E⟨a,X⟩⁴/(E⟨a,X⟩²)².
    pub l4_l2: f64,
    /// 2Cκ(0)c_d‖Σ‖^{1/2}·[L/n] and 2Cκ(0)c_d‖Σ‖^{1/2}·n⁶·max_a(sup_a + 1/(2n))ⁿ.
    pub report: BoundReport,
    pub worst_direction: Vec<f64>,
}

/// The characteristic sup per direction uses the cutoff σ_a²/(12β_{3,a})
/// of the projected law; the integral over the sphere is replaced by the
/// worst probed direction.
pub fn norm_gap_bound(
    model: &MultivariateModel,
    n: u64,
    k: BoundConstants,
    directions: &[Vec<f64>],
) -> Result<NormGapBound> {
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    if directions.is_empty() {
        return Err(CoreError::Empty("direction set"));
    }
    let l = model.l4_l2_constant(directions)?;
    let cd = c_d(model.dim())?;
    let op = model.op_norm().sqrt();
    let sups: Vec<Result<(f64, f64, bool)>> = directions
        .par_iter()
        .map(|a| {
            let proj = model.project(a)?;
            let sup = charfn_sup_default(&proj)?;
            Ok(char_decay_term(&sup, n))
        })
        .collect();
    let mut worst = (f64::NEG_INFINITY, 0.0, false, 0usize);
    for (i, s) in sups.into_iter().enumerate() {
        let (value, base, vacuous) = s?;
        if base > worst.1 || i == 0 {
            worst = (value, base, vacuous, i);
        }
    }
    let pre = 2.0 * k.scale * kappa(0.0) * cd * op;
    Ok(NormGapBound {
        c_d: cd,
        op_norm_sqrt: op,
        l4_l2: l,
        report: BoundReport {
            moment_term: pre * l / n as f64,
            char_term: pre * worst.0,
            char_base: worst.1,
            vacuous: worst.2,
        },
        worst_direction: directions[worst.3].clone(),
    })
}
