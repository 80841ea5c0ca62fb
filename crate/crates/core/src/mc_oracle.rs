//! Monte Carlo ground truth for Δ_f, the level-set identity and the
//! signed-measure combinator.
//!
//! Replications are split into fixed-size chunks, chunk k drawing from
//! `rng.child(k)`. Chunk results merge in chunk order, so estimates do not
//! depend on the number of worker threads.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dist_zoo::{MultivariateModel, UnivariateModel};
use crate::error::{domain, CoreError, Result};
use crate::numerics::{gauss_cdf, RngStream, StreamRng, Welford};

pub const CHUNK: u64 = 1 << 15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaEstimate {
    /// Signed E f(W_n) − E f(Z).
    pub delta: f64,
    pub abs_delta: f64,
    pub se: f64,
    pub replications: u64,
}

impl DeltaEstimate {
    fn new(delta: f64, se: f64, replications: u64) -> Self {
        Self { delta, abs_delta: delta.abs(), se, replications }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedAtom {
    pub weight: f64,
    pub bound: f64,
}

pub trait Accumulator: Send + Sized {
    fn merge(&mut self, other: Self);
}

impl Accumulator for Vec<Welford> {
    fn merge(&mut self, other: Self) {
        for (a, b) in self.iter_mut().zip(&other) {
            a.merge(b);
        }
    }
}

/// Runs `visit` once per replication. `visit` receives the chunk generator
/// and the global replication index.
pub fn run_chunked<A, I, V>(reps: u64, rng: RngStream, init: I, visit: V) -> Result<A>
where
    A: Accumulator,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, &mut StreamRng, u64) -> Result<()> + Sync,
{
    let chunks = reps.div_ceil(CHUNK);
    let parts: Vec<Result<A>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut acc = init();
            let mut r = rng.child(k).rng();
            let start = k * CHUNK;
            for i in start..(start + CHUNK).min(reps) {
                visit(&mut acc, &mut r, i)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = init();
    for p in parts {
        total.merge(p?);
    }
    Ok(total)
}

/// Standardized sums at every n in `ns` (ascending) built from nested
/// increments, so all grid points share one sample path.
pub fn nested_sums(model: &UnivariateModel, ns: &[u64], rng: &mut StreamRng, out: &mut [f64]) {
    let s2 = model.moments().sigma2;
    let mut s = 0.0;
    let mut prev = 0;
    for (o, &n) in out.iter_mut().zip(ns) {
        s += model.sum_increment(n - prev, rng);
        prev = n;
        *o = s / (n as f64 * s2).sqrt();
    }
}

fn check_grid(ns: &[u64]) -> Result<()> {
    if ns.is_empty() {
        return Err(CoreError::Empty("n grid"));
    }
    if ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("n grid must be positive and strictly ascending"));
    }
    Ok(())
}

fn finite(y: f64, index: u64, input: f64) -> Result<f64> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(CoreError::NonFiniteSample { index, input })
    }
}

/// E f(W_n) − E f(Z). With `gaussian_mean` the Gaussian side is exact;
/// otherwise each replication pairs W_n with an independent Z.
pub fn estimate_delta_f<F>(
    model: &UnivariateModel,
    f: F,
    n: u64,
    reps: u64,
    rng: RngStream,
    gaussian_mean: Option<f64>,
) -> Result<DeltaEstimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    if reps < 100 {
        return Err(domain("estimate_delta_f needs at least 100 replications"));
    }
    check_grid(&[n])?;
    let acc = run_chunked(reps, rng, || vec![Welford::new()], |acc, r, i| {
        let w = model.sample_sum(n, r)?;
        let mut y = finite(f(w), i, w)?;
        if gaussian_mean.is_none() {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, r);
            y -= finite(f(z), i, z)?;
        }
        acc[0].push(y);
        Ok(())
    })?;
    let w = acc[0];
    Ok(DeltaEstimate::new(w.mean - gaussian_mean.unwrap_or(0.0), w.std_error(), w.count))
}

/// Control variates available for the standardized sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Controls {
    None,
    /// W_n^j for j = 1..=k (k ≤ 4), whose exact means follow from σ², μ₃, β₄.
    Powers(usize),
}

/// Exact E W_n^j for j ≤ 4.
pub fn standardized_power_mean(model: &UnivariateModel, n: u64, j: usize) -> Result<f64> {
    let m = model.moments();
    let nf = n as f64;
    Ok(match j {
        0 => 1.0,
        1 => 0.0,
        2 => 1.0,
        3 => m.mu3 / (m.sigma2.powf(1.5) * nf.sqrt()),
        4 => 3.0 + (m.kurtosis()? - 3.0) / nf,
        _ => return Err(domain("power controls are available up to degree 4")),
    })
}

/// Streaming means and co-moments of a small vector, mergeable.
#[derive(Clone, Debug, PartialEq)]
pub struct CoMoments {
    pub count: u64,
    pub mean: Vec<f64>,
    cm: Vec<f64>,
}

impl CoMoments {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], cm: vec![0.0; dim * dim] }
    }

    pub fn push(&mut self, x: &[f64]) {
        let m = self.mean.len();
        self.count += 1;
        let nf = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for (mu, d) in self.mean.iter_mut().zip(&delta) {
            *mu += d / nf;
        }
        for i in 0..m {
            for j in 0..m {
                self.cm[i * m + j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    fn merge_from(&mut self, other: &CoMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let m = self.mean.len();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for i in 0..m {
            for j in 0..m {
                self.cm[i * m + j] += other.cm[i * m + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (mu, d) in self.mean.iter_mut().zip(&delta) {
            *mu += d * nb / n;
        }
        self.count += other.count;
    }

    fn cov(&self, i: usize, j: usize) -> f64 {
        self.cm[i * self.mean.len() + j] / (self.count as f64 - 1.0)
    }

    /// Mean of coordinate 0 adjusted by the remaining coordinates, whose
    /// exact means are `control_means`. Returns (estimate, standard error).
    pub fn control_variate_mean(&self, control_means: &[f64]) -> (f64, f64) {
        let k = control_means.len();
        let nf = self.count as f64;
        if k == 0 {
            return (self.mean[0], (self.cov(0, 0) / nf).sqrt());
        }
        let sxx = DMatrix::from_fn(k, k, |i, j| self.cov(i + 1, j + 1));
        let sxy = DVector::from_fn(k, |i, _| self.cov(i + 1, 0));
        let beta = sxx.clone().lu().solve(&sxy).unwrap_or_else(|| DVector::zeros(k));
        let shift: f64 = (0..k).map(|i| beta[i] * (self.mean[i + 1] - control_means[i])).sum();
        let resid = (self.cov(0, 0) - sxy.dot(&beta)).max(0.0) * (nf - 1.0) / (nf - k as f64 - 1.0);
        (self.mean[0] - shift, (resid / nf).sqrt())
    }
}

impl Accumulator for Vec<CoMoments> {
    fn merge(&mut self, other: Self) {
        for (a, b) in self.iter_mut().zip(&other) {
            a.merge_from(b);
        }
    }
}

/// Δ estimates for every (n, f) pair on one shared sample pool. `gaussian_means`
/// holds the exact E f(Z) for each function. Result is indexed `[n][f]`.
pub fn estimate_delta_grid(
    model: &UnivariateModel,
    ns: &[u64],
    fs: &[&(dyn Fn(f64) -> f64 + Sync)],
    gaussian_means: &[f64],
    controls: Controls,
    reps: u64,
    rng: RngStream,
) -> Result<Vec<Vec<DeltaEstimate>>> {
    check_grid(ns)?;
    if fs.is_empty() || fs.len() != gaussian_means.len() {
        return Err(domain("need one Gaussian mean per test function"));
    }
    if reps < 100 {
        return Err(domain("estimate_delta_grid needs at least 100 replications"));
    }
    let k = match controls {
        Controls::None => 0,
        Controls::Powers(k) if k <= 4 => k,
        Controls::Powers(_) => return Err(domain("power controls are available up to degree 4")),
    };
    let cells = ns.len() * fs.len();
    let acc = run_chunked(reps, rng, || vec![CoMoments::new(1 + k); cells], |acc, r, i| {
        let mut w = vec![0.0; ns.len()];
        nested_sums(model, ns, r, &mut w);
        let mut row = vec![0.0; 1 + k];
        for (a, &wn) in w.iter().enumerate() {
            for j in 1..=k {
                row[j] = wn.powi(j as i32);
            }
            for (b, f) in fs.iter().enumerate() {
                row[0] = finite(f(wn), i, wn)?;
                acc[a * fs.len() + b].push(&row);
            }
        }
        Ok(())
    })?;
    let mut out = Vec::with_capacity(ns.len());
    for (a, &n) in ns.iter().enumerate() {
        let means: Vec<f64> = (1..=k).map(|j| standardized_power_mean(model, n, j)).collect::<Result<_>>()?;
        let row = fs
            .iter()
            .enumerate()
            .map(|(b, _)| {
                let cell = &acc[a * fs.len() + b];
                let (m, se) = cell.control_variate_mean(&means);
                DeltaEstimate::new(m - gaussian_means[b], se, cell.count)
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotone {
    Increasing,
    Decreasing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelSetPoint {
    pub t: f64,
    /// P(W_n ∈ U_t) − P(Z ∈ U_t) with U_t = {g ≥ t}.
    pub diff: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetProfile {
    pub points: Vec<LevelSetPoint>,
    /// Trapezoid sum of `diff` over the grid.
    pub integral: f64,
    pub integral_se: f64,
}

const LEVEL_RANGE: f64 = 60.0;

/// P(g(Z) ≥ t) through the boundary of the half-line {g ≥ t}.
fn gaussian_level_prob<G: Fn(f64) -> f64>(g: &G, shape: Monotone, t: f64) -> f64 {
    let hit = |w: f64| g(w) >= t;
    match shape {
        Monotone::Increasing => {
            if hit(-LEVEL_RANGE) {
                return 1.0;
            }
            if !hit(LEVEL_RANGE) {
                return 0.0;
            }
            let (mut lo, mut hi) = (-LEVEL_RANGE, LEVEL_RANGE);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hit(mid) { hi = mid } else { lo = mid }
            }
            1.0 - gauss_cdf(hi)
        }
        Monotone::Decreasing => {
            if hit(LEVEL_RANGE) {
                return 1.0;
            }
            if !hit(-LEVEL_RANGE) {
                return 0.0;
            }
            let (mut lo, mut hi) = (-LEVEL_RANGE, LEVEL_RANGE);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hit(mid) { lo = mid } else { hi = mid }
            }
            gauss_cdf(lo)
        }
    }
}

#[derive(Clone)]
struct LevelAcc {
    counts: Vec<u64>,
    trap: Welford,
}

impl Accumulator for LevelAcc {
    fn merge(&mut self, other: Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.trap.merge(&other.trap);
    }
}

/// Level-set differences on a sorted t grid for a monotone g. For a
/// multivariate half-space, pass the projected model.
pub fn estimate_delta_levelset<G>(
    model: &UnivariateModel,
    g: G,
    shape: Monotone,
    n: u64,
    t_grid: &[f64],
    reps: u64,
    rng: RngStream,
) -> Result<LevelSetProfile>
where
    G: Fn(f64) -> f64 + Sync,
{
    if t_grid.is_empty() {
        return Err(CoreError::Empty("t grid"));
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("t grid must be strictly ascending"));
    }
    if reps < 100 {
        return Err(domain("estimate_delta_levelset needs at least 100 replications"));
    }
    check_grid(&[n])?;
    let m = t_grid.len();
    let mut weights = vec![0.0; m];
    for k in 0..m.saturating_sub(1) {
        let h = 0.5 * (t_grid[k + 1] - t_grid[k]);
        weights[k] += h;
        weights[k + 1] += h;
    }
    let mut prefix = vec![0.0; m + 1];
    for k in 0..m {
        prefix[k + 1] = prefix[k] + weights[k];
    }
    let acc = run_chunked(
        reps,
        rng,
        || LevelAcc { counts: vec![0; m + 1], trap: Welford::new() },
        |acc, r, i| {
            let w = model.sample_sum(n, r)?;
            let y = finite(g(w), i, w)?;
            // number of grid levels t_k ≤ g(W)
            let c = t_grid.partition_point(|&t| t <= y);
            acc.counts[c] += 1;
            acc.trap.push(prefix[c]);
            Ok(())
        },
    )?;
    let total = reps as f64;
    let mut above = reps;
    let mut points = Vec::with_capacity(m);
    let mut gauss_trap = 0.0;
    for (k, &t) in t_grid.iter().enumerate() {
        above -= acc.counts[k];
        let p = above as f64 / total;
        let q = gaussian_level_prob(&g, shape, t);
        gauss_trap += weights[k] * q;
        points.push(LevelSetPoint { t, diff: p - q, se: (p * (1.0 - p) / total).sqrt() });
    }
    Ok(LevelSetProfile { points, integral: acc.trap.mean - gauss_trap, integral_se: acc.trap.std_error() })
}

/// E f(W_n) − E f(W) for a d-dimensional model, W ~ N(0, Σ). Without a
/// Gaussian mean each replication pairs W_n with W = A·Z.
pub fn estimate_delta_multi<F>(
    model: &MultivariateModel,
    f: F,
    n: u64,
    reps: u64,
    rng: RngStream,
    gaussian_mean: Option<f64>,
) -> Result<DeltaEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if reps < 100 {
        return Err(domain("estimate_delta_multi needs at least 100 replications"));
    }
    check_grid(&[n])?;
    let d = model.dim();
    let acc = run_chunked(reps, rng, || vec![Welford::new()], |acc, r, i| {
        let mut x = vec![0.0; d];
        model.sample_sum_into(n, r, &mut x);
        let mut y = finite(f(&x), i, x[0])?;
        if gaussian_mean.is_none() {
            let z: Vec<f64> = (0..model.mixing().ncols())
                .map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, r))
                .collect();
            model.apply(&z, &mut x);
            y -= finite(f(&x), i, x[0])?;
        }
        acc[0].push(y);
        Ok(())
    })?;
    let w = acc[0];
    Ok(DeltaEstimate::new(w.mean - gaussian_mean.unwrap_or(0.0), w.std_error(), w.count))
}

/// Σ |weight|·bound.
pub fn aggregate_signed_measure(atoms: &[SignedAtom]) -> Result<f64> {
    let mut total = 0.0;
    for (index, a) in atoms.iter().enumerate() {
        if !(a.bound >= 0.0) {
            return Err(CoreError::NegativeAtomBound { index, bound: a.bound });
        }
        total += a.weight.abs() * a.bound;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gauss_pdf, ln_gamma};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use statrs::function::gamma::gamma_ur;

    fn exp_model() -> UnivariateModel {
        UnivariateModel::centered_exp()
    }

    /// E(W_n − t)₊ for Exp(1) − 1 from the Gamma(n) law of the sum.
    fn exact_exp_relu(n: u64, t: f64) -> f64 {
        let nf = n as f64;
        let c = nf + t * nf.sqrt();
        (nf * gamma_ur(nf + 1.0, c) - c * gamma_ur(nf, c)) / nf.sqrt()
    }

    #[test]
    fn moment_matching_functions_give_zero() {
        for (i, m) in [exp_model(), UnivariateModel::sym_uniform(), UnivariateModel::bernoulli(0.3).unwrap()].iter().enumerate() {
            let d = estimate_delta_f(m, |x| x * x, 50, 100_000, RngStream::new(1, i as u64), Some(1.0)).unwrap();
            assert!(d.abs_delta <= 3.0 * d.se, "{}: {d:?}", m.name());
            let d = estimate_delta_f(m, |x| x, 50, 100_000, RngStream::new(2, i as u64), Some(0.0)).unwrap();
            assert!(d.abs_delta <= 3.0 * d.se, "{}: {d:?}", m.name());
        }
    }

    #[test]
    fn identical_laws_give_zero_on_a_battery() {
        let m = UnivariateModel::normal();
        let battery: Vec<Box<dyn Fn(f64) -> f64 + Sync>> = vec![
            Box::new(f64::sin),
            Box::new(f64::tanh),
            Box::new(|x| if x > 0.3 { 1.0 } else { 0.0 }),
            Box::new(|x: f64| x.clamp(0.0, 2.0)),
            Box::new(|x: f64| (-x * x).exp()),
        ];
        for (i, f) in battery.iter().enumerate() {
            let d = estimate_delta_f(&m, f, 20, 100_000, RngStream::new(3, i as u64), None).unwrap();
            assert!(d.abs_delta <= 3.0 * d.se, "function {i}: {d:?}");
        }
    }

    #[test]
    fn relu_at_zero_matches_gamma_law() {
        // E(G − n)₊ = n^{n+1}e^{−n}/n! for G ~ Gamma(n)
        let n = 100u64;
        let nf = n as f64;
        let exact = ((nf + 1.0) * nf.ln() - nf - ln_gamma(nf + 1.0)).exp() / nf.sqrt() - gauss_pdf(0.0);
        assert_abs_diff_eq!(exact, exact_exp_relu(n, 0.0) - gauss_pdf(0.0), epsilon = 1e-12);
        assert!(exact < 0.0 && exact > -4e-4);
        let d = estimate_delta_f(&exp_model(), |x| x.max(0.0), n, 1_000_000, RngStream::new(4, 0), Some(gauss_pdf(0.0))).unwrap();
        assert!((d.delta - exact).abs() <= 4.0 * d.se, "{d:?} vs {exact}");
    }

    #[test]
    fn rejects_small_budgets_and_nan() {
        let m = exp_model();
        assert!(estimate_delta_f(&m, |x| x, 10, 99, RngStream::new(0, 0), Some(0.0)).is_err());
        let r = estimate_delta_f(&m, |x| if x > 0.0 { f64::NAN } else { x }, 10, 1000, RngStream::new(0, 0), Some(0.0));
        match r {
            Err(CoreError::NonFiniteSample { input, .. }) => assert!(input > 0.0),
            other => panic!("expected NonFiniteSample, got {other:?}"),
        }
    }

    #[test]
    fn output_independent_of_thread_count() {
        let m = exp_model();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                estimate_delta_f(&m, |x| x.max(0.0), 30, 5 * CHUNK + 17, RngStream::new(9, 9), Some(gauss_pdf(0.0))).unwrap()
            })
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.delta.to_bits(), b.delta.to_bits());
        assert_eq!(a.se.to_bits(), b.se.to_bits());
    }

    #[test]
    fn doubling_reps_shrinks_se() {
        let m = exp_model();
        for trial in 0..3 {
            let a = estimate_delta_f(&m, |x| x.max(0.0), 20, 200_000, RngStream::new(10, trial), Some(gauss_pdf(0.0))).unwrap();
            let b = estimate_delta_f(&m, |x| x.max(0.0), 20, 400_000, RngStream::new(11, trial), Some(gauss_pdf(0.0))).unwrap();
            let ratio = b.se / a.se;
            assert!((ratio - 0.5f64.sqrt()).abs() <= 0.2 * 0.5f64.sqrt(), "ratio {ratio}");
        }
    }

    #[test]
    fn grid_estimates_match_gamma_law_with_and_without_controls() {
        let m = exp_model();
        let ns = [25, 100];
        let ts = [0.0, 1.0];
        let fs: Vec<Box<dyn Fn(f64) -> f64 + Sync>> = ts.iter().map(|&t| Box::new(move |x: f64| (x - t).max(0.0)) as Box<dyn Fn(f64) -> f64 + Sync>).collect();
        let refs: Vec<&(dyn Fn(f64) -> f64 + Sync)> = fs.iter().map(|b| b.as_ref()).collect();
        let gm: Vec<f64> = ts.iter().map(|&t| gauss_pdf(t) - t * crate::numerics::gauss_sf(t)).collect();
        let plain = estimate_delta_grid(&m, &ns, &refs, &gm, Controls::None, 400_000, RngStream::new(12, 0)).unwrap();
        let cv = estimate_delta_grid(&m, &ns, &refs, &gm, Controls::Powers(4), 400_000, RngStream::new(12, 0)).unwrap();
        for (a, &n) in ns.iter().enumerate() {
            for (b, &t) in ts.iter().enumerate() {
                let exact = exact_exp_relu(n, t) - gm[b];
                assert!((plain[a][b].delta - exact).abs() <= 4.0 * plain[a][b].se);
                assert!((cv[a][b].delta - exact).abs() <= 4.0 * cv[a][b].se, "{:?} vs {exact}", cv[a][b]);
                assert!(cv[a][b].se < 0.5 * plain[a][b].se);
            }
        }
    }

    #[test]
    fn nested_sums_have_the_right_laws() {
        let m = exp_model();
        let ns = [3u64, 10, 40];
        let mut r = RngStream::new(13, 0).rng();
        let mut w3 = [Welford::new(); 3];
        let mut out = [0.0; 3];
        for _ in 0..200_000 {
            nested_sums(&m, &ns, &mut r, &mut out);
            for k in 0..3 {
                w3[k].push(out[k].powi(3));
            }
        }
        for k in 0..3 {
            let target = standardized_power_mean(&m, ns[k], 3).unwrap();
            assert!((w3[k].mean - target).abs() <= 4.0 * w3[k].std_error());
        }
    }

    #[test]
    fn levelset_examples() {
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.25).collect();
        let u = UnivariateModel::sym_uniform();
        let p = estimate_delta_levelset(&u, |x| x, Monotone::Increasing, 30, &[0.0], 200_000, RngStream::new(14, 0)).unwrap();
        assert!(p.points[0].diff.abs() <= 3.0 * p.points[0].se);
        let z = UnivariateModel::normal();
        let p = estimate_delta_levelset(&z, |x| x, Monotone::Increasing, 5, &grid, 200_000, RngStream::new(14, 1)).unwrap();
        for q in &p.points {
            // null standard error; sample tails can be empty
            let g = crate::numerics::gauss_sf(q.t);
            assert!(q.diff.abs() <= 4.0 * (g * (1.0 - g) / 200_000.0).sqrt(), "{q:?}");
        }
        assert!(estimate_delta_levelset(&z, |x| x, Monotone::Increasing, 5, &[], 1000, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn levelset_exp_matches_gamma_law_and_edgeworth_sign() {
        use statrs::distribution::{ContinuousCDF, Gamma as GammaLaw};
        let n = 50u64;
        let nf = n as f64;
        let law = GammaLaw::new(nf, 1.0).unwrap();
        let p = estimate_delta_levelset(&exp_model(), |x| x, Monotone::Increasing, n, &[0.0, 1.0], 1_000_000, RngStream::new(15, 0)).unwrap();
        for q in &p.points {
            let exact = law.sf(nf + q.t * nf.sqrt()) - crate::numerics::gauss_sf(q.t);
            assert!((q.diff - exact).abs() <= 4.0 * q.se, "{q:?} vs {exact}");
        }
        // at t = 0 the CDF correction is +2/(6√(2πn)), so the upper-tail difference is negative
        let correction = 2.0 / (6.0 * (2.0 * std::f64::consts::PI * nf).sqrt());
        assert!(p.points[0].diff < 0.0);
        assert!((p.points[0].diff + correction).abs() <= 4.0 * p.points[0].se + 0.01 * correction + 2.0 / nf);
    }

    #[test]
    fn decreasing_levelsets() {
        let m = exp_model();
        let p = estimate_delta_levelset(&m, |x: f64| -x, Monotone::Decreasing, 40, &[-1.0, 0.0, 1.0], 200_000, RngStream::new(16, 0)).unwrap();
        let q = estimate_delta_levelset(&m, |x| x, Monotone::Increasing, 40, &[-1.0, 0.0, 1.0], 200_000, RngStream::new(16, 0)).unwrap();
        // {−W ≥ t} = {W ≤ −t}: probabilities complement those of {W > −t}
        for (a, b) in p.points.iter().zip(q.points.iter().rev()) {
            assert!((a.diff + b.diff).abs() <= 4.0 * (a.se + b.se) + 1e-3);
        }
    }

    #[test]
    fn levelset_integral_reproduces_direct_delta() {
        let m = exp_model();
        let clip = 4.0;
        let grid: Vec<f64> = (0..=800).map(|i| -clip + i as f64 * 0.01).collect();
        let f = move |x: f64| x.clamp(-clip, clip);
        let stream = RngStream::new(17, 0);
        let level = estimate_delta_levelset(&m, f, Monotone::Increasing, 10, &grid, 400_000, stream).unwrap();
        // E clamp(Z, −c, c) = 0 by symmetry
        let direct = estimate_delta_f(&m, f, 10, 400_000, stream, Some(0.0)).unwrap();
        let tol = 5.0 * (level.integral_se + direct.se) + 1e-4;
        assert!((level.integral - direct.delta).abs() <= tol, "{} vs {}", level.integral, direct.delta);
    }

    #[test]
    fn aggregate_examples() {
        assert_abs_diff_eq!(aggregate_signed_measure(&[SignedAtom { weight: -2.0, bound: 0.1 }]).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(aggregate_signed_measure(&[]).unwrap(), 0.0);
        let atoms = [SignedAtom { weight: 1.0, bound: 0.05 }, SignedAtom { weight: -1.0, bound: 0.05 }];
        assert_abs_diff_eq!(aggregate_signed_measure(&atoms).unwrap(), 0.1, epsilon = 1e-15);
        assert!(matches!(
            aggregate_signed_measure(&[SignedAtom { weight: 1.0, bound: -0.1 }]),
            Err(CoreError::NegativeAtomBound { index: 0, .. })
        ));
    }

    fn atom() -> impl Strategy<Value = SignedAtom> {
        (-10.0f64..10.0, 0.0f64..5.0).prop_map(|(weight, bound)| SignedAtom { weight, bound })
    }

    proptest! {
        #[test]
        fn aggregate_is_additive_and_order_free(a in prop::collection::vec(atom(), 0..20), b in prop::collection::vec(atom(), 0..20)) {
            let joined: Vec<SignedAtom> = a.iter().chain(b.iter()).copied().collect();
            let total = aggregate_signed_measure(&joined).unwrap();
            let parts = aggregate_signed_measure(&a).unwrap() + aggregate_signed_measure(&b).unwrap();
            prop_assert!(total <= parts * (1.0 + 1e-12) + 1e-12);
            let mut rev = joined.clone();
            rev.reverse();
            prop_assert!((aggregate_signed_measure(&rev).unwrap() - total).abs() <= 1e-12 * (1.0 + total));
        }

        #[test]
        fn comoment_merge_is_exact(xs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..60), cut in 1usize..3) {
            let mut whole = CoMoments::new(2);
            xs.iter().for_each(|&(a, b)| whole.push(&[a, b]));
            let split = cut.min(xs.len() - 1);
            let mut left = vec![CoMoments::new(2)];
            let mut right = vec![CoMoments::new(2)];
            xs[..split].iter().for_each(|&(a, b)| left[0].push(&[a, b]));
            xs[split..].iter().for_each(|&(a, b)| right[0].push(&[a, b]));
            left.merge(right);
            for i in 0..2 {
                prop_assert!((left[0].mean[i] - whole.mean[i]).abs() < 1e-12);
                for j in 0..2 {
                    prop_assert!((left[0].cov(i, j) - whole.cov(i, j)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn multi_delta_gaussian_is_null() {
        let m = crate::dist_zoo::MultivariateModel::box_aniso(3).unwrap();
        let f = |x: &[f64]| (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp();
        let g = crate::dist_zoo::MultivariateModel::gauss_iso(3).unwrap();
        // E exp(−‖Z‖²/2) = 2^{−3/2}
        let d = super::estimate_delta_multi(&g, f, 7, 50_000, super::RngStream::new(9, 0), Some(2f64.powf(-1.5))).unwrap();
        assert!(d.delta.abs() < 4.0 * d.se, "{d:?}");
        let paired = super::estimate_delta_multi(&m, f, 50, 50_000, super::RngStream::new(9, 1), None).unwrap();
        assert!(paired.delta.abs() < 4.0 * paired.se + 0.01, "{paired:?}");
    }
}
