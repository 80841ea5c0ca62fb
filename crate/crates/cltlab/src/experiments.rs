use cltlab_core::dist_zoo::{MultivariateModel, UnivariateModel};
use cltlab_core::edgeworth::{
    charfn_sup_default, edgeworth_correction, nonuniform_bound_with, BoundConstants, BoundReport, BoundVariant,
};
use cltlab_core::mc_oracle::{estimate_delta_grid, estimate_delta_multi, Controls};
use cltlab_core::norm_moments::{expected_norm_gap_sweep, norm_gap_bound, probe_directions};
use cltlab_core::normball::{optimize_bandwidth, BallIntegration, MollifierKernel};
use cltlab_core::numerics::{gauss_cdf, gauss_pdf, QuadratureSpec, RngStream};
use cltlab_core::relu_delta::{
    delta_relu_sweep, edgeworth_relu_prediction, kappa, relu_pointwise_bound_with, relu_tail_integrals, zeta2_bound,
    zeta2_mc, TrapezoidGrid,
};
use cltlab_core::ridge_repr::{
    delta_bound_ridge, reconstruct_activation, reconstruct_ridge, relu_envelope, ActivationModel, FourierFunction,
    OmegaRule, RidgeBoundSpec,
};
use cltlab_core::CoreError;

use crate::config::{Experiment, ExperimentConfig};
use crate::table::{Cell, Table};
use crate::CliError;

const UNIVARIATE_SWEEP: &[&str] =
    &["n", "t", "mc", "se", "prediction", "bound", "moment_term", "fitted_constant", "vacuous"];

/// Column names per experiment. Stable; pinned by golden files.
pub fn header(e: Experiment) -> &'static [&'static str] {
    match e {
        Experiment::EdgeworthSweep => {
            &["n", "x", "mc", "se", "prediction", "bound", "moment_term", "fitted_constant", "vacuous"]
        }
        Experiment::ReluDeltaSweep => UNIVARIATE_SWEEP,
        Experiment::Zeta2 => {
            &["n", "mc", "se", "disc_err", "prediction", "bound", "moment_term", "fitted_constant", "vacuous"]
        }
        Experiment::RidgeReconstruct => &[
            "x1",
            "x2",
            "reference",
            "ridge",
            "ridge_err",
            "ridge_abs_err",
            "activation",
            "activation_err",
            "activation_abs_err",
        ],
        Experiment::RidgeDeltaBound => {
            &["n", "mc", "se", "bound", "moment_part", "moment_err", "char_part", "vacuous_directions", "directions"]
        }
        Experiment::NormballBound => &["n", "mc", "se", "h_star", "bound", "approx_error", "ball_bound"],
        Experiment::NormGap => &["n", "mc", "se", "bound", "moment_term", "fitted_constant", "vacuous", "c_d", "l4_l2"],
        Experiment::TailIdentities => &["identity", "t", "closed_form", "quadrature", "abs_err"],
    }
}

pub const DEFAULT_TAIL_GRID: [f64; 7] = [-5.0, -2.0, -1.0, 0.0, 1.0, 2.0, 5.0];
const DEFAULT_H_GRID: [f64; 5] = [0.1, 0.2, 0.4, 0.8, 1.6];
const NORM_GAP_EXTRA_DIRECTIONS: usize = 32;

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let k = cfg.bound_constants()?;
    let rng = RngStream::new(cfg.seed, 0);
    let controls = if cfg.control_variates { Controls::Powers(4) } else { Controls::None };
    match cfg.experiment {
        Experiment::EdgeworthSweep => edgeworth_sweep(cfg, &univariate(&cfg.model)?, k, rng, controls),
        Experiment::ReluDeltaSweep => relu_sweep(cfg, &univariate(&cfg.model)?, k, rng, controls),
        Experiment::Zeta2 => zeta2(cfg, &univariate(&cfg.model)?, k, rng, controls),
        Experiment::RidgeReconstruct => ridge_reconstruct(cfg),
        Experiment::RidgeDeltaBound => ridge_delta(cfg, &multivariate(&cfg.model)?, k),
        Experiment::NormballBound => normball(cfg, &multivariate(&cfg.model)?, k),
        Experiment::NormGap => norm_gap(cfg, &multivariate(&cfg.model)?, k),
        Experiment::TailIdentities => tail_identities(cfg),
    }
}

fn univariate(name: &str) -> Result<UnivariateModel, CliError> {
    UnivariateModel::from_name(name).map_err(|_| CliError::UnknownModel(name.into()))
}

fn multivariate(name: &str) -> Result<MultivariateModel, CliError> {
    MultivariateModel::from_name(name).map_err(|_| CliError::UnknownModel(name.into()))
}

/// `gauss:d=<d>` with d ∈ {1, 2}.
fn test_function(name: &str) -> Result<FourierFunction, CliError> {
    let d = match name {
        "gauss:d=1" => 1,
        "gauss:d=2" => 2,
        _ => return Err(CliError::UnknownModel(name.into())),
    };
    Ok(FourierFunction::gaussian(d)?)
}

/// Residual per unit constant: |mc − prediction| / (moment_term / C).
fn fitted(residual: f64, report: &BoundReport, k: BoundConstants) -> Cell {
    let unit = report.moment_term / k.scale;
    if unit > 0.0 {
        Cell::Num(residual / unit)
    } else {
        Cell::Missing
    }
}

fn bound_cells(report: &BoundReport) -> [Cell; 2] {
    [Cell::opt(report.valid().ok()), Cell::Num(report.moment_term)]
}

fn edgeworth_sweep(
    cfg: &ExperimentConfig,
    model: &UnivariateModel,
    k: BoundConstants,
    rng: RngStream,
    controls: Controls,
) -> Result<Table, CliError> {
    let xs: Vec<f64> = if cfg.x_grid.is_empty() {
        (-3..=3).map(f64::from).collect()
    } else {
        cfg.x_grid.iter().map(|p| scalar(p.coords())).collect::<Result<_, _>>()?
    };
    let fs: Vec<Box<dyn Fn(f64) -> f64 + Sync>> =
        xs.iter().map(|&x| Box::new(move |w: f64| f64::from(u8::from(w <= x))) as Box<dyn Fn(f64) -> f64 + Sync>).collect();
    let refs: Vec<&(dyn Fn(f64) -> f64 + Sync)> = fs.iter().map(|f| f.as_ref()).collect();
    let means: Vec<f64> = xs.iter().map(|&x| gauss_cdf(x)).collect();
    let est = estimate_delta_grid(model, &cfg.n_values, &refs, &means, controls, cfg.reps, rng)?;
    let sup = charfn_sup_default(model)?;
    let m = model.moments();
    let mut t = Table::new(header(Experiment::EdgeworthSweep));
    for (&n, row) in cfg.n_values.iter().zip(&est) {
        for (&x, mc) in xs.iter().zip(row) {
            let pred = edgeworth_correction(m, n, x);
            let b = nonuniform_bound_with(model, n, x, k, BoundVariant::FourthMoment, &sup)?;
            let [bound, moment] = bound_cells(&b);
            t.push(vec![
                Cell::Int(n),
                Cell::Num(x),
                Cell::Num(mc.delta),
                Cell::Num(mc.se),
                Cell::Num(pred),
                bound,
                moment,
                fitted((mc.delta - pred).abs(), &b, k),
                Cell::Flag(b.vacuous),
            ]);
        }
    }
    Ok(t)
}

fn scalar(c: Vec<f64>) -> Result<f64, CliError> {
    match c.as_slice() {
        [x] => Ok(*x),
        _ => Err(CliError::Config("this experiment takes scalar x_grid points".into())),
    }
}

fn relu_sweep(
    cfg: &ExperimentConfig,
    model: &UnivariateModel,
    k: BoundConstants,
    rng: RngStream,
    controls: Controls,
) -> Result<Table, CliError> {
    let est = delta_relu_sweep(model, &cfg.n_values, &cfg.t_grid, cfg.reps, rng, controls)?;
    let sup = charfn_sup_default(model)?;
    let mut t = Table::new(header(Experiment::ReluDeltaSweep));
    for (&n, row) in cfg.n_values.iter().zip(&est) {
        for (&tt, mc) in cfg.t_grid.iter().zip(row) {
            let pred = edgeworth_relu_prediction(model.moments(), n, tt);
            let b = relu_pointwise_bound_with(model, n, tt, k, &sup)?;
            let [bound, moment] = bound_cells(&b);
            t.push(vec![
                Cell::Int(n),
                Cell::Num(tt),
                Cell::Num(mc.delta),
                Cell::Num(mc.se),
                Cell::Num(pred),
                bound,
                moment,
                fitted((mc.delta - pred).abs(), &b, k),
                Cell::Flag(b.vacuous),
            ]);
        }
    }
    Ok(t)
}

fn zeta2(
    cfg: &ExperimentConfig,
    model: &UnivariateModel,
    k: BoundConstants,
    rng: RngStream,
    controls: Controls,
) -> Result<Table, CliError> {
    let est = zeta2_mc(model, &cfg.n_values, TrapezoidGrid::default(), cfg.reps, rng, controls)?;
    let mut t = Table::new(header(Experiment::Zeta2));
    for e in est {
        let zb = zeta2_bound(model, e.n, k)?;
        let [bound, moment] = bound_cells(&zb.bound);
        t.push(vec![
            Cell::Int(e.n),
            Cell::Num(e.mc.delta),
            Cell::Num(e.mc.se),
            Cell::Num(e.disc_err),
            Cell::Num(zb.prediction),
            bound,
            moment,
            fitted((e.mc.delta - zb.prediction).abs(), &zb.bound, k),
            Cell::Flag(zb.bound.vacuous),
        ]);
    }
    Ok(t)
}

fn ridge_reconstruct(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let f = test_function(&cfg.model)?;
    let d = f.dim();
    let points: Vec<Vec<f64>> = if cfg.x_grid.is_empty() {
        default_lattice(d)
    } else {
        cfg.x_grid.iter().map(|p| p.coords()).collect()
    };
    if points.iter().any(|p| p.len() != d) {
        return Err(CliError::Config(format!("x_grid points must have dimension {d}")));
    }
    let act = ActivationModel::gaussian_bump(1.0)?;
    let rule = OmegaRule::Tensor(QuadratureSpec { abs_tol: 1e-9, rel_tol: 1e-9, ..Default::default() });
    let mut t = Table::new(header(Experiment::RidgeReconstruct));
    for x in points {
        let reference = f.eval(&x);
        let r = reconstruct_ridge(&f, &x, rule)?;
        let a = reconstruct_activation(&f, &act, &x, rule)?;
        t.push(vec![
            Cell::Num(x[0]),
            Cell::opt(x.get(1).copied()),
            Cell::Num(reference),
            Cell::Num(r.value),
            Cell::Num(r.err),
            Cell::Num((r.value - reference).abs()),
            Cell::Num(a.value),
            Cell::Num(a.err),
            Cell::Num((a.value - reference).abs()),
        ]);
    }
    Ok(t)
}

/// 25 points with ‖x‖ ≤ 3: a line in d = 1, a 5×5 lattice in d = 2.
pub fn default_lattice(d: usize) -> Vec<Vec<f64>> {
    if d == 1 {
        (0..25).map(|i| vec![-3.0 + 0.25 * f64::from(i)]).collect()
    } else {
        (0..25).map(|i| vec![-2.0 + f64::from(i / 5), -2.0 + f64::from(i % 5)]).collect()
    }
}

fn ridge_delta(cfg: &ExperimentConfig, model: &MultivariateModel, k: BoundConstants) -> Result<Table, CliError> {
    let f = FourierFunction::gaussian(model.dim())?;
    let env = relu_envelope(k);
    let spec = RidgeBoundSpec { rng: RngStream::new(cfg.seed, 1), ..Default::default() };
    let exact = f.gaussian_expectation(model.covariance());
    let mut t = Table::new(header(Experiment::RidgeDeltaBound));
    for (i, &n) in cfg.n_values.iter().enumerate() {
        let b = delta_bound_ridge(&f, &env, model, n, &spec)?;
        let mc = estimate_delta_multi(model, |x| f.eval(x), n, cfg.reps, RngStream::new(cfg.seed, 100 + i as u64), exact)?;
        t.push(vec![
            Cell::Int(n),
            Cell::Num(mc.delta),
            Cell::Num(mc.se),
            Cell::opt(b.valid().ok()),
            Cell::Num(b.moment_part.value),
            Cell::Num(b.moment_part.err),
            Cell::Num(b.char_part),
            Cell::Int(b.vacuous_directions.len() as u64),
            Cell::Int(b.directions as u64),
        ]);
    }
    Ok(t)
}

fn normball(cfg: &ExperimentConfig, model: &MultivariateModel, k: BoundConstants) -> Result<Table, CliError> {
    let r = model.trace_sigma2().sqrt();
    let ball = move |x: &[f64]| f64::from(u8::from(x.iter().map(|v| v * v).sum::<f64>() <= r * r));
    let d = model.dim();
    let probes: Vec<Vec<f64>> = [0.0, 0.5, 0.9, 1.1, 2.0]
        .iter()
        .map(|s| {
            let mut p = vec![0.0; d];
            p[0] = s * r;
            p
        })
        .collect();
    let h_grid = if cfg.h_grid.is_empty() { DEFAULT_H_GRID.to_vec() } else { cfg.h_grid.clone() };
    let integ = BallIntegration { radial: true, ..Default::default() };
    let mut t = Table::new(header(Experiment::NormballBound));
    for (i, &n) in cfg.n_values.iter().enumerate() {
        let choice = optimize_bandwidth(&ball, model, n, &h_grid, MollifierKernel::Gaussian, k, &probes, &integ)?;
        let mc = estimate_delta_multi(model, ball, n, cfg.reps, RngStream::new(cfg.seed, 100 + i as u64), None)?;
        let (_, approx, ball_bound) =
            choice.profile.iter().copied().find(|p| p.0 == choice.h_star).expect("h_star comes from the profile");
        t.push(vec![
            Cell::Int(n),
            Cell::Num(mc.delta),
            Cell::Num(mc.se),
            Cell::Num(choice.h_star),
            Cell::Num(choice.total),
            Cell::Num(approx),
            Cell::Num(ball_bound),
        ]);
    }
    Ok(t)
}

fn norm_gap(cfg: &ExperimentConfig, model: &MultivariateModel, k: BoundConstants) -> Result<Table, CliError> {
    let gaps = expected_norm_gap_sweep(model, &cfg.n_values, cfg.reps, RngStream::new(cfg.seed, 0), cfg.control_variates)?;
    let dirs = probe_directions(model.dim(), NORM_GAP_EXTRA_DIRECTIONS, RngStream::new(cfg.seed, 1))?;
    let mut t = Table::new(header(Experiment::NormGap));
    for (&n, g) in cfg.n_values.iter().zip(&gaps) {
        let b = norm_gap_bound(model, n, k, &dirs)?;
        let [bound, moment] = bound_cells(&b.report);
        t.push(vec![
            Cell::Int(n),
            Cell::Num(g.delta),
            Cell::Num(g.se),
            bound,
            moment,
            fitted(g.abs_delta, &b.report, k),
            Cell::Flag(b.report.vacuous),
            Cell::Num(b.c_d),
            Cell::Num(b.l4_l2),
        ]);
    }
    Ok(t)
}

fn tail_identities(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let ts = if cfg.t_grid.is_empty() { DEFAULT_TAIL_GRID.to_vec() } else { cfg.t_grid.clone() };
    let mut t = Table::new(header(Experiment::TailIdentities));
    for &x in &ts {
        let q = relu_tail_integrals(x)?;
        for (name, closed, quad) in
            [("hermite_tail", -x * gauss_pdf(x), q.hermite_tail), ("kappa", kappa(x), q.kappa_quadrature)]
        {
            t.push(vec![
                Cell::Text(name.into()),
                Cell::Num(x),
                Cell::Num(closed),
                Cell::Num(quad),
                Cell::Num((closed - quad).abs()),
            ]);
        }
    }
    Ok(t)
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::UnknownModel(m) => CliError::UnknownModel(m),
            other => CliError::Compute(other),
        }
    }
}
