use cltlab_core::normball::{holder_t_integrals, holder_t_quadrature};
use cltlab_core::numerics::{gauss_pdf, QuadratureSpec};
use cltlab_core::relu_delta::{kappa, relu_tail_integrals};
use cltlab_core::ridge_repr::relu_complex_identity;
use cltlab_core::Result;
use num_complex::Complex64;

use crate::experiments::DEFAULT_TAIL_GRID;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Tail integrals of the Hermite and κ weights, the ReLU form of e^{iz} − iz − 1,
/// and the t-integrals of the ball bound.
pub fn run_all() -> Vec<Check> {
    vec![
        wrap("tail_integrals", tail_integrals),
        wrap("relu_complex_identity", complex_identity),
        wrap("ball_t_integrals", ball_t_integrals),
    ]
}

fn wrap(name: &'static str, f: fn() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check { name, pass: false, detail: format!("error: {e}") },
    }
}

fn tail_integrals() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for t in DEFAULT_TAIL_GRID {
        let q = relu_tail_integrals(t)?;
        worst = worst.max((q.hermite_tail + t * gauss_pdf(t)).abs()).max((q.kappa_quadrature - kappa(t)).abs());
    }
    Ok((worst < 1e-9, format!("max abs error {worst:.3e} (tolerance 1e-9)")))
}

fn complex_identity() -> Result<(bool, String)> {
    let spec = QuadratureSpec::default();
    let mut worst = 0.0f64;
    let mut envelope = true;
    for i in 0..81 {
        let z = -20.0 + 0.5 * f64::from(i);
        let exact = Complex64::new(z.cos() - 1.0, z.sin() - z);
        worst = worst.max((relu_complex_identity(z, &spec)? - exact).norm());
        envelope &= exact.norm() <= (2.0 * z.abs()).min(z * z / 2.0) + 1e-12;
    }
    Ok((worst < 1e-9 && envelope, format!("max abs error {worst:.3e} (tolerance 1e-9), envelope holds: {envelope}")))
}

fn ball_t_integrals() -> Result<(bool, String)> {
    let q = QuadratureSpec { abs_tol: 1e-13, rel_tol: 1e-12, ..Default::default() };
    let mut worst = 0.0f64;
    let mut dominated = true;
    for y in [0.5, 1.0, 2.0] {
        for tau in [0.5, 1.0, 2.0] {
            let b = holder_t_integrals(y, tau)?;
            let (i1, i2, i3) = holder_t_quadrature(y, tau, &q)?;
            worst = worst.max((i2 - (-y * y / (8.0 * tau)).exp()).abs()).max((b.i2_exact - i2).abs());
            dominated &= i1 <= b.i1_bound && i3 <= b.i3_bound;
        }
    }
    Ok((worst < 1e-10 && dominated, format!("max abs error {worst:.3e} (tolerance 1e-10), bounds dominate: {dominated}")))
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_pass() {
        for c in super::run_all() {
            assert!(c.pass, "{c:?}");
        }
    }
}
