use rand_distr::{Distribution, StandardNormal};

use super::{ln_gamma, RngStream};
use crate::error::{domain, Result};

/// Uniform draws on S^{d-1} by normalizing standard Gaussian vectors.
pub fn sphere_sample(d: usize, count: usize, rng: RngStream) -> Result<Vec<Vec<f64>>> {
    if d == 0 {
        return Err(domain("sphere dimension must be at least 1"));
    }
    let mut r = rng.rng();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Ok(out)
}

/// Surface area of S^{d-1}: 2π^{d/2}/Γ(d/2).
pub fn unit_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * (h * std::f64::consts::PI.ln() - ln_gamma(h)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_dimension_rejected() {
        assert!(sphere_sample(0, 1, RngStream::new(1, 1)).is_err());
    }

    #[test]
    fn circle_points_are_signs() {
        let draws = sphere_sample(1, 10_000, RngStream::new(1, 1)).unwrap();
        let plus = draws.iter().filter(|v| v[0] == 1.0).count();
        assert!(draws.iter().all(|v| v[0].abs() == 1.0));
        assert!((plus as f64 - 5000.0).abs() < 4.0 * 50.0);
    }

    #[test]
    fn unit_norm_and_centered() {
        let n = 100_000;
        let draws = sphere_sample(3, n, RngStream::new(9, 4)).unwrap();
        for v in &draws {
            assert_abs_diff_eq!(v.iter().map(|x| x * x).sum::<f64>().sqrt(), 1.0, epsilon = 1e-12);
        }
        for j in 0..3 {
            let mean = draws.iter().map(|v| v[j]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn sphere_areas() {
        assert_abs_diff_eq!(unit_sphere_area(2), 2.0 * std::f64::consts::PI, epsilon = 1e-12);
        assert_abs_diff_eq!(unit_sphere_area(3), 4.0 * std::f64::consts::PI, epsilon = 1e-12);
    }
}
