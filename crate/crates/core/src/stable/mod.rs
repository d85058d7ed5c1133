//! The rotationally invariant α-stable process on R^d: constants, closed-form
//! kernels and exact samplers.

mod density;
mod sampling;

pub use density::{density_sandwich_check, transition_density};
pub use sampling::{
    exit_radius_cdf_centered, sample_exit_from_ball, sample_increment, sample_increment_into, sample_positive_stable, EXIT_REJECTION_CAP,
};

use crate::error::{Error, Result};
use libm::tgamma;
use std::f64::consts::PI;

/// Default supported stability range. Outside it the density inversion and
/// the subordinator sampler lose accuracy.
pub const SUPPORTED_ALPHA: (f64, f64) = (0.3, 1.8);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableModel {
    pub d: usize,
    pub alpha: f64,
    /// Lévy density constant: ν(x) = A |x|^{-d-α}.
    pub a_const: f64,
    /// E^x τ_{B(0,r)} = c_exit (r² - |x|²)^{α/2}.
    pub c_exit: f64,
    /// Constant in front of the ball exit density.
    pub c_poisson: f64,
}

impl StableModel {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Config(format!("alpha out of (0,2): {alpha}")));
        }
        let df = d as f64;
        let a_const = 2f64.powf(alpha) * PI.powf(-df / 2.0) * tgamma((df + alpha) / 2.0) / tgamma(-alpha / 2.0).abs();
        let c_exit = tgamma(df / 2.0) / (2f64.powf(alpha) * tgamma(1.0 + alpha / 2.0) * tgamma((df + alpha) / 2.0));
        let c_poisson = tgamma(df / 2.0) * PI.powf(-df / 2.0 - 1.0) * (PI * alpha / 2.0).sin();
        Ok(Self { d, alpha, a_const, c_exit, c_poisson })
    }

    pub fn in_supported_range(&self) -> bool {
        (SUPPORTED_ALPHA.0..=SUPPORTED_ALPHA.1).contains(&self.alpha)
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Domain(format!("point has dimension {}, model has {}", x.len(), self.d)));
        }
        Ok(())
    }

    /// Surface area of the unit sphere S^{d-1}.
    pub fn sphere_area(&self) -> f64 {
        let df = self.d as f64;
        2.0 * PI.powf(df / 2.0) / tgamma(df / 2.0)
    }

    /// Volume of B(0, r).
    pub fn ball_volume(&self, r: f64) -> f64 {
        self.sphere_area() / self.d as f64 * r.powi(self.d as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn centered(d: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; d], radius)
    }

    pub fn dist_from_center(&self, x: &[f64]) -> f64 {
        dist(x, &self.center)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.dist_from_center(x) < self.radius
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// ν(x) = A |x|^{-d-α}.
pub fn levy_density(m: &StableModel, x: &[f64]) -> Result<f64> {
    m.check_point(x)?;
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::Domain("Lévy density is singular at the origin".into()));
    }
    Ok(m.a_const * r.powf(-(m.d as f64) - m.alpha))
}

/// E^x τ_B for a ball B.
pub fn mean_exit_time_ball(m: &StableModel, b: &BallSpec, x: &[f64]) -> Result<f64> {
    m.check_point(x)?;
    let rho = b.dist_from_center(x);
    if rho > b.radius {
        return Err(Error::Domain(format!("point at distance {rho} lies outside the ball of radius {}", b.radius)));
    }
    let s = (b.radius * b.radius - rho * rho).max(0.0);
    Ok(m.c_exit * s.powf(m.alpha / 2.0))
}

/// Density at `y` of the exit position from `b` started at `x`.
pub fn poisson_kernel_ball(m: &StableModel, b: &BallSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    m.check_point(x)?;
    m.check_point(y)?;
    let rho = b.dist_from_center(x);
    if rho >= b.radius {
        return Err(Error::Domain("start point must lie inside the ball".into()));
    }
    let ry = b.dist_from_center(y);
    let delta2 = b.radius * b.radius;
    if ry <= b.radius {
        return Ok(0.0);
    }
    let ratio = (delta2 - rho * rho) / (ry * ry - delta2);
    Ok(m.c_poisson * ratio.powf(m.alpha / 2.0) * dist(x, y).powf(-(m.d as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn constants_against_closed_gamma_values() {
        // Γ(1/2) = √π, Γ(3/2) = √π/2, Γ(-1/2) = -2√π, Γ(1) = Γ(2) = 1
        let sp = PI.sqrt();
        let m = StableModel::new(1, 1.0).unwrap();
        assert!(rel(m.a_const, 1.0 / PI) < 1e-12);
        assert!(rel(m.c_exit, sp / (2.0 * (sp / 2.0) * 1.0)) < 1e-12);
        assert!(rel(m.c_poisson, 1.0 / PI) < 1e-12);

        let m = StableModel::new(2, 1.0).unwrap();
        assert!(rel(m.c_exit, 2.0 / PI) < 1e-12);
        // A = 2 π^{-1} Γ(3/2) / (2√π) = 1 / (2π)
        assert!(rel(m.a_const, 1.0 / (2.0 * PI)) < 1e-12);

        // d = 3, α = 1: Γ(2) = 1, c = Γ(3/2) / (2 Γ(3/2) Γ(2)) = 1/2
        let m = StableModel::new(3, 1.0).unwrap();
        assert!(rel(m.c_exit, 0.5) < 1e-12);
        assert!(rel(m.a_const, 2.0 * PI.powf(-1.5) / (2.0 * sp)) < 1e-12);
        assert!(rel(m.c_poisson, (sp / 2.0) * PI.powf(-2.5)) < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StableModel::new(1, 2.5).is_err());
        assert!(StableModel::new(1, 0.0).is_err());
        assert!(StableModel::new(0, 1.0).is_err());
        assert!(BallSpec::centered(1, 0.0).is_err());
    }

    #[test]
    fn levy_density_values() {
        let m = StableModel::new(1, 1.0).unwrap();
        assert!(rel(levy_density(&m, &[1.0]).unwrap(), 1.0 / PI) < 1e-12);
        assert!(rel(levy_density(&m, &[2.0]).unwrap(), 1.0 / (4.0 * PI)) < 1e-12);
        assert!(matches!(levy_density(&m, &[0.0]), Err(Error::Domain(_))));
        let m = StableModel::new(2, 0.7).unwrap();
        let a = levy_density(&m, &[0.3, 0.4]).unwrap();
        let b = levy_density(&m, &[0.9, 1.2]).unwrap();
        assert!(rel(b, a * 3f64.powf(-2.7)) < 1e-12);
    }

    #[test]
    fn exit_time_values() {
        let m = StableModel::new(1, 1.0).unwrap();
        let b = BallSpec::centered(1, 1.0).unwrap();
        assert!(rel(mean_exit_time_ball(&m, &b, &[0.0]).unwrap(), 1.0) < 1e-12);
        assert_eq!(mean_exit_time_ball(&m, &b, &[1.0]).unwrap(), 0.0);
        assert!(mean_exit_time_ball(&m, &b, &[1.5]).is_err());
        let m = StableModel::new(2, 1.0).unwrap();
        let b = BallSpec::centered(2, 1.0).unwrap();
        assert!(rel(mean_exit_time_ball(&m, &b, &[0.0, 0.0]).unwrap(), 2.0 / PI) < 1e-12);
    }

    #[test]
    fn poisson_kernel_values() {
        let m = StableModel::new(1, 1.0).unwrap();
        let b = BallSpec::centered(1, 1.0).unwrap();
        let v = poisson_kernel_ball(&m, &b, &[0.0], &[2.0]).unwrap();
        assert!(rel(v, 1.0 / (PI * 2.0 * 3f64.sqrt())) < 1e-12);
        assert_eq!(poisson_kernel_ball(&m, &b, &[0.0], &[0.5]).unwrap(), 0.0);
        assert_eq!(poisson_kernel_ball(&m, &b, &[0.3], &[-1.0]).unwrap(), 0.0);
    }

    /// Total exit mass for d = 1. With u = (ρ² - δ²)^{1-α/2} the factor
    /// (ρ² - δ²)^{-α/2} of the kernel cancels against dρ/du, leaving
    /// C (δ² - x²)^{α/2} / ((2-α) ρ |x - y|) with no boundary singularity.
    /// Away from the boundary the integrand is checked against the kernel.
    fn exit_mass_1d(m: &StableModel, delta: f64, x: f64) -> f64 {
        let b = BallSpec::centered(1, delta).unwrap();
        let p = 2.0 / (2.0 - m.alpha);
        let side = |sign: f64| {
            let f = |u: f64| {
                let rho = (delta * delta + u.powf(p)).sqrt();
                let y = sign * rho;
                let v = m.c_poisson * (delta * delta - x * x).powf(m.alpha / 2.0) / ((2.0 - m.alpha) * rho * (x - y).abs());
                if u > 0.1 && u < 1e3 {
                    let jac = u.powf(p * m.alpha / 2.0) / ((2.0 - m.alpha) * rho);
                    let k = poisson_kernel_ball(m, &b, &[x], &[y]).unwrap() * jac;
                    assert!(rel(k, v) < 1e-8, "{k} vs {v}");
                }
                v
            };
            // u = e^v: the integrand decays like e^{-vα/(2-α)}
            let g = |v: f64| f(v.exp()) * v.exp();
            quad::integrate_with_breaks(g, &[-60.0, -10.0, 0.0, 10.0, 40.0, 100.0], 1e-13, 1e-11).unwrap().value
        };
        side(1.0) + side(-1.0)
    }

    #[test]
    fn poisson_kernel_is_a_probability_density() {
        for &alpha in &[0.5, 1.0, 1.5] {
            let m = StableModel::new(1, alpha).unwrap();
            for &delta in &[0.5, 1.0, 3.0] {
                for &frac in &[0.0, 0.4, 0.8] {
                    let mass = exit_mass_1d(&m, delta, frac * delta);
                    assert!((mass - 1.0).abs() < 1e-6, "alpha {alpha} delta {delta} frac {frac}: {mass}");
                }
            }
        }
    }

    #[test]
    fn poisson_kernel_mass_d3_from_center() {
        // radial integral of the centered kernel over |y| > δ
        let m = StableModel::new(3, 1.3).unwrap();
        let b = BallSpec::centered(3, 2.0).unwrap();
        let p = 2.0 / (2.0 - m.alpha);
        let f = |u: f64| {
            let s = (4.0 + u.powf(p)).sqrt();
            let v = m.sphere_area() * m.c_poisson * 4f64.powf(m.alpha / 2.0) / ((2.0 - m.alpha) * s * s);
            if u > 0.1 && u < 1e3 {
                let jac = u.powf(p * m.alpha / 2.0) / ((2.0 - m.alpha) * s);
                let k = m.sphere_area() * s * s * poisson_kernel_ball(&m, &b, &[0.0; 3], &[s, 0.0, 0.0]).unwrap() * jac;
                assert!(rel(k, v) < 1e-8, "{k} vs {v}");
            }
            v
        };
        let g = |v: f64| f(v.exp()) * v.exp();
        let mass = quad::integrate_with_breaks(g, &[-60.0, -10.0, 0.0, 10.0, 40.0, 100.0], 1e-13, 1e-11).unwrap().value;
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    }
}
