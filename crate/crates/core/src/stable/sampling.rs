use super::{BallSpec, StableModel};
use crate::error::{Error, Result};
use crate::quad;
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, StandardNormal};
use std::f64::consts::PI;

/// Iteration cap of the exit-position rejection loop.
pub const EXIT_REJECTION_CAP: usize = 10_000;

/// Symmetric standard stable variate, E e^{iξX} = e^{-|ξ|^α}
/// (Chambers-Mallows-Stuck).
fn sample_symmetric_1d<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha == 1.0 {
        let u: f64 = rng.random();
        return (PI * (u - 0.5)).tan();
    }
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = rng.sample(Exp1);
    let cv = v.cos();
    (alpha * v).sin() / cv.powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable variate with E e^{-λS} = e^{-λ^γ}, 0 < γ < 1 (Kanter).
pub fn sample_positive_stable<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random::<f64>();
    let w: f64 = rng.sample(Exp1);
    (gamma * u).sin() / u.sin().powf(1.0 / gamma) * (((1.0 - gamma) * u).sin() / w).powf((1.0 - gamma) / gamma)
}

/// Writes one increment X_h - X_0 into `out` (length d).
pub fn sample_increment_into<R: Rng + ?Sized>(m: &StableModel, h: f64, rng: &mut R, out: &mut [f64]) {
    let scale = h.powf(1.0 / m.alpha);
    if m.d == 1 {
        out[0] = scale * sample_symmetric_1d(m.alpha, rng);
        return;
    }
    // X = sqrt(2S) G with S positive (α/2)-stable: E e^{iξX} = E e^{-S|ξ|²} = e^{-|ξ|^α}
    let s = sample_positive_stable(m.alpha / 2.0, rng);
    let k = scale * (2.0 * s).sqrt();
    for v in out.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *v = k * g;
    }
}

pub fn sample_increment<R: Rng + ?Sized>(m: &StableModel, h: f64, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; m.d];
    sample_increment_into(m, h, rng, &mut out);
    out
}

fn uniform_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = super::norm(&g);
        if n > 1e-12 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Exit position from `b` started at `x`.
///
/// Proposals come from the exit law started at the centre, where
/// |Y - x0|² = δ²/B with B ~ Beta(α/2, 1 - α/2) and a uniform direction.
/// The target-to-proposal density ratio is bounded by
/// (1 - ρ²/δ²)^{α/2} (δ/(δ-ρ))^d, ρ = |x - x0|.
pub fn sample_exit_from_ball<R: Rng + ?Sized>(m: &StableModel, b: &BallSpec, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    m.check_point(x)?;
    let delta = b.radius;
    let rho = b.dist_from_center(x);
    if rho >= delta {
        return Err(Error::Domain("start point must lie inside the ball".into()));
    }
    let beta = Beta::new(m.alpha / 2.0, 1.0 - m.alpha / 2.0).map_err(|e| Error::Sampler(e.to_string()))?;
    let df = m.d as f64;
    let ratio_scale = (1.0 - rho * rho / (delta * delta)).powf(m.alpha / 2.0);
    let bound = ratio_scale * (delta / (delta - rho)).powf(df);
    for _ in 0..EXIT_REJECTION_CAP {
        let bsample: f64 = beta.sample(rng);
        if bsample <= 0.0 {
            continue;
        }
        let radius = delta / bsample.sqrt();
        let dir = uniform_direction(m.d, rng);
        let y: Vec<f64> = b.center.iter().zip(&dir).map(|(c, u)| c + radius * u).collect();
        if rho == 0.0 {
            return Ok(y);
        }
        let ratio = ratio_scale * (radius / super::dist(x, &y)).powf(df);
        if rng.random::<f64>() * bound <= ratio {
            return Ok(y);
        }
    }
    Err(Error::Sampler(format!("exit rejection loop exceeded {EXIT_REJECTION_CAP} iterations")))
}

/// P(|X_τ - x0| <= s) for the walk started at the centre of a ball of
/// radius δ, by quadrature of the exit density. With u = (ρ² - δ²)^{1-α/2}
/// the integrand becomes smooth:
///   F(s) = |S^{d-1}| C δ^α / (2 - α) ∫_0^{(s²-δ²)^{1-α/2}} du / (δ² + u^{2/(2-α)}).
pub fn exit_radius_cdf_centered(m: &StableModel, delta: f64, s: f64) -> Result<f64> {
    if s <= delta {
        return Ok(0.0);
    }
    let p = 2.0 / (2.0 - m.alpha);
    let top = (s * s - delta * delta).powf(1.0 - m.alpha / 2.0);
    let k = m.sphere_area() * m.c_poisson * delta.powf(m.alpha) / (2.0 - m.alpha);
    let f = |u: f64| 1.0 / (delta * delta + u.powf(p));
    let v = quad::integrate(f, 0.0, top, 1e-14, 1e-11)?;
    Ok((k * v.value).min(1.0))
}
