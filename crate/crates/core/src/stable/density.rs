//! Transition density of the isotropic α-stable process.
//!
//! p(t, x) = t^{-d/α} g_d(|x| t^{-1/α}), where g_d is the radial profile at
//! t = 1. For α = 1 the profile is the multivariate Cauchy density. Otherwise
//! the one-dimensional profile g_1 is evaluated from Zolotarev's
//! non-oscillatory integral over (0, π/2). Higher dimensions reuse g_1:
//!   d = 3:  g_3(r) = -g_1'(r) / (2π r)
//!   d = 2:  g_2(r) = -(1/π) ∫_0^∞ g_1'(r cosh u) du   (inverse Abel transform)
//! since g_1 is the one-dimensional marginal of every g_d.
//! Near r = 0 the even Taylor series of g_1 is used when it converges.

use super::{norm, StableModel};
use crate::error::{Error, Result};
use crate::quad;
use libm::{lgamma, tgamma};
use std::f64::consts::{FRAC_PI_2, PI};

const REL_TOL: f64 = 1e-8;

pub fn transition_density(m: &StableModel, t: f64, x: &[f64]) -> Result<f64> {
    m.check_point(x)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let scale = t.powf(1.0 / m.alpha);
    let r = norm(x) / scale;
    let g = radial_profile(m.d, m.alpha, r)?;
    Ok(g * scale.powi(-(m.d as i32)))
}

fn radial_profile(d: usize, alpha: f64, r: f64) -> Result<f64> {
    if alpha == 1.0 {
        let df = d as f64;
        return Ok(tgamma((df + 1.0) / 2.0) * PI.powf(-(df + 1.0) / 2.0) * (1.0 + r * r).powf(-(df + 1.0) / 2.0));
    }
    if r == 0.0 {
        return Ok(profile_at_origin(d, alpha));
    }
    match d {
        1 => g1(alpha, r),
        2 => {
            let f = |u: f64| -g1_prime(alpha, r * u.cosh()).unwrap_or(f64::NAN);
            let v = quad::integrate_to_infinity(f, 0.0, 1e-300, REL_TOL)?;
            Ok(v.value / PI)
        }
        3 => {
            if let Some(s) = series_d3(alpha, r) {
                return Ok(s);
            }
            Ok(-g1_prime(alpha, r)? / (2.0 * PI * r))
        }
        _ => Err(Error::Config(format!("transition density implemented for d <= 3, got d = {d}"))),
    }
}

/// g_d(0) = (2π)^{-d} |S^{d-1}| Γ(d/α) / α.
fn profile_at_origin(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    let sphere = 2.0 * PI.powf(df / 2.0) / tgamma(df / 2.0);
    (2.0 * PI).powf(-df) * sphere * tgamma(df / alpha) / alpha
}

/// Sum of a Taylor series given by its log-magnitudes and signs; `None` if
/// the terms have not decayed below 1e-17 of the sum within 60 terms or start
/// increasing.
fn sum_series<F: Fn(usize) -> (f64, f64)>(term: F, k0: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for k in k0..k0 + 60 {
        let (log_mag, sign) = term(k);
        let mag = log_mag.exp();
        if mag > prev {
            return None;
        }
        sum += sign * mag;
        if mag <= 1e-17 * sum.abs() {
            return Some(sum);
        }
        prev = mag;
    }
    None
}

/// g_1(x) = (1/(πα)) Σ_k (-1)^k Γ((2k+1)/α) x^{2k} / (2k)!
fn series_g1(alpha: f64, x: f64) -> Option<f64> {
    let lx = x.ln();
    sum_series(
        |k| {
            let kf = k as f64;
            let lm = lgamma((2.0 * kf + 1.0) / alpha) + 2.0 * kf * lx - lgamma(2.0 * kf + 1.0);
            (lm, if k % 2 == 0 { 1.0 } else { -1.0 })
        },
        0,
    )
    .map(|s| s / (PI * alpha))
}

/// g_1'(x) = (1/(πα)) Σ_{k>=1} (-1)^k Γ((2k+1)/α) x^{2k-1} / (2k-1)!
fn series_g1_prime(alpha: f64, x: f64) -> Option<f64> {
    let lx = x.ln();
    sum_series(
        |k| {
            let kf = k as f64;
            let lm = lgamma((2.0 * kf + 1.0) / alpha) + (2.0 * kf - 1.0) * lx - lgamma(2.0 * kf);
            (lm, if k % 2 == 0 { 1.0 } else { -1.0 })
        },
        1,
    )
    .map(|s| s / (PI * alpha))
}

/// -g_1'(x) / (2πx) = (1/(2π²α)) Σ_{k>=1} (-1)^{k+1} Γ((2k+1)/α) x^{2k-2} / (2k-1)!
fn series_d3(alpha: f64, x: f64) -> Option<f64> {
    let lx = x.ln();
    sum_series(
        |k| {
            let kf = k as f64;
            let lm = lgamma((2.0 * kf + 1.0) / alpha) + (2.0 * kf - 2.0) * lx - lgamma(2.0 * kf);
            (lm, if k % 2 == 1 { 1.0 } else { -1.0 })
        },
        1,
    )
    .map(|s| s / (2.0 * PI * PI * alpha))
}

/// Zolotarev's V for the symmetric law in log form, taking both θ and
/// φ = π/2 - θ so that neither end of the interval loses precision.
fn ln_v(alpha: f64, theta: f64, phi: f64) -> f64 {
    let a = alpha / (alpha - 1.0);
    let lc = phi.sin().ln();
    a * (lc - (alpha * theta).sin().ln()) + ((alpha - 1.0) * theta).cos().ln() - lc
}

/// ∫_0^{π/2} V^k exp(-z V) dθ for k = 1, 2, with z = x^{α/(α-1)}.
///
/// Integrated as two halves: θ ∈ (0, π/4] in θ and θ ∈ [π/4, π/2) in φ.
/// Each half is split where zV = 1 if that point falls inside it.
fn zolotarev_integrals(alpha: f64, ln_z: f64, want_second: bool) -> Result<(f64, f64)> {
    const QUARTER: f64 = std::f64::consts::FRAC_PI_4;
    let term = move |k: f64, lv: f64| {
        let e = k * lv - (ln_z + lv).exp();
        if e < -745.0 || e.is_nan() {
            0.0
        } else {
            e.exp()
        }
    };
    // V increases in θ for α < 1 and decreases for α > 1
    let increasing = alpha < 1.0;
    let target = -ln_z;
    let split_in = |lv_at: &dyn Fn(f64) -> f64, grows: bool| -> Option<f64> {
        let (mut lo, mut hi) = (0.0f64, QUARTER);
        let f_lo = lv_at(1e-300) - target;
        let f_hi = lv_at(QUARTER) - target;
        if f_lo.signum() == f_hi.signum() {
            return None;
        }
        for _ in 0..120 {
            let mid = 0.5 * (lo + hi);
            if (lv_at(mid) > target) == grows {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    let lv_theta = |t: f64| ln_v(alpha, t, FRAC_PI_2 - t);
    let lv_phi = |p: f64| ln_v(alpha, FRAC_PI_2 - p, p);
    let breaks = |split: Option<f64>| match split {
        Some(s) if s > 0.0 && s < QUARTER => vec![0.0, s, QUARTER],
        _ => vec![0.0, QUARTER],
    };
    let b_theta = breaks(split_in(&lv_theta, increasing));
    let b_phi = breaks(split_in(&lv_phi, !increasing));
    let half = |k: f64| -> Result<f64> {
        let i_theta = quad::integrate_with_breaks(|t| if t <= 0.0 { 0.0 } else { term(k, lv_theta(t)) }, &b_theta, 1e-300, 1e-12)?;
        let i_phi = quad::integrate_with_breaks(|p| if p <= 0.0 { 0.0 } else { term(k, lv_phi(p)) }, &b_phi, 1e-300, 1e-12)?;
        Ok(i_theta.value + i_phi.value)
    };
    let i1 = half(1.0)?;
    let i2 = if want_second { half(2.0)? } else { 0.0 };
    Ok((i1, i2))
}

/// Large-x series g_1(x) = (1/π) Σ_{k>=1} (-1)^{k+1} Γ(kα+1)/k! sin(kπα/2) x^{-kα-1}
/// (convergent for α < 1, asymptotic for α > 1).
fn tail_series_g1(alpha: f64, x: f64, derivative: bool) -> Option<f64> {
    let lx = x.ln();
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..80 {
        let kf = k as f64;
        let s = (kf * PI * alpha / 2.0).sin();
        let mut lm = lgamma(kf * alpha + 1.0) - lgamma(kf + 1.0) - (kf * alpha + 1.0) * lx;
        let mut sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        if derivative {
            lm += (kf * alpha + 1.0).ln() - lx;
            sign = -sign;
        }
        let mag = lm.exp();
        if mag > prev {
            return None;
        }
        sum += sign * s * mag;
        if mag <= 1e-17 * sum.abs() {
            return Some(sum / PI);
        }
        prev = mag;
    }
    None
}

fn g1(alpha: f64, x: f64) -> Result<f64> {
    let x = x.abs();
    if let Some(s) = series_g1(alpha, x) {
        return Ok(s);
    }
    if let Some(s) = tail_series_g1(alpha, x, false) {
        return Ok(s);
    }
    let a = alpha / (alpha - 1.0);
    let ln_z = a * x.ln();
    let (i1, _) = zolotarev_integrals(alpha, ln_z, false)?;
    Ok(alpha / (PI * (alpha - 1.0).abs()) * x.powf(1.0 / (alpha - 1.0)) * i1)
}

fn g1_prime(alpha: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if let Some(s) = series_g1_prime(alpha, x) {
        return Ok(s);
    }
    if let Some(s) = tail_series_g1(alpha, x, true) {
        return Ok(s);
    }
    let a = alpha / (alpha - 1.0);
    let b = 1.0 / (alpha - 1.0);
    let ln_z = a * x.ln();
    let (i1, i2) = zolotarev_integrals(alpha, ln_z, true)?;
    let k = alpha / (PI * (alpha - 1.0).abs());
    Ok(k * x.powf(b) * (b / x * i1 - a * (ln_z - x.ln()).exp() * i2))
}

/// Smallest C with C^{-1} b <= p <= C b, b = min(t/|x|^{d+α}, t^{-d/α}),
/// over the given (t, x) samples.
pub fn density_sandwich_check(m: &StableModel, samples: &[(f64, Vec<f64>)]) -> Result<f64> {
    let mut c: f64 = 1.0;
    for (t, x) in samples {
        let p = transition_density(m, *t, x)?;
        let r = norm(x);
        let df = m.d as f64;
        let far = if r > 0.0 { t / r.powf(df + m.alpha) } else { f64::INFINITY };
        let bound = far.min(t.powf(-df / m.alpha));
        c = c.max(p / bound).max(bound / p);
    }
    Ok(c)
}
