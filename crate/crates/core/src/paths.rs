//! Time-discretized stable paths and Monte Carlo Feynman-Kac functionals.
//!
//! Every replica `i` draws from its own stream `seed.split(i)`, and replicas
//! are reduced in fixed blocks merged pairwise, so results do not depend on
//! the number of worker threads. Functionals of several potentials computed
//! in one call share paths (common random numbers).

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::rng::SeedState;
use crate::stable::{sample_increment_into, transition_density, BallSpec, StableModel};
use crate::stats::{merge_pairwise, Accumulator, MCEstimate};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    /// Base time step.
    pub h: f64,
    pub horizon: f64,
    pub replicas: usize,
    /// Smoothing radius of the kernel estimator.
    pub epsilon: f64,
    /// Potential values are capped at this level when set.
    pub truncation: Option<f64>,
    /// When set, the step at X_k is min(h, θ / q(X_k)). Increments stay exact.
    pub adaptive: Option<f64>,
    /// With an adaptive step, also require dt · q(y) ≤ θ at the probe points
    /// y = X_k ± κ dt^{1/α} e_i and X_k (1 + κ dt^{1/α} / |X_k|), so a step
    /// cannot carry the path unseen into a nearby region of much larger q.
    /// Zero disables the lookahead.
    pub lookahead: f64,
    /// Paths whose weight drops below this level are stopped and count as killed.
    pub weight_floor: f64,
    /// Hard cap on steps for exit-type functionals.
    pub max_steps: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            h: 1e-3,
            horizon: 1.0,
            replicas: 10_000,
            epsilon: 0.05,
            truncation: None,
            adaptive: None,
            lookahead: 0.0,
            weight_floor: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.h > 0.0) {
            bad.push(format!("h must be positive, got {}", self.h));
        }
        if !(self.horizon > 0.0) || self.h > self.horizon {
            bad.push(format!("need 0 < h <= horizon, got h = {}, horizon = {}", self.h, self.horizon));
        }
        if self.replicas == 0 {
            bad.push("replicas must be at least 1".into());
        }
        if !(self.epsilon > 0.0) {
            bad.push(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if let Some(c) = self.truncation {
            if !(c > 0.0) {
                bad.push(format!("truncation cap must be positive, got {c}"));
            }
        }
        if let Some(t) = self.adaptive {
            if !(t > 0.0) {
                bad.push(format!("adaptive step factor must be positive, got {t}"));
            }
        }
        if !(self.lookahead >= 0.0) {
            bad.push(format!("lookahead must be nonnegative, got {}", self.lookahead));
        }
        if !(self.weight_floor >= 0.0 && self.weight_floor < 1.0) {
            bad.push(format!("weight floor must lie in [0,1), got {}", self.weight_floor));
        }
        if self.max_steps == 0 {
            bad.push("max_steps must be at least 1".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    fn q_at(&self, q: &Potential, x: &[f64]) -> f64 {
        let v = q.value(x);
        match self.truncation {
            Some(c) => v.min(c),
            None => v,
        }
    }

    fn step(&self, m: &StableModel, qs: &[&Potential], pos: &[f64], qmax: f64, remaining: f64, probe: &mut [f64]) -> f64 {
        let mut dt = self.h.min(remaining);
        let Some(theta) = self.adaptive else {
            return dt;
        };
        if qmax > 0.0 {
            dt = dt.min(theta / qmax);
        }
        if self.lookahead > 0.0 {
            let r = crate::stable::norm(pos);
            for _ in 0..64 {
                let rho = self.lookahead * dt.powf(1.0 / m.alpha);
                let mut qn = qmax;
                let mut look = |probe: &[f64]| {
                    for q in qs {
                        qn = qn.max(self.q_at(q, probe));
                    }
                };
                for i in 0..pos.len() {
                    for sign in [-1.0, 1.0] {
                        probe.copy_from_slice(pos);
                        probe[i] += sign * rho;
                        look(probe);
                    }
                }
                if r > 0.0 {
                    probe.iter_mut().zip(pos).for_each(|(p, x)| *p = x * (1.0 + rho / r));
                    look(probe);
                }
                if dt * qn <= theta * (1.0 + 1e-12) {
                    break;
                }
                dt = (theta / qn).min(0.5 * dt);
            }
        }
        dt
    }
}

/// Runs `cfg.replicas` replicas, each writing `width` values, and returns
/// one accumulator per value slot.
fn run_replicas<F>(n: usize, seed: &SeedState, width: usize, f: F) -> Vec<Accumulator>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<Vec<Accumulator>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut accs = vec![Accumulator::default(); width];
            let mut vals = vec![0.0; width];
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let mut rng = seed.split(i as u64).rng();
                vals.iter_mut().for_each(|v| *v = 0.0);
                f(&mut rng, &mut vals);
                accs.iter_mut().zip(&vals).for_each(|(a, &v)| a.push(v));
            }
            accs
        })
        .collect();
    (0..width).map(|j| merge_pairwise(parts.iter().map(|p| p[j]).collect())).collect()
}

fn check_start(m: &StableModel, x: &[f64]) -> Result<()> {
    if x.len() != m.d {
        return Err(Error::Domain(format!("point has dimension {}, model has {}", x.len(), m.d)));
    }
    Ok(())
}

/// Positions at times 0, h, 2h, ..., T; the last step is shortened when T
/// is not a multiple of h.
pub fn simulate_path(m: &StableModel, x0: &[f64], cfg: &PathConfig, seed: &SeedState) -> Result<Vec<(f64, Vec<f64>)>> {
    cfg.validate()?;
    check_start(m, x0)?;
    let mut rng = seed.rng();
    let mut pos = x0.to_vec();
    let mut inc = vec![0.0; m.d];
    let mut out = vec![(0.0, pos.clone())];
    let n = (cfg.horizon / cfg.h - 1e-9).ceil() as usize;
    for k in 1..=n {
        let t = (k as f64 * cfg.h).min(cfg.horizon);
        let dt = t - out[k - 1].0;
        sample_increment_into(m, dt, &mut rng, &mut inc);
        pos.iter_mut().zip(&inc).for_each(|(p, d)| *p += d);
        out.push((t, pos.clone()));
    }
    Ok(out)
}

/// exp(-Σ (t_{k+1} - t_k) q(X_{t_k})): left-endpoint quadrature over the
/// steps of the path, with q capped at `cap` when given.
pub fn feynman_kac_weight(path: &[(f64, Vec<f64>)], q: &Potential, cap: Option<f64>) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::Domain("empty path".into()));
    }
    let s: f64 = path
        .windows(2)
        .map(|w| {
            let v = q.value(&w[0].1);
            (w[1].0 - w[0].0) * cap.map_or(v, |c| v.min(c))
        })
        .sum();
    Ok((-s).exp())
}

/// One replica up to time t for several potentials. Writes the weights
/// e_q(t) (zero when absorbed or below the floor) into `w` and returns the
/// end point, or `None` when every weight was stopped early.
#[allow(clippy::too_many_arguments)]
fn run_to_horizon(
    m: &StableModel,
    qs: &[&Potential],
    x: &[f64],
    t: f64,
    cfg: &PathConfig,
    absorb_radius: Option<f64>,
    rng: &mut ChaCha8Rng,
    w: &mut [f64],
) -> Option<Vec<f64>> {
    let mut pos = x.to_vec();
    let mut inc = vec![0.0; m.d];
    let mut probe = vec![0.0; m.d];
    let mut qv = vec![0.0; qs.len()];
    let mut log_w = vec![0.0; qs.len()];
    let mut now = 0.0;
    let floor_log = if cfg.weight_floor > 0.0 { cfg.weight_floor.ln() } else { f64::NEG_INFINITY };
    let eps_t = 1e-12 * t;
    while t - now > eps_t {
        if let Some(r) = absorb_radius {
            if crate::stable::norm(&pos) <= r {
                w.iter_mut().for_each(|v| *v = 0.0);
                return None;
            }
        }
        let mut qmax: f64 = 0.0;
        for (j, q) in qs.iter().enumerate() {
            qv[j] = cfg.q_at(q, &pos);
            qmax = qmax.max(qv[j]);
        }
        let dt = cfg.step(m, qs, &pos, qmax, t - now, &mut probe);
        for j in 0..qs.len() {
            log_w[j] -= dt * qv[j];
        }
        if log_w.iter().all(|&l| l < floor_log) {
            w.iter_mut().for_each(|v| *v = 0.0);
            return None;
        }
        sample_increment_into(m, dt, rng, &mut inc);
        pos.iter_mut().zip(&inc).for_each(|(p, d)| *p += d);
        now += dt;
    }
    if let Some(r) = absorb_radius {
        if crate::stable::norm(&pos) <= r {
            w.iter_mut().for_each(|v| *v = 0.0);
            return None;
        }
    }
    for j in 0..qs.len() {
        w[j] = if log_w[j] < floor_log { 0.0 } else { log_w[j].exp() };
    }
    Some(pos)
}

fn check_time(t: f64, cfg: &PathConfig) -> Result<()> {
    cfg.validate()?;
    if !(t > 0.0) || t > cfg.horizon * (1.0 + 1e-12) {
        return Err(Error::Config(format!("need 0 < t <= horizon, got t = {t}, horizon = {}", cfg.horizon)));
    }
    Ok(())
}

/// E^x e_q(t) for each potential, on shared paths.
pub fn estimate_semigroup_mass_multi(
    m: &StableModel,
    qs: &[&Potential],
    x: &[f64],
    t: f64,
    cfg: &PathConfig,
    seed: u64,
) -> Result<Vec<MCEstimate>> {
    check_time(t, cfg)?;
    check_start(m, x)?;
    let s = SeedState::new(seed);
    let accs = run_replicas(cfg.replicas, &s, qs.len(), |rng, out| {
        run_to_horizon(m, qs, x, t, cfg, None, rng, out);
    });
    Ok(accs.iter().map(|a| a.estimate(seed)).collect())
}

/// E^x e_q(t), the semigroup applied to the constant 1.
pub fn estimate_semigroup_mass(m: &StableModel, q: &Potential, x: &[f64], t: f64, cfg: &PathConfig, seed: u64) -> Result<MCEstimate> {
    Ok(estimate_semigroup_mass_multi(m, &[q], x, t, cfg, seed)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelEstimate {
    pub estimate: MCEstimate,
    pub epsilon: f64,
    pub hits: u64,
    /// Set when no path ended in B(y, ε).
    pub low_statistics: bool,
}

/// Radius for which the free kernel puts about 100 expected end points of
/// `replicas` paths in B(y, ε).
pub fn default_epsilon(m: &StableModel, x: &[f64], y: &[f64], t: f64, replicas: usize) -> Result<f64> {
    let z: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let p = transition_density(m, t, &z)?;
    let vol = 100.0 / (replicas as f64 * p);
    Ok((vol / m.ball_volume(1.0)).powf(1.0 / m.d as f64))
}

/// Kernel u(t,x,y) smoothed over B(y, ε):
/// E^x[e_q(t); |X_t - y| < ε] / |B(y, ε)|. The smoothing bias is
/// O(ε²) for a kernel that is smooth in y.
pub fn estimate_kernel(
    m: &StableModel,
    q: &Potential,
    x: &[f64],
    y: &[f64],
    t: f64,
    cfg: &PathConfig,
    seed: u64,
) -> Result<KernelEstimate> {
    check_time(t, cfg)?;
    check_start(m, x)?;
    check_start(m, y)?;
    let vol = m.ball_volume(cfg.epsilon);
    let s = SeedState::new(seed);
    let eps = cfg.epsilon;
    let accs = run_replicas(cfg.replicas, &s, 2, |rng, out| {
        let mut w = [0.0];
        if let Some(end) = run_to_horizon(m, &[q], x, t, cfg, None, rng, &mut w) {
            if crate::stable::dist(&end, y) < eps {
                out[0] = w[0] / vol;
                out[1] = 1.0;
            }
        }
    });
    let hits = (accs[1].mean() * accs[1].count() as f64).round() as u64;
    Ok(KernelEstimate { estimate: accs[0].estimate(seed), epsilon: eps, hits, low_statistics: hits == 0 })
}

/// Green mass and gauge of one potential on a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitFunctionals {
    /// E^x ∫_0^τ e_q(t) dt.
    pub green: MCEstimate,
    /// E^x e_q(τ).
    pub gauge: MCEstimate,
    /// Paths that had not left the ball after `max_steps`; their partial
    /// sums are kept, so `green` is then a lower bound.
    pub truncated: u64,
}

/// Exit functionals of several potentials on shared paths. The exit time
/// τ is the first grid time outside the ball. Between grid times q is
/// frozen at the left end point and e_q integrated exactly.
pub fn estimate_exit_functionals(
    m: &StableModel,
    qs: &[&Potential],
    b: &BallSpec,
    x: &[f64],
    cfg: &PathConfig,
    seed: u64,
) -> Result<Vec<ExitFunctionals>> {
    cfg.validate()?;
    check_start(m, x)?;
    if b.center.len() != m.d || !b.contains(x) {
        return Err(Error::Domain("start point must lie inside the ball".into()));
    }
    let k = qs.len();
    let s = SeedState::new(seed);
    let floor_log = if cfg.weight_floor > 0.0 { cfg.weight_floor.ln() } else { f64::NEG_INFINITY };
    let accs = run_replicas(cfg.replicas, &s, 2 * k + 1, |rng, out| {
        let mut pos = x.to_vec();
        let mut inc = vec![0.0; m.d];
        let mut probe = vec![0.0; m.d];
        let mut qv = vec![0.0; k];
        let mut log_w = vec![0.0; k];
        let mut steps = 0usize;
        loop {
            if !b.contains(&pos) {
                for j in 0..k {
                    out[k + j] = if log_w[j] < floor_log { 0.0 } else { log_w[j].exp() };
                }
                return;
            }
            if steps == cfg.max_steps {
                out[2 * k] = 1.0;
                return;
            }
            let mut qmax: f64 = 0.0;
            for (j, q) in qs.iter().enumerate() {
                qv[j] = cfg.q_at(q, &pos);
                qmax = qmax.max(qv[j]);
            }
            let dt = cfg.step(m, qs, &pos, qmax, f64::INFINITY, &mut probe);
            let mut alive = false;
            for j in 0..k {
                if log_w[j] < floor_log {
                    continue;
                }
                let w = log_w[j].exp();
                let a = dt * qv[j];
                // ∫_0^dt e^{-q s} ds = dt (1 - e^{-a}) / a
                out[j] += if a > 1e-8 { w * dt * (-(-a).exp_m1()) / a } else { w * dt * (1.0 - 0.5 * a) };
                log_w[j] -= a;
                alive |= log_w[j] >= floor_log;
            }
            if !alive {
                return;
            }
            sample_increment_into(m, dt, rng, &mut inc);
            pos.iter_mut().zip(&inc).for_each(|(p, d)| *p += d);
            steps += 1;
        }
    });
    let truncated = (accs[2 * k].mean() * accs[2 * k].count() as f64).round() as u64;
    Ok((0..k).map(|j| ExitFunctionals { green: accs[j].estimate(seed), gauge: accs[k + j].estimate(seed), truncated }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitEstimate {
    pub estimate: MCEstimate,
    pub truncated: u64,
}

/// E^x ∫_0^{τ_D} e_q(t) dt for D = b.
pub fn estimate_green_mass(m: &StableModel, q: &Potential, b: &BallSpec, x: &[f64], cfg: &PathConfig, seed: u64) -> Result<ExitEstimate> {
    let f = estimate_exit_functionals(m, &[q], b, x, cfg, seed)?[0];
    Ok(ExitEstimate { estimate: f.green, truncated: f.truncated })
}

/// E^x e_q(τ_D) for D = b.
pub fn estimate_gauge(m: &StableModel, q: &Potential, b: &BallSpec, x: &[f64], cfg: &PathConfig, seed: u64) -> Result<ExitEstimate> {
    let f = estimate_exit_functionals(m, &[q], b, x, cfg, seed)?[0];
    Ok(ExitEstimate { estimate: f.gauge, truncated: f.truncated })
}

/// E^x[e_q(t); X stays outside the closed ball B̄(0,r) at all grid times
/// up to t], for several potentials on shared paths.
pub fn estimate_exterior_survival_multi(
    m: &StableModel,
    qs: &[&Potential],
    r: f64,
    x: &[f64],
    t: f64,
    cfg: &PathConfig,
    seed: u64,
) -> Result<Vec<MCEstimate>> {
    check_time(t, cfg)?;
    check_start(m, x)?;
    if !(crate::stable::norm(x) > r) {
        return Err(Error::Domain(format!("start point must satisfy |x| > {r}")));
    }
    let s = SeedState::new(seed);
    let accs = run_replicas(cfg.replicas, &s, qs.len(), |rng, out| {
        run_to_horizon(m, qs, x, t, cfg, Some(r), rng, out);
    });
    Ok(accs.iter().map(|a| a.estimate(seed)).collect())
}

pub fn estimate_exterior_survival(
    m: &StableModel,
    q: &Potential,
    r: f64,
    x: &[f64],
    t: f64,
    cfg: &PathConfig,
    seed: u64,
) -> Result<MCEstimate> {
    Ok(estimate_exterior_survival_multi(m, &[q], r, x, t, cfg, seed)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBoundedEstimate {
    /// `stderr` already includes `tail_bound`.
    pub estimate: MCEstimate,
    pub tail_bound: f64,
}

/// E^x ∫_0^∞ e_q(t) dt truncated at `cfg.horizon`. The neglected tail is
/// bounded by e^{-horizon} when q ≥ 1 along the path; q is required to be
/// at least 1 at the probe radii 10, 10², 10³.
pub fn estimate_resolvent_mass(
    m: &StableModel,
    q: &Potential,
    x: &[f64],
    cfg: &PathConfig,
    tail_tol: f64,
    seed: u64,
) -> Result<TailBoundedEstimate> {
    cfg.validate()?;
    check_start(m, x)?;
    for r in [10.0, 100.0, 1000.0] {
        for axis in 0..m.d {
            let mut p = vec![0.0; m.d];
            p[axis] = r;
            if cfg.q_at(q, &p) < 1.0 {
                return Err(Error::Config(format!("q must be at least 1 far out, q = {} at |x| = {r}", q.value(&p))));
            }
        }
    }
    let tail_bound = (-cfg.horizon).exp();
    if tail_bound > tail_tol {
        return Err(Error::Config(format!("tail bound e^-T = {tail_bound:e} exceeds tolerance {tail_tol:e}; raise the horizon")));
    }
    let s = SeedState::new(seed);
    let floor_log = if cfg.weight_floor > 0.0 { cfg.weight_floor.ln() } else { f64::NEG_INFINITY };
    let t_end = cfg.horizon;
    let accs = run_replicas(cfg.replicas, &s, 1, |rng, out| {
        let mut pos = x.to_vec();
        let mut inc = vec![0.0; m.d];
        let mut probe = vec![0.0; m.d];
        let mut log_w = 0.0;
        let mut now = 0.0;
        while t_end - now > 1e-12 * t_end && log_w >= floor_log {
            let qk = cfg.q_at(q, &pos);
            let dt = cfg.step(m, &[q], &pos, qk, t_end - now, &mut probe);
            let a = dt * qk;
            let w = log_w.exp();
            out[0] += if a > 1e-8 { w * dt * (-(-a).exp_m1()) / a } else { w * dt * (1.0 - 0.5 * a) };
            log_w -= a;
            sample_increment_into(m, dt, rng, &mut inc);
            pos.iter_mut().zip(&inc).for_each(|(p, d)| *p += d);
            now += dt;
        }
    });
    let mut estimate = accs[0].estimate(seed);
    estimate.stderr += tail_bound;
    Ok(TailBoundedEstimate { estimate, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{make_const, make_power};
    use crate::stable::mean_exit_time_ball;
    use crate::stats::{chi_square, chi_square_critical_1pct};
    use std::f64::consts::PI;

    fn cfg(h: f64, horizon: f64, n: usize) -> PathConfig {
        PathConfig { h, horizon, replicas: n, ..PathConfig::default() }
    }

    #[test]
    fn weight_arithmetic() {
        let q = make_power(1.0).unwrap();
        let path = vec![(0.0, vec![0.0]), (0.5, vec![3.0]), (1.0, vec![-7.0])];
        assert!((feynman_kac_weight(&path, &q, None).unwrap() - (-1.5f64).exp()).abs() < 1e-15);
        assert!((feynman_kac_weight(&path, &q, Some(1.0)).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(feynman_kac_weight(&path, &make_const(0.0).unwrap(), None).unwrap(), 1.0);
        let m = StableModel::new(1, 1.0).unwrap();
        let p = simulate_path(&m, &[0.2], &cfg(0.1, 2.0, 1), &SeedState::new(4)).unwrap();
        assert_eq!(p[0], (0.0, vec![0.2]));
        assert_eq!(p.len(), 21);
        assert!((p[20].0 - 2.0).abs() < 1e-12);
        let w = feynman_kac_weight(&p, &make_const(1.5).unwrap(), None).unwrap();
        assert!((w - (-3.0f64).exp()).abs() < 1e-12);
        assert!(feynman_kac_weight(&[], &q, None).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(PathConfig::default().validate().is_ok());
        assert!(cfg(2.0, 1.0, 10).validate().is_err());
        assert!(cfg(0.1, 1.0, 0).validate().is_err());
        assert!(PathConfig { epsilon: 0.0, ..PathConfig::default() }.validate().is_err());
    }

    #[test]
    fn terminal_law_matches_cauchy_density() {
        let m = StableModel::new(1, 1.0).unwrap();
        let c = cfg(0.05, 1.0, 1);
        let edges: Vec<f64> = (0..=20).map(|i| -5.0 + 0.5 * i as f64).collect();
        let cdf = |x: f64| 0.5 + x.atan() / PI;
        let n = 20_000;
        let mut obs = vec![0u64; 22];
        for i in 0..n {
            let p = simulate_path(&m, &[0.0], &c, &SeedState::new(8).split(i)).unwrap();
            let x = p.last().unwrap().1[0];
            let k = edges.partition_point(|&e| e <= x);
            obs[k] += 1;
        }
        let mut expected = vec![cdf(edges[0]) * n as f64];
        for w in edges.windows(2) {
            expected.push((cdf(w[1]) - cdf(w[0])) * n as f64);
        }
        expected.push((1.0 - cdf(edges[20])) * n as f64);
        let chi = chi_square(&obs, &expected);
        assert!(chi < chi_square_critical_1pct(21), "chi {chi}");
    }

    #[test]
    fn semigroup_mass_trivial_cases() {
        let m = StableModel::new(1, 1.0).unwrap();
        let c = cfg(0.01, 1.0, 2000);
        let e = estimate_semigroup_mass(&m, &make_const(0.0).unwrap(), &[0.0], 1.0, &c, 1).unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
        let e = estimate_semigroup_mass(&m, &make_const(1.0).unwrap(), &[0.0], 1.0, &c, 1).unwrap();
        assert!((e.mean - (-1f64).exp()).abs() < 1e-12 && e.stderr < 1e-12);
        assert!(estimate_semigroup_mass(&m, &make_const(1.0).unwrap(), &[0.0], 2.0, &c, 1).is_err());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let m = StableModel::new(2, 1.2).unwrap();
        let q = make_power(2.0).unwrap();
        let c = cfg(0.01, 0.5, 1000);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_semigroup_mass(&m, &q, &[0.5, 0.0], 0.5, &c, 77).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn free_kernel_at_origin() {
        let m = StableModel::new(1, 1.0).unwrap();
        let c = PathConfig { epsilon: 0.05, ..cfg(0.05, 1.0, 100_000) };
        let k = estimate_kernel(&m, &make_const(0.0).unwrap(), &[0.0], &[0.0], 1.0, &c, 3).unwrap();
        // smoothing bias ε² p''(0)/6 with p'' = -2/π at t = 1
        let bias = c.epsilon * c.epsilon / (3.0 * PI);
        assert!(k.estimate.agrees_with(1.0 / PI, 3.0, bias), "{k:?}");
        assert!(!k.low_statistics);
        let far = estimate_kernel(&m, &make_const(0.0).unwrap(), &[0.0], &[1e6], 1.0, &cfg(0.5, 1.0, 200), 3).unwrap();
        assert!(far.low_statistics && far.estimate.mean == 0.0);
    }

    #[test]
    fn kernel_symmetry_and_domination() {
        let m = StableModel::new(1, 1.0).unwrap();
        let q = make_power(1.0).unwrap();
        let c = PathConfig { epsilon: 0.1, ..cfg(0.01, 1.0, 40_000) };
        let a = estimate_kernel(&m, &q, &[0.0], &[1.0], 1.0, &c, 5).unwrap().estimate;
        let b = estimate_kernel(&m, &q, &[1.0], &[0.0], 1.0, &c, 6).unwrap().estimate;
        assert!((a.mean - b.mean).abs() <= 3.0 * a.joint_stderr(&b), "{a:?} {b:?}");
        let p = transition_density(&m, 1.0, &[1.0]).unwrap();
        assert!(a.mean <= p + 3.0 * a.stderr);
    }

    #[test]
    fn green_mass_free_and_constant() {
        let m = StableModel::new(1, 1.0).unwrap();
        let b = BallSpec::centered(1, 1.0).unwrap();
        let c = cfg(1e-3, 1.0, 20_000);
        let zero = make_const(0.0).unwrap();
        let big = make_const(50.0).unwrap();
        let f = estimate_exit_functionals(&m, &[&zero, &big], &b, &[0.0], &c, 9).unwrap();
        let exact = mean_exit_time_ball(&m, &b, &[0.0]).unwrap();
        // grid-time exit detection overshoots by about h/2 plus missed excursions
        assert!(f[0].green.agrees_with(exact, 3.0, 0.01), "{:?}", f[0]);
        assert_eq!(f[0].gauge.mean, 1.0);
        assert!(f[1].green.mean <= 1.0 / 50.0);
        assert!(f[1].green.mean <= f[0].green.mean && f[1].gauge.mean < 1.0);
        assert_eq!(f[0].truncated, 0);
    }

    #[test]
    fn constant_potential_identity_pathwise() {
        // q ≡ c: green = (1 - gauge) / c on every path, hence in the mean
        let m = StableModel::new(1, 1.5).unwrap();
        let b = BallSpec::centered(1, 1.0).unwrap();
        let q = make_const(3.0).unwrap();
        let f = estimate_exit_functionals(&m, &[&q], &b, &[0.3], &PathConfig { weight_floor: 0.0, ..cfg(1e-2, 1.0, 2000) }, 2).unwrap()[0];
        assert!((f.green.mean - (1.0 - f.gauge.mean) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gauge_decreases_in_intensity() {
        let m = StableModel::new(1, 1.0).unwrap();
        let b = BallSpec::centered(1, 1.0).unwrap();
        let qs: Vec<Potential> = [0.0, 1.0, 10.0].iter().map(|&c| make_const(c).unwrap()).collect();
        let refs: Vec<&Potential> = qs.iter().collect();
        let f = estimate_exit_functionals(&m, &refs, &b, &[0.0], &cfg(1e-2, 1.0, 2000), 4).unwrap();
        assert!(f.windows(2).all(|w| w[1].gauge.mean < w[0].gauge.mean && w[1].green.mean < w[0].green.mean));
        assert!(f[1].gauge.mean > 0.0 && f[1].gauge.mean < 1.0);
    }

    #[test]
    fn truncation_flag() {
        let m = StableModel::new(1, 1.0).unwrap();
        let b = BallSpec::centered(1, 1.0).unwrap();
        let c = PathConfig { max_steps: 3, ..cfg(1e-4, 1.0, 100) };
        let e = estimate_green_mass(&m, &make_const(0.0).unwrap(), &b, &[0.0], &c, 1).unwrap();
        assert!(e.truncated > 50);
        assert!(e.estimate.mean <= 3e-4 + 1e-15);
    }

    #[test]
    fn exterior_survival_bounds_and_monotonicity() {
        let m = StableModel::new(1, 1.0).unwrap();
        let zero = make_const(0.0).unwrap();
        let c = cfg(1e-2, 2.0, 4000);
        let s1 = estimate_exterior_survival(&m, &zero, 1.0, &[2.0], 1.0, &c, 12).unwrap();
        let s2 = estimate_exterior_survival(&m, &zero, 1.0, &[2.0], 2.0, &c, 12).unwrap();
        assert!(s2.mean <= s1.mean && s1.mean < 1.0 && s2.mean > 0.0);
        let one_step = estimate_exterior_survival(&m, &zero, 1.0, &[2.0], 1e-2, &c, 12).unwrap();
        assert!(one_step.mean > 0.99);
        let lam = make_const(2.0).unwrap();
        let s = estimate_exterior_survival(&m, &lam, 1.0, &[2.0], 1.0, &c, 12).unwrap();
        assert!(s.mean <= (-2f64).exp() + 3.0 * s.stderr);
        assert!(estimate_exterior_survival(&m, &zero, 1.0, &[0.5], 1.0, &c, 1).is_err());
    }

    #[test]
    fn resolvent_mass_of_unit_potential() {
        let m = StableModel::new(1, 1.0).unwrap();
        let c = cfg(0.05, 40.0, 50);
        let e = estimate_resolvent_mass(&m, &make_const(1.0).unwrap(), &[0.0], &c, 1e-12, 1).unwrap();
        assert!(e.estimate.agrees_with(1.0, 3.0, 1e-9), "{e:?}");
        assert!(estimate_resolvent_mass(&m, &make_const(1.0).unwrap(), &[0.0], &cfg(0.05, 5.0, 10), 1e-12, 1).is_err());
        assert!(estimate_resolvent_mass(&m, &make_const(0.5).unwrap(), &[0.0], &c, 1e-12, 1).is_err());
    }

    #[test]
    fn adaptive_step_matches_fixed_step_in_law() {
        let m = StableModel::new(1, 1.0).unwrap();
        let q = make_power(2.0).unwrap();
        let fixed = estimate_semigroup_mass(&m, &q, &[1.0], 1.0, &cfg(1e-3, 1.0, 20_000), 30).unwrap();
        let adaptive =
            estimate_semigroup_mass(&m, &q, &[1.0], 1.0, &PathConfig { adaptive: Some(0.02), ..cfg(1e-2, 1.0, 20_000) }, 31).unwrap();
        assert!((fixed.mean - adaptive.mean).abs() <= 3.0 * fixed.joint_stderr(&adaptive) + 5e-3, "{fixed:?} {adaptive:?}");
    }

    #[test]
    fn lookahead_green_mass_matches_grid_solve() {
        // second plateau ball of the counterexample: q jumps from 32 to
        // 1024 inside B(x_2, 1); oracle is the Dirichlet grid solve H v = 1
        use crate::potentials::{make_counterexample, CounterexampleSpec};
        use crate::spectral::{assemble_operator, interpolate, Grid1D};
        let m = StableModel::new(1, 1.0).unwrap();
        let spec = CounterexampleSpec::default_sequence(1.0, 4).unwrap();
        let x = spec.probe_radius(2);
        let sp = spec.clone();
        let local = Potential::custom("shifted", move |y: &[f64]| sp.radial((y[0] + x).abs()));
        let g = Grid1D::new(1.0, 1999).unwrap();
        let op = assemble_operator(&g, 1.0, &local).unwrap();
        let v = op.matrix.clone().cholesky().unwrap().solve(&nalgebra::DVector::from_element(g.n, 1.0));
        let exact = interpolate(&g, v.as_slice(), 0.0);
        let q = make_counterexample(&spec);
        let b = BallSpec::new(vec![x], 1.0).unwrap();
        let c = PathConfig { adaptive: Some(0.05), lookahead: 3.0, ..cfg(1e-3, 1.0, 8000) };
        let e = estimate_green_mass(&m, &q, &b, &[x], &c, 12).unwrap().estimate;
        assert!(e.agrees_with(exact, 3.0, 0.01 * exact), "{e:?} vs {exact}");
    }
}
