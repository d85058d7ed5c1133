//! Pass/fail predicates built from the Monte Carlo and spectral outputs,
//! and the exponent bootstrap schedule.

use crate::error::{Error, Result};
use crate::paths::{estimate_exit_functionals, estimate_exterior_survival_multi, estimate_green_mass, PathConfig};
use crate::potentials::{CounterexampleSpec, Potential};
use crate::spectral::{assemble_operator, ground_state, interpolate, iu_ratio_statistic, modes, Grid1D};
use crate::stable::{BallSpec, StableModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Which side of the threshold passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceRow {
    pub series: String,
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
}

impl EvidenceRow {
    fn new(series: impl Into<String>, x: f64, value: f64, stderr: f64) -> Self {
        EvidenceRow { series: series.into(), x, value, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredicateReport {
    pub name: String,
    /// Everything needed to rerun the predicate, seed included.
    pub inputs: BTreeMap<String, String>,
    pub statistic: f64,
    pub stderr: f64,
    pub threshold: f64,
    pub direction: Direction,
    pub verdict: Verdict,
    pub evidence: Vec<EvidenceRow>,
    pub notes: Vec<String>,
    pub sub_reports: Vec<PredicateReport>,
}

/// Pass iff the statistic is on the passing side; inconclusive when the
/// band statistic ± k·stderr contains the threshold.
pub fn decide(statistic: f64, stderr: f64, threshold: f64, direction: Direction, k: f64) -> Verdict {
    if !statistic.is_finite() {
        return Verdict::Inconclusive;
    }
    if stderr > 0.0 && (statistic - threshold).abs() <= k * stderr {
        return Verdict::Inconclusive;
    }
    let ok = match direction {
        Direction::AtMost => statistic <= threshold,
        Direction::AtLeast => statistic >= threshold,
    };
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

impl PredicateReport {
    fn new(name: &str, inputs: BTreeMap<String, String>, threshold: f64, direction: Direction) -> Self {
        PredicateReport {
            name: name.into(),
            inputs,
            statistic: f64::NAN,
            stderr: 0.0,
            threshold,
            direction,
            verdict: Verdict::Inconclusive,
            evidence: Vec::new(),
            notes: Vec::new(),
            sub_reports: Vec::new(),
        }
    }

    fn settle(&mut self, statistic: f64, stderr: f64, k: f64) {
        self.statistic = statistic;
        self.stderr = stderr;
        self.verdict = decide(statistic, stderr, self.threshold, self.direction, k);
    }

    /// `name,verdict,statistic,stderr,threshold` on one line.
    pub fn verdict_line(&self) -> String {
        format!("{},{},{:.9e},{:.3e},{:.9e}", self.name, self.verdict.as_str(), self.statistic, self.stderr, self.threshold)
    }

    /// Evidence rows of this report and its sub-reports, with header.
    pub fn write_evidence_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "predicate,series,x,value,stderr")?;
        self.write_rows(&mut w)
    }

    fn write_rows<W: Write>(&self, w: &mut W) -> Result<()> {
        for r in &self.evidence {
            writeln!(w, "{},{},{:.12e},{:.12e},{:.6e}", self.name, r.series, r.x, r.value, r.stderr)?;
        }
        for s in &self.sub_reports {
            s.write_rows(w)?;
        }
        Ok(())
    }
}

/// Tunable thresholds and budgets shared by the predicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub paths: PathConfig,
    pub seed: u64,
    /// Verdicts within `band_k` standard errors of the threshold are inconclusive.
    pub band_k: f64,
    pub dispersion_threshold: f64,
    pub comparability_threshold: f64,
    pub slope_slack: f64,
    pub decay_time: f64,
    pub decay_radii: Vec<f64>,
    /// Start point of the exterior functional sits this far outside the ball.
    pub decay_offset: f64,
    pub analytic_radii: Vec<f64>,
    pub analytic_growth: f64,
    pub spectral_half_width: f64,
    pub spectral_nodes: usize,
    pub spectral_time: f64,
    pub spectral_growth_threshold: f64,
    pub spectral_tol: f64,
    pub eigen_tol: f64,
    pub witness_factor: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            paths: PathConfig::default(),
            seed: 1,
            band_k: 2.0,
            dispersion_threshold: 10.0,
            comparability_threshold: 0.5,
            slope_slack: 0.3,
            decay_time: 0.5,
            decay_radii: vec![2.0, 4.0, 8.0],
            decay_offset: 1.0,
            analytic_radii: vec![1e2, 1e3, 1e4],
            analytic_growth: 2.0,
            spectral_half_width: 40.0,
            spectral_nodes: 1200,
            spectral_time: 1.0,
            spectral_growth_threshold: 3.0,
            spectral_tol: 1e-8,
            eigen_tol: 1e-9,
            witness_factor: 2.0,
        }
    }
}

fn snapshot(m: &StableModel, q: &Potential, cfg: &DiagnosticsConfig) -> BTreeMap<String, String> {
    let mut s = BTreeMap::new();
    s.insert("d".into(), m.d.to_string());
    s.insert("alpha".into(), m.alpha.to_string());
    s.insert("potential".into(), q.description().to_string());
    s.insert("seed".into(), cfg.seed.to_string());
    s.insert("replicas".into(), cfg.paths.replicas.to_string());
    s.insert("h".into(), cfg.paths.h.to_string());
    s
}

fn on_axis(d: usize, r: f64) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = r;
    x
}

fn max_min(values: &[(f64, f64)]) -> Option<((f64, f64), (f64, f64))> {
    let mx = values.iter().copied().max_by(|a, b| a.0.total_cmp(&b.0))?;
    let mn = values.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0))?;
    Some((mx, mn))
}

/// Statistic max/min of (value, stderr) pairs with a first-order stderr.
fn spread(values: &[(f64, f64)]) -> (f64, f64) {
    match max_min(values) {
        Some(((a, sa), (b, sb))) if b > 0.0 => {
            let s = a / b;
            (s, s * ((sa / a).powi(2) + (sb / b).powi(2)).sqrt())
        }
        _ => (f64::NAN, f64::NAN),
    }
}

/// φ₁(x)(1+|x|)^{1+α} / v_{B(x,1)}(x) at the probe points, with φ₁ from the
/// grid solver and v by Monte Carlo. Statistic: max/min over the probes.
pub fn check_eigen_envelope(
    m: &StableModel,
    q: &Potential,
    grid: &Grid1D,
    probes: &[f64],
    cfg: &DiagnosticsConfig,
) -> Result<PredicateReport> {
    if m.d != 1 {
        return Err(Error::Config("the envelope check uses the one-dimensional grid solver".into()));
    }
    if probes.is_empty() || probes.iter().any(|x| x.abs() + 1.0 >= grid.half_width) {
        return Err(Error::Config(format!("probes must be nonempty and lie in |x| < L - 1 = {}", grid.half_width - 1.0)));
    }
    let mut inputs = snapshot(m, q, cfg);
    inputs.insert("grid".into(), format!("L={} n={}", grid.half_width, grid.n));
    inputs.insert("probes".into(), format!("{probes:?}"));
    let mut rep = PredicateReport::new("eigen_envelope", inputs, cfg.dispersion_threshold, Direction::AtMost);
    let pair = ground_state(&assemble_operator(grid, m.alpha, q)?, cfg.eigen_tol)?;
    rep.notes.push(format!("lambda1 = {:.9e}", pair.lambda));
    let mut ratios = Vec::new();
    for (i, &x) in probes.iter().enumerate() {
        let b = BallSpec::new(vec![x], 1.0)?;
        let v = estimate_green_mass(m, q, &b, &[x], &cfg.paths, cfg.seed.wrapping_add(i as u64))?;
        let phi = interpolate(grid, &pair.phi, x);
        let r = phi * (1.0 + x.abs()).powf(1.0 + m.alpha) / v.estimate.mean;
        let se = r * v.estimate.stderr / v.estimate.mean;
        rep.evidence.push(EvidenceRow::new("ratio", x, r, se));
        if v.truncated > 0 {
            rep.notes.push(format!("{} paths truncated at x = {x}", v.truncated));
        }
        ratios.push((r, se));
    }
    let (s, se) = spread(&ratios);
    rep.settle(s, se, cfg.band_k);
    Ok(rep)
}

/// u_D/v_D at the probes for q + c over the intensities, on shared paths.
/// Per intensity the band is max/min over the probes; the statistic is the
/// relative variation of the band across intensities.
pub fn check_gauge_green_comparability(
    m: &StableModel,
    q: &Potential,
    b: &BallSpec,
    kappa: f64,
    probes: &[Vec<f64>],
    intensities: &[f64],
    cfg: &DiagnosticsConfig,
) -> Result<PredicateReport> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Config(format!("kappa must lie in (0,1), got {kappa}")));
    }
    if probes.is_empty() || intensities.is_empty() {
        return Err(Error::Config("need at least one probe and one intensity".into()));
    }
    for p in probes {
        if !(b.dist_from_center(p) < kappa * b.radius) {
            return Err(Error::Domain(format!("probe {p:?} lies outside B(x0, kappa r)")));
        }
    }
    let mut inputs = snapshot(m, q, cfg);
    inputs.insert("ball".into(), format!("center={:?} r={}", b.center, b.radius));
    inputs.insert("kappa".into(), kappa.to_string());
    inputs.insert("intensities".into(), format!("{intensities:?}"));
    let mut rep = PredicateReport::new("gauge_green_comparability", inputs, cfg.comparability_threshold, Direction::AtMost);
    let shifted: Vec<Potential> = intensities.iter().map(|&c| q.shifted(c)).collect::<Result<_>>()?;
    let refs: Vec<&Potential> = shifted.iter().collect();
    let mut per_c: Vec<Vec<(f64, f64)>> = vec![Vec::new(); intensities.len()];
    for (i, p) in probes.iter().enumerate() {
        let f = estimate_exit_functionals(m, &refs, b, p, &cfg.paths, cfg.seed.wrapping_add(i as u64))?;
        for (j, e) in f.iter().enumerate() {
            let (u, v) = (e.gauge, e.green);
            let r = u.mean / v.mean;
            let se = r * ((u.stderr / u.mean).powi(2) + (v.stderr / v.mean).powi(2)).sqrt();
            rep.evidence.push(EvidenceRow::new(format!("c={}", intensities[j]), p[0], r, se));
            per_c[j].push((r, se));
        }
    }
    let bands: Vec<(f64, f64)> = per_c.iter().map(|v| spread(v)).collect();
    for (c, (band, se)) in intensities.iter().zip(&bands) {
        rep.evidence.push(EvidenceRow::new("band", *c, *band, *se));
    }
    let all: Vec<(f64, f64)> = per_c.iter().flatten().copied().collect();
    rep.notes.push(format!("overall max/min of u_D/v_D = {:.6}", spread(&all).0));
    let (s, se) = spread(&bands);
    rep.settle(s - 1.0, se, cfg.band_k);
    Ok(rep)
}

/// Weighted least-squares slope of y against x with its standard error.
pub fn weighted_slope(x: &[f64], y: &[f64], sy: &[f64]) -> (f64, f64) {
    let w: Vec<f64> = sy.iter().map(|s| if *s > 0.0 { 1.0 / (s * s) } else { 1e300 }).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(a, b)| a * (b - mx) * (b - mx)).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((a, b), c)| a * (b - mx) * (c - my)).sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

/// Fits log E^x[t < τ_ext; e_q(t)] against log(1+r), x = (r + offset) e₁.
/// Passes when the slope is at most -(d+α) + slack.
pub fn check_condition_iii_decay(
    m: &StableModel,
    q: &Potential,
    radii: &[f64],
    t: f64,
    cfg: &DiagnosticsConfig,
) -> Result<PredicateReport> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(Error::Config("need at least two increasing positive radii".into()));
    }
    let mut inputs = snapshot(m, q, cfg);
    inputs.insert("radii".into(), format!("{radii:?}"));
    inputs.insert("t".into(), t.to_string());
    inputs.insert("offset".into(), cfg.decay_offset.to_string());
    let threshold = -(m.d as f64 + m.alpha) + cfg.slope_slack;
    let mut rep = PredicateReport::new("condition_iii_decay", inputs, threshold, Direction::AtMost);
    if q.value(&on_axis(m.d, radii[0])) < 1.0 {
        rep.notes.push(format!("q < 1 at the smallest radius {}", radii[0]));
    }
    let mut paths = cfg.paths.clone();
    paths.horizon = t;
    paths.h = paths.h.min(t);
    paths.weight_floor = 0.0;
    let (mut lx, mut ly, mut sy) = (Vec::new(), Vec::new(), Vec::new());
    for &r in radii {
        let x = on_axis(m.d, r + cfg.decay_offset);
        let e = estimate_exterior_survival_multi(m, &[q], r, &x, t, &paths, cfg.seed)?[0];
        rep.evidence.push(EvidenceRow::new("survival", r, e.mean, e.stderr));
        if !(e.mean > 0.0) {
            rep.notes.push(format!("no surviving weight at r = {r}"));
            return Ok(rep);
        }
        lx.push(r.ln_1p());
        ly.push(e.mean.ln());
        sy.push(e.stderr / e.mean);
    }
    let (slope, se) = weighted_slope(&lx, &ly, &sy);
    rep.settle(slope, se, cfg.band_k);
    Ok(rep)
}

/// q/log r on the probe radii; passes when it increases strictly and grows
/// by at least `analytic_growth` from the first radius to the last.
fn analytic_growth_check(m: &StableModel, q: &Potential, cfg: &DiagnosticsConfig) -> Result<PredicateReport> {
    let radii = &cfg.analytic_radii;
    if radii.len() < 2 || radii.iter().any(|r| !(*r > 1.0)) {
        return Err(Error::Config("analytic radii must be at least two values above 1".into()));
    }
    let mut inputs = snapshot(m, q, cfg);
    inputs.insert("radii".into(), format!("{radii:?}"));
    let mut rep = PredicateReport::new("q_over_log_growth", inputs, cfg.analytic_growth, Direction::AtLeast);
    let vals: Vec<f64> = radii.iter().map(|&r| q.value(&on_axis(m.d, r)) / r.ln()).collect();
    for (r, v) in radii.iter().zip(&vals) {
        rep.evidence.push(EvidenceRow::new("q_over_log", *r, *v, 0.0));
    }
    let increasing = vals.windows(2).all(|w| w[1] > w[0]);
    let growth = vals[vals.len() - 1] / vals[0];
    rep.settle(growth, 0.0, cfg.band_k);
    if !increasing && rep.verdict == Verdict::Pass {
        rep.verdict = Verdict::Fail;
        rep.notes.push("q/log r is not increasing on the probe radii".into());
    }
    Ok(rep)
}

/// Growth of the spectral ratio sup u/(φ₁⊗φ₁) from window L/8 to L/2.
fn spectral_iu_check(m: &StableModel, q: &Potential, cfg: &DiagnosticsConfig) -> Result<PredicateReport> {
    let grid = Grid1D::new(cfg.spectral_half_width, cfg.spectral_nodes)?;
    let mut inputs = snapshot(m, q, cfg);
    inputs.insert("grid".into(), format!("L={} n={}", grid.half_width, grid.n));
    inputs.insert("t".into(), cfg.spectral_time.to_string());
    let mut rep = PredicateReport::new("spectral_iu_ratio_growth", inputs, cfg.spectral_growth_threshold, Direction::AtMost);
    let md = modes(&assemble_operator(&grid, m.alpha, q)?);
    let l = grid.half_width;
    let mut stats = Vec::new();
    for w in [l / 8.0, l / 4.0, l / 2.0] {
        let s = iu_ratio_statistic(&md, cfg.spectral_time, w, cfg.spectral_tol)?;
        rep.evidence.push(EvidenceRow::new("iu_ratio", w, s, 0.0));
        stats.push(s);
    }
    if stats.windows(2).all(|w| w[1] > w[0]) {
        rep.notes.push("ratio increases over the three windows".into());
    }
    rep.settle(stats[2] / stats[0], 0.0, cfg.band_k);
    Ok(rep)
}

/// Combined IU verdict from the q/log r test, the condition (iii) decay
/// check and, in d = 1, the spectral ratio growth. Disagreeing or
/// inconclusive parts give an inconclusive verdict.
pub fn iu_verdict(m: &StableModel, q: &Potential, cfg: &DiagnosticsConfig) -> Result<PredicateReport> {
    let mut inputs = snapshot(m, q, cfg);
    inputs.insert("growth".into(), format!("{:?}", q.growth()));
    let mut rep = PredicateReport::new("iu_verdict", inputs, 1.0, Direction::AtLeast);
    let tends = match q.growth().tends_to_infinity() {
        Some(v) => v,
        None => {
            let vals: Vec<f64> = cfg.analytic_radii.iter().map(|&r| q.value(&on_axis(m.d, r))).collect();
            vals.windows(2).all(|w| w[1] > w[0])
        }
    };
    if !tends {
        rep.notes.push("precondition failed: q does not tend to infinity, so T_t is not compact and IU is out of scope".into());
        rep.statistic = 0.0;
        return Ok(rep);
    }
    rep.sub_reports.push(analytic_growth_check(m, q, cfg)?);
    rep.sub_reports.push(check_condition_iii_decay(m, q, &cfg.decay_radii, cfg.decay_time, cfg)?);
    if m.d == 1 {
        rep.sub_reports.push(spectral_iu_check(m, q, cfg)?);
    } else {
        rep.notes.push("spectral check skipped: grid solver is one-dimensional".into());
    }
    let verdicts: Vec<Verdict> = rep.sub_reports.iter().map(|r| r.verdict).collect();
    let passes = verdicts.iter().filter(|v| **v == Verdict::Pass).count();
    rep.statistic = passes as f64 / verdicts.len() as f64;
    rep.verdict = if verdicts.iter().all(|v| *v == Verdict::Pass) {
        Verdict::Pass
    } else if verdicts.iter().all(|v| *v == Verdict::Fail) {
        Verdict::Fail
    } else {
        let parts: Vec<String> = rep.sub_reports.iter().map(|r| format!("{}={}", r.name, r.verdict.as_str())).collect();
        rep.notes.push(format!("sub-verdicts disagree: {}", parts.join(", ")));
        Verdict::Inconclusive
    };
    Ok(rep)
}

/// Witness W_n = a_n v_{B(x_n,1)}(x_n) at x_n = probe_radius(n) e₁ for the
/// given n. Statistic: the smallest ratio W_{n+1}/W_n; passes when it is at
/// least `witness_factor`.
pub fn check_counterexample_growth(
    m: &StableModel,
    spec: &CounterexampleSpec,
    ns: &[usize],
    cfg: &DiagnosticsConfig,
) -> Result<PredicateReport> {
    if ns.len() < 2 || ns.iter().any(|&n| n == 0 || n > spec.terms()) || ns.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Config(format!("probe indices must be consecutive within 1..={}", spec.terms())));
    }
    let q = crate::potentials::make_counterexample(spec);
    let mut inputs = snapshot(m, &q, cfg);
    inputs.insert("sequence".into(), format!("{:?}", spec.a));
    inputs.insert("probes".into(), format!("{ns:?}"));
    inputs.insert("adaptive".into(), format!("{:?}", cfg.paths.adaptive));
    inputs.insert("lookahead".into(), cfg.paths.lookahead.to_string());
    let mut rep = PredicateReport::new("counterexample_growth", inputs, cfg.witness_factor, Direction::AtLeast);
    let mut w = Vec::new();
    for &n in ns {
        let x = on_axis(m.d, spec.probe_radius(n));
        let b = BallSpec::new(x.clone(), 1.0)?;
        let v = estimate_green_mass(m, &q, &b, &x, &cfg.paths, cfg.seed.wrapping_add(n as u64))?;
        let a = spec.a[n - 1];
        rep.evidence.push(EvidenceRow::new("witness", n as f64, a * v.estimate.mean, a * v.estimate.stderr));
        w.push((a * v.estimate.mean, a * v.estimate.stderr));
    }
    let mut worst = (f64::INFINITY, 0.0);
    for (i, p) in w.windows(2).enumerate() {
        let r = p[1].0 / p[0].0;
        let se = r * ((p[0].1 / p[0].0).powi(2) + (p[1].1 / p[1].0).powi(2)).sqrt();
        rep.evidence.push(EvidenceRow::new("ratio", ns[i] as f64, r, se));
        if r < worst.0 {
            worst = (r, se);
        }
    }
    rep.settle(worst.0, worst.1, cfg.band_k);
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapStep {
    pub from: f64,
    pub to: f64,
    /// The step landed on d; the next one starts from d - α/2 instead.
    pub hit_dimension: bool,
}

/// Decay exponents γ₀ = 0 → min(γ + α, d + α) → ... → d + α, restarting
/// from d - α/2 whenever a step lands exactly on d.
pub fn bootstrap_exponents(d: usize, alpha: f64) -> Result<Vec<BootstrapStep>> {
    if !(alpha > 0.0 && alpha < 2.0) || d == 0 {
        return Err(Error::Config(format!("need d >= 1 and alpha in (0,2), got d = {d}, alpha = {alpha}")));
    }
    const TOL: f64 = 1e-9;
    let df = d as f64;
    let target = df + alpha;
    let mut steps = Vec::new();
    let mut g = 0.0;
    while (g - target).abs() > TOL {
        let mut next = (g + alpha).min(target);
        if (target - next).abs() <= TOL {
            next = target;
        }
        let hit = (next - df).abs() <= TOL;
        if hit {
            next = df;
        }
        steps.push(BootstrapStep { from: g, to: next, hit_dimension: hit });
        g = if hit { df - alpha / 2.0 } else { next };
    }
    Ok(steps)
}

/// Flat sequence 0, γ₁, ... with the restart value inserted after d.
pub fn bootstrap_sequence(steps: &[BootstrapStep]) -> Vec<f64> {
    let mut out = vec![0.0];
    for (i, s) in steps.iter().enumerate() {
        if i > 0 && s.from != steps[i - 1].to {
            out.push(s.from);
        }
        out.push(s.to);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{make_const, make_log, make_power};
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn bootstrap_hand_sequences() {
        let cases: [(usize, f64, &[f64], usize); 5] = [
            (1, 0.5, &[0.0, 0.5, 1.0, 0.75, 1.25, 1.5], 4),
            (1, 1.0, &[0.0, 1.0, 0.5, 1.5, 2.0], 3),
            (1, 1.5, &[0.0, 1.5, 2.5], 2),
            (2, 1.0, &[0.0, 1.0, 2.0, 1.5, 2.5, 3.0], 4),
            (3, 0.5, &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 2.75, 3.25, 3.5], 8),
        ];
        for (d, a, seq, n) in cases {
            let s = bootstrap_exponents(d, a).unwrap();
            assert_eq!(s.len(), n, "d={d} a={a}");
            assert!(close(&bootstrap_sequence(&s), seq), "d={d} a={a}: {:?}", bootstrap_sequence(&s));
        }
    }

    proptest! {
        #[test]
        fn bootstrap_invariants(d in 1usize..6, alpha in 0.05f64..1.99) {
            let s = bootstrap_exponents(d, alpha).unwrap();
            let df = d as f64;
            prop_assert!(s.len() <= (2.0 + df / alpha).floor() as usize);
            prop_assert_eq!(s.last().unwrap().to, df + alpha);
            prop_assert!(s.iter().filter(|x| x.hit_dimension).count() <= 1);
            for st in &s {
                prop_assert!((st.from - df).abs() > 1e-9);
                prop_assert!(st.to > st.from);
            }
        }
    }

    #[test]
    fn bootstrap_rejects_bad_alpha() {
        assert!(bootstrap_exponents(1, 2.0).is_err());
        assert!(bootstrap_exponents(0, 1.0).is_err());
    }

    #[test]
    fn decide_bands() {
        assert_eq!(decide(1.0, 0.1, 2.0, Direction::AtMost, 2.0), Verdict::Pass);
        assert_eq!(decide(1.9, 0.1, 2.0, Direction::AtMost, 2.0), Verdict::Inconclusive);
        assert_eq!(decide(3.0, 0.1, 2.0, Direction::AtMost, 2.0), Verdict::Fail);
        assert_eq!(decide(3.0, 0.0, 2.0, Direction::AtLeast, 2.0), Verdict::Pass);
        assert_eq!(decide(f64::NAN, 0.0, 2.0, Direction::AtLeast, 2.0), Verdict::Inconclusive);
    }

    #[test]
    fn weighted_slope_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.5 * v).collect();
        let (s, _) = weighted_slope(&x, &y, &[0.1, 0.2, 0.1, 0.3]);
        assert!((s + 2.5).abs() < 1e-12);
        // equal weights: se = σ / sqrt(Σ(x - x̄)²)
        let (_, se) = weighted_slope(&x, &y, &[0.5; 4]);
        assert!((se - 0.5 / 5f64.sqrt()).abs() < 1e-12);
    }

    fn small_cfg() -> DiagnosticsConfig {
        let mut c = DiagnosticsConfig::default();
        c.paths.replicas = 4000;
        c.paths.h = 2e-3;
        c.spectral_half_width = 16.0;
        c.spectral_nodes = 400;
        c
    }

    #[test]
    fn constant_potential_is_out_of_scope() {
        let m = StableModel::new(1, 1.0).unwrap();
        let r = iu_verdict(&m, &make_const(3.0).unwrap(), &small_cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.notes[0].contains("precondition"));
        assert!(r.sub_reports.is_empty());
    }

    #[test]
    fn analytic_check_separates_power_and_log() {
        let m = StableModel::new(1, 1.0).unwrap();
        let c = small_cfg();
        assert_eq!(analytic_growth_check(&m, &make_power(1.0).unwrap(), &c).unwrap().verdict, Verdict::Pass);
        assert_eq!(analytic_growth_check(&m, &make_log(2.0).unwrap(), &c).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn decay_slope_power_vs_log() {
        let m = StableModel::new(1, 1.0).unwrap();
        let c = small_cfg();
        let p = check_condition_iii_decay(&m, &make_power(1.0).unwrap(), &[2.0, 4.0, 8.0], 1.0, &c).unwrap();
        assert_eq!(p.verdict, Verdict::Pass, "{p:?}");
        assert!(p.statistic < -2.0 + 0.3);
        let l = check_condition_iii_decay(&m, &make_log(0.5).unwrap(), &[2.0, 4.0, 8.0], 1.0, &c).unwrap();
        assert_eq!(l.verdict, Verdict::Fail, "{l:?}");
        // e_q(t) ≈ (1+r)^{-κt}: slope near -0.5
        assert!(l.statistic > -1.5);
    }

    #[test]
    fn decay_estimates_ordered_under_common_paths() {
        let m = StableModel::new(1, 1.0).unwrap();
        let pc = PathConfig { replicas: 2000, h: 2e-3, ..PathConfig::default() };
        let q1 = make_power(1.0).unwrap();
        let q2 = make_power(2.0).unwrap();
        for r in [2.0, 4.0] {
            let e = estimate_exterior_survival_multi(&m, &[&q1, &q2], r, &[r + 1.0], 1.0, &pc, 9).unwrap();
            assert!(e[1].mean <= e[0].mean);
        }
    }

    #[test]
    fn report_is_reproducible_and_serializes() {
        let m = StableModel::new(1, 1.0).unwrap();
        let c = small_cfg();
        let q = make_power(1.0).unwrap();
        let a = check_condition_iii_decay(&m, &q, &[2.0, 4.0], 1.0, &c).unwrap();
        let b = check_condition_iii_decay(&m, &q, &[2.0, 4.0], 1.0, &c).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_evidence_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("predicate,series,x,value,stderr\n"));
        assert_eq!(text.lines().count(), 3);
        assert!(a.verdict_line().starts_with("condition_iii_decay,pass,"));
    }

    #[test]
    fn comparability_rejects_probe_outside_kappa_ball() {
        let m = StableModel::new(1, 1.0).unwrap();
        let b = BallSpec::centered(1, 1.0).unwrap();
        let q = make_const(0.0).unwrap();
        let r = check_gauge_green_comparability(&m, &q, &b, 0.5, &[vec![0.6]], &[0.0], &small_cfg());
        assert!(r.is_err());
        assert!(check_gauge_green_comparability(&m, &q, &b, 1.0, &[vec![0.0]], &[0.0], &small_cfg()).is_err());
    }

    #[test]
    fn comparability_free_case_matches_exit_time() {
        // q ≡ 0: u_D = 1, v_D(x) = (1 - x²)^{1/2} for d = 1, α = 1
        let m = StableModel::new(1, 1.0).unwrap();
        let b = BallSpec::centered(1, 1.0).unwrap();
        let mut c = small_cfg();
        c.paths.replicas = 20_000;
        c.paths.h = 1e-3;
        let r = check_gauge_green_comparability(&m, &make_const(0.0).unwrap(), &b, 0.5, &[vec![0.0], vec![0.25]], &[0.0], &c).unwrap();
        for row in r.evidence.iter().filter(|e| e.series == "c=0") {
            let exact = 1.0 / (1.0 - row.x * row.x).sqrt();
            assert!((row.value - exact).abs() < 4.0 * row.stderr + 0.01, "{row:?}");
        }
        // a single intensity has no variation across the sweep
        assert!(r.statistic.abs() < 1e-12);
    }
}
