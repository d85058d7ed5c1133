//! Executes an [`ExperimentConfig`] and writes its artifacts.
//!
//! Every run writes into the output directory:
//! - `config.txt`: the effective config, whose SHA-256 is the config hash;
//! - `<kind>.csv`: evidence, first line `# config_hash=<hex> kind=<kind> seed=<n>`;
//! - `verdict.txt`: `name,verdict,statistic,stderr,threshold` for the
//!   predicate and each sub-predicate, then `# note` lines;
//! - optional `<kind>.svg`;
//! - `manifest.json`: hash, kind, seed, version, status and the SHA-256 of
//!   every file above, in that field order.
//!
//! Evidence columns per run kind:
//! - sample: `x,t,mean,stderr,n`
//! - eigen: `quantity,value` plus `ground_state.csv` (`x,phi`) and
//!   `envelope.csv` (`x,ratio`)
//! - kernel: `t,x,y,spectral,mc,mc_stderr,epsilon,hits`
//! - iu-check, counterexample: `predicate,series,x,value,stderr`
//! - validate: `check,statistic,threshold,verdict`

use crate::config::{ExperimentConfig, RunKind};
use crate::diagnostics::{bootstrap_exponents, bootstrap_sequence, check_counterexample_growth, iu_verdict, PredicateReport, Verdict};
use crate::error::{Error, Result};
use crate::paths::{estimate_exit_functionals, estimate_kernel, estimate_semigroup_mass};
use crate::potentials::make_const;
use crate::rng::SeedState;
use crate::spectral::{assemble_operator_with, envelope_ratio_profile, ground_state, interpolate, modes, write_ground_state_csv, Grid1D};
use crate::stable::{exit_radius_cdf_centered, levy_density, mean_exit_time_ball, sample_exit_from_ball, BallSpec, StableModel};
use crate::stats::{ks_critical_1pct, ks_statistic};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok | Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    fn from_verdict(v: Verdict) -> Self {
        match v {
            Verdict::Pass => Status::Pass,
            Verdict::Fail => Status::Fail,
            Verdict::Inconclusive => Status::Inconclusive,
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub kind: String,
    pub seed: u64,
    pub version: String,
    pub status: Status,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub manifest: Manifest,
    pub files: Vec<PathBuf>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex(&Sha256::digest(cfg.to_text().as_bytes()))
}

struct Artifacts {
    dir: PathBuf,
    hash: String,
    header: String,
    written: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(cfg: &ExperimentConfig, dir: &Path) -> Self {
        let hash = config_hash(cfg);
        let header = format!("# config_hash={hash} kind={} seed={}\n", cfg.kind, cfg.seed);
        Artifacts { dir: dir.to_path_buf(), hash, header, written: Vec::new() }
    }

    /// CSV body prefixed with the hash line.
    fn csv(&mut self, name: &str, body: &str) {
        let mut s = self.header.clone();
        s.push_str(body);
        self.written.push((name.to_string(), s.into_bytes()));
    }

    fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.written.push((name.to_string(), bytes));
    }

    fn finish(self, cfg: &ExperimentConfig, status: Status) -> Result<RunOutcome> {
        fs::create_dir_all(&self.dir)?;
        let mut files = Vec::new();
        let mut entries = Vec::new();
        for (name, bytes) in &self.written {
            let p = self.dir.join(name);
            fs::write(&p, bytes)?;
            entries.push(FileEntry { name: name.clone(), sha256: hex(&Sha256::digest(bytes)) });
            files.push(p);
        }
        let manifest = Manifest {
            config_hash: self.hash,
            kind: cfg.kind.to_string(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            status,
            files: entries,
        };
        let p = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        text.push('\n');
        fs::write(&p, text)?;
        files.push(p);
        Ok(RunOutcome { status, manifest, files })
    }
}

/// Polyline plot of (x, y) series; a convenience, never read back.
pub fn svg_plot(title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * pad, h - 2.0 * pad);
    let _ = writeln!(s, r#"<text x="{pad}" y="24" font-family="sans-serif" font-size="14">{title}</text>"#);
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="{}" font-family="sans-serif" font-size="11">x: [{x0:.4}, {x1:.4}]  y: [{y0:.4e}, {y1:.4e}]</text>"#,
        h - 12.0
    );
    for (i, (name, p)) in series.iter().enumerate() {
        let c = colors[i % colors.len()];
        let coords: Vec<String> =
            p.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{c}">{name}</text>"#,
            w - pad - 120.0,
            pad + 14.0 * (i + 1) as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

fn on_axis(d: usize, r: f64) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = r;
    x
}

fn report_artifacts(a: &mut Artifacts, cfg: &ExperimentConfig, rep: &PredicateReport) -> Result<Status> {
    let mut buf = Vec::new();
    rep.write_evidence_csv(&mut buf)?;
    a.csv(&format!("{}.csv", cfg.kind), &String::from_utf8_lossy(&buf));
    let mut verdict = rep.verdict_line();
    verdict.push('\n');
    for r in &rep.sub_reports {
        verdict.push_str(&r.verdict_line());
        verdict.push('\n');
    }
    for n in &rep.notes {
        let _ = writeln!(verdict, "# {n}");
    }
    a.raw("verdict.txt", verdict.into_bytes());
    if cfg.svg {
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for r in std::iter::once(rep).chain(rep.sub_reports.iter()) {
            for e in &r.evidence {
                let key = format!("{}:{}", r.name, e.series);
                match series.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, p)) => p.push((e.x, e.value)),
                    None => series.push((key, vec![(e.x, e.value)])),
                }
            }
        }
        let refs: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(k, p)| (k.as_str(), p.clone())).collect();
        a.raw(&format!("{}.svg", cfg.kind), svg_plot(&rep.name, &refs).into_bytes());
    }
    Ok(Status::from_verdict(rep.verdict))
}

fn run_sample(a: &mut Artifacts, cfg: &ExperimentConfig, m: &StableModel) -> Result<Status> {
    let q = cfg.potential.build(cfg.alpha)?;
    let mut body = String::from("x,t,mean,stderr,n\n");
    let mut idx = 0u64;
    for &t in &cfg.times {
        for &x in &cfg.points {
            let e = estimate_semigroup_mass(m, &q, &on_axis(m.d, x), t, &cfg.paths, cfg.seed.wrapping_add(idx))?;
            let _ = writeln!(body, "{x:.12e},{t:.12e},{:.12e},{:.6e},{}", e.mean, e.stderr, e.n);
            idx += 1;
        }
    }
    a.csv("sample.csv", &body);
    Ok(Status::Ok)
}

fn run_eigen(a: &mut Artifacts, cfg: &ExperimentConfig, m: &StableModel) -> Result<Status> {
    let q = cfg.potential.build(cfg.alpha)?;
    let grid = cfg.grid()?;
    let op = assemble_operator_with(&grid, m.alpha, &q, cfg.scheme)?;
    let pair = ground_state(&op, cfg.thresholds.eigen_tol)?;
    let mut buf = Vec::new();
    write_ground_state_csv(&mut buf, &grid, &pair, &format!("config_hash={}", a.hash))?;
    a.raw("ground_state.csv", buf);
    let prof = envelope_ratio_profile(&grid, &pair, &q, m.alpha, grid.half_width / 2.0)?;
    let mut env = String::from("x,ratio\n");
    for (x, r) in prof.x.iter().zip(&prof.ratio) {
        let _ = writeln!(env, "{x:.12e},{r:.12e}");
    }
    a.csv("envelope.csv", &env);
    let mut body = String::from("quantity,value\n");
    let _ = writeln!(body, "lambda1,{:.12e}", pair.lambda);
    let _ = writeln!(body, "residual,{:.6e}", pair.residual);
    let _ = writeln!(body, "iterations,{}", pair.iterations);
    let _ = writeln!(body, "envelope_dispersion,{:.12e}", prof.dispersion);
    for &x in &cfg.points {
        let _ = writeln!(body, "phi1({x}),{:.12e}", interpolate(&grid, &pair.phi, x));
    }
    a.csv("eigen.csv", &body);
    if cfg.svg {
        let pts: Vec<(f64, f64)> = grid.nodes().into_iter().zip(pair.phi.iter().copied()).collect();
        a.raw("eigen.svg", svg_plot("ground state", &[("phi1", pts)]).into_bytes());
    }
    Ok(Status::Ok)
}

fn interpolate_2d(grid: &Grid1D, k: &nalgebra::DMatrix<f64>, x: f64, y: f64) -> f64 {
    let rows: Vec<f64> = (0..grid.n).map(|i| interpolate(grid, k.row(i).transpose().as_slice(), y)).collect();
    interpolate(grid, &rows, x)
}

fn run_kernel(a: &mut Artifacts, cfg: &ExperimentConfig, m: &StableModel) -> Result<Status> {
    let q = cfg.potential.build(cfg.alpha)?;
    let grid = cfg.grid()?;
    let md = modes(&assemble_operator_with(&grid, m.alpha, &q, cfg.scheme)?);
    let mut body = String::from("t,x,y,spectral,mc,mc_stderr,epsilon,hits\n");
    let mut idx = 0u64;
    for &t in &cfg.times {
        let k = md.kernel(t, md.modes_needed(t, 1e-16), cfg.thresholds.spectral_tol)?;
        for &x in &cfg.points {
            for &y in &cfg.points {
                let s = interpolate_2d(&grid, &k, x, y);
                let e = estimate_kernel(m, &q, &[x], &[y], t, &cfg.paths, cfg.seed.wrapping_add(idx))?;
                idx += 1;
                let _ = writeln!(
                    body,
                    "{t:.12e},{x:.12e},{y:.12e},{s:.12e},{:.12e},{:.6e},{:.6e},{}",
                    e.estimate.mean, e.estimate.stderr, e.epsilon, e.hits
                );
            }
        }
    }
    a.csv("kernel.csv", &body);
    Ok(Status::Ok)
}

fn run_iu_check(a: &mut Artifacts, cfg: &ExperimentConfig, m: &StableModel) -> Result<Status> {
    let q = cfg.potential.build(cfg.alpha)?;
    let rep = iu_verdict(m, &q, &cfg.diagnostics())?;
    report_artifacts(a, cfg, &rep)
}

fn run_counterexample(a: &mut Artifacts, cfg: &ExperimentConfig, m: &StableModel) -> Result<Status> {
    let spec = cfg
        .potential
        .counterexample_spec(cfg.alpha)
        .ok_or_else(|| Error::Config("counterexample run needs potential kind = counterexample".into()))??;
    let mut d = cfg.diagnostics();
    let mut rep = check_counterexample_growth(m, &spec, &cfg.indices, &d)?;
    if rep.verdict == Verdict::Inconclusive {
        d.paths.replicas *= 2;
        rep = check_counterexample_growth(m, &spec, &cfg.indices, &d)?;
        rep.notes.push(format!("replicas doubled to {} after an inconclusive first pass", d.paths.replicas));
    }
    report_artifacts(a, cfg, &rep)
}

struct Check {
    name: &'static str,
    statistic: f64,
    threshold: f64,
    pass: bool,
}

/// Closed-form oracle suite.
pub fn validation_suite(cfg: &ExperimentConfig) -> Result<Vec<(&'static str, f64, f64, bool)>> {
    let mut out: Vec<Check> = Vec::new();
    let seed = cfg.seed;
    let paths = &cfg.paths;

    // mean exit time from the centre: E τ = c_exit, scored as |z| ≤ 3
    for (name, d) in [("exit_time_d1_a1", 1usize), ("exit_time_d2_a1", 2)] {
        let m = StableModel::new(d, 1.0)?;
        let b = BallSpec::centered(d, 1.0)?;
        let x = vec![0.0; d];
        let zero = make_const(0.0)?;
        let f = estimate_exit_functionals(&m, &[&zero], &b, &x, paths, seed)?[0];
        let exact = mean_exit_time_ball(&m, &b, &x)?;
        let z = (f.green.mean - exact) / f.green.stderr;
        out.push(Check { name, statistic: z.abs(), threshold: 3.0, pass: z.abs() <= 3.0 });
    }

    // exit radius law of B(0,1) from the centre against its CDF
    {
        let m = StableModel::new(1, 1.0)?;
        let b = BallSpec::centered(1, 1.0)?;
        let s = SeedState::new(seed).derive(17);
        let mut radii: Vec<f64> = (0..paths.replicas)
            .map(|i| sample_exit_from_ball(&m, &b, &[0.0], &mut s.split(i as u64).rng()).map(|y| y[0].abs()))
            .collect::<Result<_>>()?;
        let cdf = |r: f64| exit_radius_cdf_centered(&m, 1.0, r).unwrap_or(f64::NAN);
        let ks = ks_statistic(&mut radii, cdf);
        let crit = ks_critical_1pct(radii.len());
        out.push(Check { name: "exit_law_ks_d1_a1", statistic: ks, threshold: crit, pass: ks < crit });
    }

    // spectral kernel: exact symmetry and Chapman-Kolmogorov
    {
        let grid = Grid1D::new(8.0, 200)?;
        let q = crate::potentials::make_power(2.0)?;
        let md = modes(&assemble_operator_with(&grid, 1.0, &q, cfg.scheme)?);
        let k = |t: f64| md.kernel(t, md.modes_needed(t, 1e-16), 1e-10);
        let (k1, k2) = (k(0.5)?, k(1.0)?);
        let asym = (&k1 - k1.transpose()).amax();
        out.push(Check { name: "kernel_symmetry", statistic: asym, threshold: 0.0, pass: asym == 0.0 });
        let ck = (&k1 * &k1) * grid.spacing();
        let rel = (&ck - &k2).amax() / k2.amax();
        out.push(Check { name: "chapman_kolmogorov", statistic: rel, threshold: 1e-6, pass: rel < 1e-6 });
    }

    // Lévy density constant at α = 1, d = 1: 1/(π x²)
    {
        let m = StableModel::new(1, 1.0)?;
        let v = levy_density(&m, &[2.0])?;
        let err = (v - 1.0 / (4.0 * std::f64::consts::PI)).abs();
        out.push(Check { name: "levy_density_d1_a1", statistic: err, threshold: 1e-14, pass: err <= 1e-14 });
    }

    // exponent bootstrap against hand iteration
    {
        let cases: [(usize, f64, &[f64]); 5] = [
            (1, 0.5, &[0.0, 0.5, 1.0, 0.75, 1.25, 1.5]),
            (1, 1.0, &[0.0, 1.0, 0.5, 1.5, 2.0]),
            (1, 1.5, &[0.0, 1.5, 2.5]),
            (2, 1.0, &[0.0, 1.0, 2.0, 1.5, 2.5, 3.0]),
            (3, 0.5, &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 2.75, 3.25, 3.5]),
        ];
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for (d, alpha, want) in cases {
            let steps = bootstrap_exponents(d, alpha)?;
            let got = bootstrap_sequence(&steps);
            ok &= got.len() == want.len() && steps.len() <= (2.0 + d as f64 / alpha).floor() as usize;
            for (g, w) in got.iter().zip(want) {
                worst = worst.max((g - w).abs());
            }
        }
        out.push(Check { name: "bootstrap_exponents", statistic: worst, threshold: 1e-9, pass: ok && worst <= 1e-9 });
    }

    Ok(out.into_iter().map(|c| (c.name, c.statistic, c.threshold, c.pass)).collect())
}

fn run_validate(a: &mut Artifacts, cfg: &ExperimentConfig) -> Result<Status> {
    let checks = validation_suite(cfg)?;
    let mut body = String::from("check,statistic,threshold,verdict\n");
    for (name, s, t, pass) in &checks {
        let _ = writeln!(body, "{name},{s:.9e},{t:.9e},{}", if *pass { "pass" } else { "fail" });
    }
    a.csv("validate.csv", &body);
    let status = if checks.iter().all(|c| c.3) { Status::Pass } else { Status::Fail };
    a.raw("verdict.txt", format!("validate,{}\n", status.as_str()).into_bytes());
    Ok(status)
}

/// Runs the experiment and writes all artifacts into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let m = cfg.model()?;
    let mut a = Artifacts::new(cfg, out);
    a.raw("config.txt", cfg.to_text().into_bytes());
    let status = match cfg.kind {
        RunKind::Sample => run_sample(&mut a, cfg, &m)?,
        RunKind::Eigen => run_eigen(&mut a, cfg, &m)?,
        RunKind::Kernel => run_kernel(&mut a, cfg, &m)?,
        RunKind::IuCheck => run_iu_check(&mut a, cfg, &m)?,
        RunKind::Counterexample => run_counterexample(&mut a, cfg, &m)?,
        RunKind::Validate => run_validate(&mut a, cfg)?,
    };
    a.finish(cfg, status)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: RunKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(1, 1.0, kind);
        c.paths.replicas = 500;
        c.paths.h = 5e-3;
        c.grid_half_width = 8.0;
        c.grid_nodes = 120;
        c
    }

    #[test]
    fn sample_run_writes_hashed_csv_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let c = quick(RunKind::Sample);
        let o = run(&c, dir.path()).unwrap();
        assert_eq!(o.status, Status::Ok);
        let csv = fs::read_to_string(dir.path().join("sample.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), format!("# config_hash={} kind=sample seed=1", config_hash(&c)));
        assert_eq!(lines.next().unwrap(), "x,t,mean,stderr,n");
        assert_eq!(lines.count(), 3);
        let man: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(man["config_hash"], config_hash(&c));
        assert_eq!(man["files"].as_array().unwrap().len(), 2);
        let text = fs::read_to_string(dir.path().join("config.txt")).unwrap();
        assert_eq!(crate::config::parse_config(&text).unwrap(), c);
    }

    #[test]
    fn eigen_run_with_svg() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick(RunKind::Eigen);
        c.svg = true;
        let o = run(&c, dir.path()).unwrap();
        assert_eq!(o.status, Status::Ok);
        for f in ["ground_state.csv", "envelope.csv", "eigen.csv", "eigen.svg", "manifest.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let svg = fs::read_to_string(dir.path().join("eigen.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn kernel_run_matches_spectral_scale() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick(RunKind::Kernel);
        c.points = vec![0.0];
        c.potential = crate::config::PotentialSpec::Const { c: 0.0 };
        c.grid_half_width = 20.0;
        c.grid_nodes = 400;
        c.paths.replicas = 4000;
        c.paths.epsilon = 0.1;
        run(&c, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
        let row: Vec<f64> = csv.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        // free Cauchy kernel at the origin is 1/π; the interval truncation lowers it slightly
        assert!((row[3] - 1.0 / std::f64::consts::PI).abs() < 0.01, "{row:?}");
        assert!((row[4] - row[3]).abs() < 4.0 * row[5] + 0.01, "{row:?}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Status::Ok.exit_code(), 0);
        assert_eq!(Status::Pass.exit_code(), 0);
        assert_eq!(Status::Fail.exit_code(), 1);
        assert_eq!(Status::Inconclusive.exit_code(), 2);
    }

    #[test]
    fn unwritable_output_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(matches!(run(&quick(RunKind::Sample), &blocker.join("sub")), Err(Error::Io(_))));
    }
}
