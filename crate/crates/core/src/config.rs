//! Experiment configuration in a sectioned `key = value` text format.
//!
//! ```text
//! # comment
//! [model]
//! d = 1
//! alpha = 1.0
//!
//! [run]
//! kind = iu-check        # sample | eigen | kernel | iu-check | counterexample | validate
//! seed = 7
//! out = results
//! svg = false
//!
//! [potential]
//! kind = power           # power | exp | log | const | counterexample
//! beta = 2
//!
//! [paths]
//! h = 0.001
//! replicas = 20000
//! adaptive = none        # or the step factor θ
//!
//! [grid]
//! half_width = 40
//! n = 1200
//! scheme = centered-difference
//!
//! [probes]
//! points = 0, 1, 2
//! times = 1
//! indices = 2, 3, 4, 5
//!
//! [thresholds]
//! dispersion = 10
//! ```
//!
//! Missing sections and keys take their defaults. Parsing collects every
//! violation with its line number.

use crate::diagnostics::DiagnosticsConfig;
use crate::error::Result;
use crate::paths::PathConfig;
use crate::potentials::{make_const, make_counterexample, make_exp, make_log, make_power, CounterexampleSpec, Potential};
use crate::spectral::{Grid1D, Scheme};
use crate::stable::StableModel;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunKind {
    Sample,
    Eigen,
    Kernel,
    IuCheck,
    Counterexample,
    Validate,
}

impl RunKind {
    pub const ALL: [RunKind; 6] =
        [RunKind::Sample, RunKind::Eigen, RunKind::Kernel, RunKind::IuCheck, RunKind::Counterexample, RunKind::Validate];

    pub fn as_str(&self) -> &'static str {
        match self {
            RunKind::Sample => "sample",
            RunKind::Eigen => "eigen",
            RunKind::Kernel => "kernel",
            RunKind::IuCheck => "iu-check",
            RunKind::Counterexample => "counterexample",
            RunKind::Validate => "validate",
        }
    }
}

impl FromStr for RunKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        RunKind::ALL.iter().find(|k| k.as_str() == s).copied().ok_or_else(|| format!("unknown run kind '{s}'"))
    }
}

impl fmt::Display for RunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SequenceSpec {
    /// a_n = 2^{α + n²}, n = 1..=terms.
    Default {
        terms: usize,
    },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PotentialSpec {
    Power { beta: f64 },
    Exp { beta: f64 },
    Log { kappa: f64 },
    Const { c: f64 },
    Counterexample { sequence: SequenceSpec },
}

impl PotentialSpec {
    pub fn counterexample_spec(&self, alpha: f64) -> Option<Result<CounterexampleSpec>> {
        match self {
            PotentialSpec::Counterexample { sequence: SequenceSpec::Default { terms } } => {
                Some(CounterexampleSpec::default_sequence(alpha, *terms))
            }
            PotentialSpec::Counterexample { sequence: SequenceSpec::Explicit(a) } => Some(CounterexampleSpec::new(a.clone(), alpha)),
            _ => None,
        }
    }

    pub fn build(&self, alpha: f64) -> Result<Potential> {
        match self {
            PotentialSpec::Power { beta } => make_power(*beta),
            PotentialSpec::Exp { beta } => make_exp(*beta),
            PotentialSpec::Log { kappa } => make_log(*kappa),
            PotentialSpec::Const { c } => make_const(*c),
            PotentialSpec::Counterexample { .. } => Ok(make_counterexample(&self.counterexample_spec(alpha).unwrap()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    pub band_k: f64,
    pub dispersion: f64,
    pub comparability: f64,
    pub slope_slack: f64,
    pub decay_time: f64,
    pub decay_radii: Vec<f64>,
    pub decay_offset: f64,
    pub analytic_radii: Vec<f64>,
    pub analytic_growth: f64,
    pub spectral_time: f64,
    pub spectral_growth: f64,
    pub spectral_tol: f64,
    pub eigen_tol: f64,
    pub witness_factor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        let d = DiagnosticsConfig::default();
        Thresholds {
            band_k: d.band_k,
            dispersion: d.dispersion_threshold,
            comparability: d.comparability_threshold,
            slope_slack: d.slope_slack,
            decay_time: d.decay_time,
            decay_radii: d.decay_radii,
            decay_offset: d.decay_offset,
            analytic_radii: d.analytic_radii,
            analytic_growth: d.analytic_growth,
            spectral_time: d.spectral_time,
            spectral_growth: d.spectral_growth_threshold,
            spectral_tol: d.spectral_tol,
            eigen_tol: d.eigen_tol,
            witness_factor: d.witness_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub alpha: f64,
    pub kind: RunKind,
    pub seed: u64,
    pub out: String,
    pub svg: bool,
    pub potential: PotentialSpec,
    pub paths: PathConfig,
    pub grid_half_width: f64,
    pub grid_nodes: usize,
    pub scheme: Scheme,
    /// Coordinates on the first axis.
    pub points: Vec<f64>,
    pub times: Vec<f64>,
    /// Plateau indices probed by the counterexample run.
    pub indices: Vec<usize>,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    pub fn new(d: usize, alpha: f64, kind: RunKind) -> Self {
        let mut paths = PathConfig::default();
        if kind == RunKind::Counterexample {
            paths.adaptive = Some(0.05);
            paths.lookahead = 3.0;
            paths.replicas = 20_000;
        }
        ExperimentConfig {
            d,
            alpha,
            kind,
            seed: 1,
            out: "out".into(),
            svg: false,
            potential: if kind == RunKind::Counterexample {
                PotentialSpec::Counterexample { sequence: SequenceSpec::Default { terms: 8 } }
            } else {
                PotentialSpec::Power { beta: 2.0 }
            },
            paths,
            grid_half_width: 40.0,
            grid_nodes: 1200,
            scheme: Scheme::CenteredDifference,
            points: vec![0.0, 1.0, 2.0],
            times: vec![1.0],
            indices: vec![2, 3, 4, 5],
            thresholds: Thresholds::default(),
        }
    }

    pub fn model(&self) -> Result<StableModel> {
        StableModel::new(self.d, self.alpha)
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid_half_width, self.grid_nodes)
    }

    pub fn diagnostics(&self) -> DiagnosticsConfig {
        let t = &self.thresholds;
        DiagnosticsConfig {
            paths: self.paths.clone(),
            seed: self.seed,
            band_k: t.band_k,
            dispersion_threshold: t.dispersion,
            comparability_threshold: t.comparability,
            slope_slack: t.slope_slack,
            decay_time: t.decay_time,
            decay_radii: t.decay_radii.clone(),
            decay_offset: t.decay_offset,
            analytic_radii: t.analytic_radii.clone(),
            analytic_growth: t.analytic_growth,
            spectral_half_width: self.grid_half_width,
            spectral_nodes: self.grid_nodes,
            spectral_time: t.spectral_time,
            spectral_growth_threshold: t.spectral_growth,
            spectral_tol: t.spectral_tol,
            eigen_tol: t.eigen_tol,
            witness_factor: t.witness_factor,
        }
    }

    /// Cross-field checks; each violation is reported against the line of
    /// the key involved, or line 0 when the value is a default.
    fn check(&self, lines: &BTreeMap<&'static str, usize>, issues: &mut Vec<ConfigIssue>) {
        let at = |k: &str| lines.get(k).copied().unwrap_or(0);
        if self.d == 0 {
            issues.push(ConfigIssue::new(at("model.d"), "d must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            issues.push(ConfigIssue::new(at("model.alpha"), "alpha out of (0,2)"));
        }
        if let Err(e) = self.paths.validate() {
            issues.push(ConfigIssue::new(at("paths"), e.to_string()));
        }
        if let Err(e) = self.potential.build(self.alpha.clamp(1e-3, 1.999)) {
            issues.push(ConfigIssue::new(at("potential.kind"), e.to_string()));
        }
        if self.grid_nodes < 3 || !(self.grid_half_width > 0.0) {
            issues.push(ConfigIssue::new(at("grid"), "grid needs half_width > 0 and n >= 3"));
        }
        let spectral = matches!(self.kind, RunKind::Eigen | RunKind::Kernel);
        if spectral && self.d != 1 {
            issues
                .push(ConfigIssue::new(at("model.d"), format!("run kind {} uses the one-dimensional grid solver; d must be 1", self.kind)));
        }
        if spectral && self.points.iter().any(|x| x.abs() >= self.grid_half_width) {
            issues.push(ConfigIssue::new(at("probes.points"), "probe points must lie inside the grid interval"));
        }
        if self.kind == RunKind::Eigen && self.points.iter().any(|x| x.abs() + 1.0 >= self.grid_half_width) {
            issues.push(ConfigIssue::new(at("probes.points"), "eigen probes need |x| + 1 < half_width for the unit ball around them"));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t > 0.0)) {
            issues.push(ConfigIssue::new(at("probes.times"), "times must be a nonempty list of positive values"));
        }
        if matches!(self.kind, RunKind::Sample | RunKind::Kernel) && self.times.iter().any(|t| *t > self.paths.horizon) {
            issues.push(ConfigIssue::new(at("probes.times"), "times must not exceed paths.horizon"));
        }
        if self.kind == RunKind::Counterexample {
            match self.potential.counterexample_spec(self.alpha) {
                None => issues.push(ConfigIssue::new(at("potential.kind"), "counterexample run needs potential kind = counterexample")),
                Some(Ok(spec)) => {
                    let ok = self.indices.len() >= 2
                        && self.indices.iter().all(|&n| n >= 1 && n <= spec.terms())
                        && self.indices.windows(2).all(|w| w[1] == w[0] + 1);
                    if !ok {
                        issues.push(ConfigIssue::new(
                            at("probes.indices"),
                            format!("indices must be at least two consecutive values in 1..={}", spec.terms()),
                        ));
                    }
                }
                Some(Err(_)) => {}
            }
        }
        let t = &self.thresholds;
        if t.decay_radii.len() < 2 || t.decay_radii.windows(2).any(|w| !(w[1] > w[0])) {
            issues.push(ConfigIssue::new(at("thresholds.decay_radii"), "decay_radii must be at least two increasing values"));
        }
        if t.analytic_radii.len() < 2 || t.analytic_radii.iter().any(|r| !(*r > 1.0)) {
            issues.push(ConfigIssue::new(at("thresholds.analytic_radii"), "analytic_radii must be at least two values above 1"));
        }
    }

    /// Text form that parses back to an equal config.
    pub fn to_text(&self) -> String {
        fn list<T: fmt::Debug>(v: &[T]) -> String {
            v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
        }
        fn opt(v: Option<f64>) -> String {
            v.map_or("none".into(), |x| format!("{x:?}"))
        }
        let mut s = String::new();
        let mut put = |line: String| {
            s.push_str(&line);
            s.push('\n');
        };
        put("[model]".into());
        put(format!("d = {}", self.d));
        put(format!("alpha = {:?}", self.alpha));
        put(String::new());
        put("[run]".into());
        put(format!("kind = {}", self.kind));
        put(format!("seed = {}", self.seed));
        put(format!("out = {}", self.out));
        put(format!("svg = {}", self.svg));
        put(String::new());
        put("[potential]".into());
        match &self.potential {
            PotentialSpec::Power { beta } => {
                put("kind = power".into());
                put(format!("beta = {beta:?}"));
            }
            PotentialSpec::Exp { beta } => {
                put("kind = exp".into());
                put(format!("beta = {beta:?}"));
            }
            PotentialSpec::Log { kappa } => {
                put("kind = log".into());
                put(format!("kappa = {kappa:?}"));
            }
            PotentialSpec::Const { c } => {
                put("kind = const".into());
                put(format!("c = {c:?}"));
            }
            PotentialSpec::Counterexample { sequence } => {
                put("kind = counterexample".into());
                match sequence {
                    SequenceSpec::Default { terms } => put(format!("sequence = default:{terms}")),
                    SequenceSpec::Explicit(a) => put(format!("sequence = {}", list(a))),
                }
            }
        }
        put(String::new());
        let p = &self.paths;
        put("[paths]".into());
        put(format!("h = {:?}", p.h));
        put(format!("horizon = {:?}", p.horizon));
        put(format!("replicas = {}", p.replicas));
        put(format!("epsilon = {:?}", p.epsilon));
        put(format!("truncation = {}", opt(p.truncation)));
        put(format!("adaptive = {}", opt(p.adaptive)));
        put(format!("lookahead = {:?}", p.lookahead));
        put(format!("weight_floor = {:?}", p.weight_floor));
        put(format!("max_steps = {}", p.max_steps));
        put(String::new());
        put("[grid]".into());
        put(format!("half_width = {:?}", self.grid_half_width));
        put(format!("n = {}", self.grid_nodes));
        put(format!(
            "scheme = {}",
            match self.scheme {
                Scheme::CenteredDifference => "centered-difference",
                Scheme::Quadrature => "quadrature",
            }
        ));
        put(String::new());
        put("[probes]".into());
        put(format!("points = {}", list(&self.points)));
        put(format!("times = {}", list(&self.times)));
        put(format!("indices = {}", list(&self.indices)));
        put(String::new());
        let t = &self.thresholds;
        put("[thresholds]".into());
        put(format!("band_k = {:?}", t.band_k));
        put(format!("dispersion = {:?}", t.dispersion));
        put(format!("comparability = {:?}", t.comparability));
        put(format!("slope_slack = {:?}", t.slope_slack));
        put(format!("decay_time = {:?}", t.decay_time));
        put(format!("decay_radii = {}", list(&t.decay_radii)));
        put(format!("decay_offset = {:?}", t.decay_offset));
        put(format!("analytic_radii = {}", list(&t.analytic_radii)));
        put(format!("analytic_growth = {:?}", t.analytic_growth));
        put(format!("spectral_time = {:?}", t.spectral_time));
        put(format!("spectral_growth = {:?}", t.spectral_growth));
        put(format!("spectral_tol = {:?}", t.spectral_tol));
        put(format!("eigen_tol = {:?}", t.eigen_tol));
        put(format!("witness_factor = {:?}", t.witness_factor));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based; 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

impl ConfigIssue {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ConfigIssue { line, message: message.into() }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

pub fn format_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("\n")
}

const SECTIONS: &[&str] = &["model", "run", "potential", "paths", "grid", "probes", "thresholds"];

fn full_key(section: &str, key: &str) -> Option<&'static str> {
    FULL_KEYS.iter().find(|f| f.split_once('.') == Some((section, key))).copied()
}

const FULL_KEYS: &[&str] = &[
    "model.d",
    "model.alpha",
    "run.kind",
    "run.seed",
    "run.out",
    "run.svg",
    "potential.kind",
    "potential.beta",
    "potential.kappa",
    "potential.c",
    "potential.sequence",
    "paths.h",
    "paths.horizon",
    "paths.replicas",
    "paths.epsilon",
    "paths.truncation",
    "paths.adaptive",
    "paths.lookahead",
    "paths.weight_floor",
    "paths.max_steps",
    "grid.half_width",
    "grid.n",
    "grid.scheme",
    "probes.points",
    "probes.times",
    "probes.indices",
    "thresholds.band_k",
    "thresholds.dispersion",
    "thresholds.comparability",
    "thresholds.slope_slack",
    "thresholds.decay_time",
    "thresholds.decay_radii",
    "thresholds.decay_offset",
    "thresholds.analytic_radii",
    "thresholds.analytic_growth",
    "thresholds.spectral_time",
    "thresholds.spectral_growth",
    "thresholds.spectral_tol",
    "thresholds.eigen_tol",
    "thresholds.witness_factor",
];

struct Entries {
    values: BTreeMap<&'static str, (usize, String)>,
    issues: Vec<ConfigIssue>,
}

impl Entries {
    fn take<T: FromStr>(&mut self, key: &'static str, what: &str) -> Option<T> {
        let (line, raw) = self.values.get(key)?.clone();
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.issues.push(ConfigIssue::new(line, format!("{key}: expected {what}, got '{raw}'")));
                None
            }
        }
    }

    fn list<T: FromStr>(&mut self, key: &'static str, what: &str) -> Option<Vec<T>> {
        let (line, raw) = self.values.get(key)?.clone();
        let mut out = Vec::new();
        for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.parse::<T>() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.issues.push(ConfigIssue::new(line, format!("{key}: expected a list of {what}, got '{part}'")));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn optional(&mut self, key: &'static str) -> Option<Option<f64>> {
        match self.values.get(key) {
            Some((_, raw)) if raw == "none" => Some(None),
            Some(_) => self.take::<f64>(key, "a number or 'none'").map(Some),
            None => None,
        }
    }

    fn line(&self, key: &str) -> usize {
        self.values.get(key).map_or(0, |(l, _)| *l)
    }
}

/// Parses and validates a config, reporting all problems at once.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, Vec<ConfigIssue>> {
    let mut e = Entries { values: BTreeMap::new(), issues: Vec::new() };
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if SECTIONS.contains(&name) {
                section = Some(name.to_string());
            } else {
                e.issues.push(ConfigIssue::new(line_no, format!("unknown section [{name}]")));
                section = None;
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            e.issues.push(ConfigIssue::new(line_no, format!("expected 'key = value', got '{line}'")));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(sec) = &section else {
            e.issues.push(ConfigIssue::new(line_no, format!("key '{k}' outside a known section")));
            continue;
        };
        match full_key(sec, k) {
            Some(fk) => {
                if let Some((first, _)) = e.values.get(fk) {
                    e.issues.push(ConfigIssue::new(line_no, format!("duplicate key {fk} (first on line {first})")));
                } else {
                    e.values.insert(fk, (line_no, v.to_string()));
                }
            }
            None => e.issues.push(ConfigIssue::new(line_no, format!("unknown key '{k}' in [{sec}]"))),
        }
    }

    for required in ["model.d", "model.alpha", "run.kind"] {
        if !e.values.contains_key(required) {
            e.issues.push(ConfigIssue::new(0, format!("missing required key {required}")));
        }
    }
    let d = e.take::<usize>("model.d", "a positive integer");
    let alpha = e.take::<f64>("model.alpha", "a number");
    let kind = match e.values.get("run.kind").cloned() {
        Some((line, raw)) => match raw.parse::<RunKind>() {
            Ok(k) => Some(k),
            Err(msg) => {
                e.issues.push(ConfigIssue::new(line, msg));
                None
            }
        },
        None => None,
    };
    // keep going with placeholders so later keys are still checked
    let core_ok = d.is_some() && alpha.is_some() && kind.is_some();
    let mut c = ExperimentConfig::new(d.unwrap_or(1), alpha.unwrap_or(1.0), kind.unwrap_or(RunKind::Validate));

    if let Some(v) = e.take("run.seed", "an unsigned integer") {
        c.seed = v;
    }
    if let Some((_, v)) = e.values.get("run.out") {
        c.out = v.clone();
    }
    if let Some(v) = e.take("run.svg", "true or false") {
        c.svg = v;
    }

    if let Some((line, pk)) = e.values.get("potential.kind").cloned() {
        let num = |e: &mut Entries, key: &'static str| -> Option<f64> {
            if !e.values.contains_key(key) {
                e.issues.push(ConfigIssue::new(line, format!("potential kind '{pk}' requires key {key}")));
                return None;
            }
            e.take::<f64>(key, "a number")
        };
        let spec = match pk.as_str() {
            "power" => num(&mut e, "potential.beta").map(|beta| PotentialSpec::Power { beta }),
            "exp" => num(&mut e, "potential.beta").map(|beta| PotentialSpec::Exp { beta }),
            "log" => num(&mut e, "potential.kappa").map(|kappa| PotentialSpec::Log { kappa }),
            "const" => num(&mut e, "potential.c").map(|c| PotentialSpec::Const { c }),
            "counterexample" => match e.values.get("potential.sequence").cloned() {
                None => {
                    e.issues.push(ConfigIssue::new(line, "potential kind 'counterexample' requires key potential.sequence"));
                    None
                }
                Some((sl, raw)) => {
                    if let Some(t) = raw.strip_prefix("default:") {
                        match t.trim().parse::<usize>() {
                            Ok(terms) => Some(PotentialSpec::Counterexample { sequence: SequenceSpec::Default { terms } }),
                            Err(_) => {
                                e.issues.push(ConfigIssue::new(sl, format!("potential.sequence: bad term count '{t}'")));
                                None
                            }
                        }
                    } else {
                        e.list::<f64>("potential.sequence", "numbers")
                            .map(|a| PotentialSpec::Counterexample { sequence: SequenceSpec::Explicit(a) })
                    }
                }
            },
            other => {
                e.issues.push(ConfigIssue::new(line, format!("unknown potential kind '{other}'")));
                None
            }
        };
        if let Some(s) = spec {
            c.potential = s;
        }
    }

    macro_rules! set {
        ($field:expr, $key:literal, $what:literal) => {
            if let Some(v) = e.take($key, $what) {
                $field = v;
            }
        };
    }
    macro_rules! set_list {
        ($field:expr, $key:literal, $what:literal) => {
            if let Some(v) = e.list($key, $what) {
                $field = v;
            }
        };
    }
    set!(c.paths.h, "paths.h", "a number");
    set!(c.paths.horizon, "paths.horizon", "a number");
    set!(c.paths.replicas, "paths.replicas", "an unsigned integer");
    set!(c.paths.epsilon, "paths.epsilon", "a number");
    if let Some(v) = e.optional("paths.truncation") {
        c.paths.truncation = v;
    }
    if let Some(v) = e.optional("paths.adaptive") {
        c.paths.adaptive = v;
    }
    set!(c.paths.lookahead, "paths.lookahead", "a number");
    set!(c.paths.weight_floor, "paths.weight_floor", "a number");
    set!(c.paths.max_steps, "paths.max_steps", "an unsigned integer");
    set!(c.grid_half_width, "grid.half_width", "a number");
    set!(c.grid_nodes, "grid.n", "an unsigned integer");
    if let Some((line, raw)) = e.values.get("grid.scheme").cloned() {
        match raw.as_str() {
            "centered-difference" => c.scheme = Scheme::CenteredDifference,
            "quadrature" => c.scheme = Scheme::Quadrature,
            other => e.issues.push(ConfigIssue::new(line, format!("unknown scheme '{other}'"))),
        }
    }
    set_list!(c.points, "probes.points", "numbers");
    set_list!(c.times, "probes.times", "numbers");
    set_list!(c.indices, "probes.indices", "unsigned integers");
    let t = &mut c.thresholds;
    set!(t.band_k, "thresholds.band_k", "a number");
    set!(t.dispersion, "thresholds.dispersion", "a number");
    set!(t.comparability, "thresholds.comparability", "a number");
    set!(t.slope_slack, "thresholds.slope_slack", "a number");
    set!(t.decay_time, "thresholds.decay_time", "a number");
    set_list!(t.decay_radii, "thresholds.decay_radii", "numbers");
    set!(t.decay_offset, "thresholds.decay_offset", "a number");
    set_list!(t.analytic_radii, "thresholds.analytic_radii", "numbers");
    set!(t.analytic_growth, "thresholds.analytic_growth", "a number");
    set!(t.spectral_time, "thresholds.spectral_time", "a number");
    set!(t.spectral_growth, "thresholds.spectral_growth", "a number");
    set!(t.spectral_tol, "thresholds.spectral_tol", "a number");
    set!(t.eigen_tol, "thresholds.eigen_tol", "a number");
    set!(t.witness_factor, "thresholds.witness_factor", "a number");

    let mut lines: BTreeMap<&'static str, usize> = BTreeMap::new();
    for k in FULL_KEYS {
        let l = e.line(k);
        if l > 0 {
            lines.insert(k, l);
        }
    }
    if let Some(l) = FULL_KEYS.iter().filter(|k| k.starts_with("paths.")).map(|k| e.line(k)).filter(|l| *l > 0).min() {
        lines.insert("paths", l);
    }
    if let Some(l) = ["grid.half_width", "grid.n"].iter().map(|k| e.line(k)).filter(|l| *l > 0).min() {
        lines.insert("grid", l);
    }
    let mut issues = e.issues;
    if core_ok {
        c.check(&lines, &mut issues);
    }
    if issues.is_empty() {
        Ok(c)
    } else {
        issues.sort_by_key(|i| i.line);
        Err(issues)
    }
}
