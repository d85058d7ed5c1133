//! Nonnegative potentials q with growth metadata.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GrowthClass {
    Power { beta: f64 },
    Exponential { beta: f64 },
    Logarithmic { kappa: f64 },
    Constant { c: f64 },
    Counterexample { sequence: Vec<f64> },
    Custom,
}

impl GrowthClass {
    /// `Some(true)` when q(x) → ∞ as |x| → ∞ is known from the class.
    pub fn tends_to_infinity(&self) -> Option<bool> {
        match self {
            GrowthClass::Power { .. } | GrowthClass::Exponential { .. } | GrowthClass::Logarithmic { .. } => Some(true),
            GrowthClass::Counterexample { .. } => Some(true),
            GrowthClass::Constant { .. } => Some(false),
            GrowthClass::Custom => None,
        }
    }
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Potential {
    eval: Evaluator,
    growth: GrowthClass,
    description: String,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential").field("growth", &self.growth).field("description", &self.description).finish()
    }
}

fn radius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Potential {
    pub fn custom<F>(description: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Potential { eval: Arc::new(f), growth: GrowthClass::Custom, description: description.into() }
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn growth(&self) -> &GrowthClass {
        &self.growth
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// q + c, keeping the growth class of q.
    pub fn shifted(&self, c: f64) -> Result<Potential> {
        if !(c >= 0.0) {
            return Err(Error::Config(format!("shift must be nonnegative, got {c}")));
        }
        let inner = self.eval.clone();
        Ok(Potential {
            eval: Arc::new(move |x| inner(x) + c),
            growth: self.growth.clone(),
            description: format!("{} + {c}", self.description),
        })
    }

    /// Sampled check of nonnegativity and finiteness on B(0, r).
    pub fn check_on_ball(&self, d: usize, r: f64, n: usize) -> Result<()> {
        for i in 0..=n {
            let s = -r + 2.0 * r * i as f64 / n as f64;
            for axis in 0..d {
                let mut x = vec![0.0; d];
                x[axis] = s;
                let v = self.value(&x);
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Domain(format!("{}: q = {v} at {x:?}", self.description)));
                }
            }
        }
        Ok(())
    }
}

/// q(x) = |x|^β.
pub fn make_power(beta: f64) -> Result<Potential> {
    if !(beta > 0.0) {
        return Err(Error::Config(format!("power exponent must be positive, got {beta}")));
    }
    Ok(Potential { eval: Arc::new(move |x| radius(x).powf(beta)), growth: GrowthClass::Power { beta }, description: format!("|x|^{beta}") })
}

/// q(x) = e^{β|x|}.
pub fn make_exp(beta: f64) -> Result<Potential> {
    if !(beta > 0.0) {
        return Err(Error::Config(format!("exponential rate must be positive, got {beta}")));
    }
    Ok(Potential {
        eval: Arc::new(move |x| (beta * radius(x)).exp()),
        growth: GrowthClass::Exponential { beta },
        description: format!("exp({beta}|x|)"),
    })
}

/// q(x) = κ log(1 + |x|).
pub fn make_log(kappa: f64) -> Result<Potential> {
    if !(kappa > 0.0) {
        return Err(Error::Config(format!("log coefficient must be positive, got {kappa}")));
    }
    Ok(Potential {
        eval: Arc::new(move |x| kappa * radius(x).ln_1p()),
        growth: GrowthClass::Logarithmic { kappa },
        description: format!("{kappa} log(1+|x|)"),
    })
}

pub fn make_const(c: f64) -> Result<Potential> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Config(format!("constant potential must be finite and nonnegative, got {c}")));
    }
    Ok(Potential { eval: Arc::new(move |_| c), growth: GrowthClass::Constant { c }, description: format!("{c}") })
}

/// Plateau heights a_1 < a_2 < ... of the radial counterexample, with
/// half-widths r_n = a_n^{-1/α} of the ramps joining them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    pub a: Vec<f64>,
    pub r: Vec<f64>,
}

impl CounterexampleSpec {
    pub fn new(a: Vec<f64>, alpha: f64) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::Config("counterexample needs at least two plateau heights".into()));
        }
        if !(a[0] > 2f64.powf(alpha)) {
            return Err(Error::Config(format!("a_1 = {} must exceed 2^alpha = {}", a[0], 2f64.powf(alpha))));
        }
        if a.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("counterexample heights must be strictly increasing".into()));
        }
        let ratios: Vec<f64> = a.windows(2).map(|w| w[1] / w[0]).collect();
        if ratios.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("ratios a_(n+1)/a_n must be strictly increasing".into()));
        }
        let r: Vec<f64> = a.iter().map(|v| v.powf(-1.0 / alpha)).collect();
        for (n, w) in r.windows(2).enumerate() {
            if w[0] + w[1] >= 1.0 {
                return Err(Error::Config(format!("bands overlap at n = {}: r_n + r_(n+1) = {} >= 1", n + 1, w[0] + w[1])));
            }
        }
        Ok(CounterexampleSpec { a, r })
    }

    /// a_n = 2^{α + n²}, n = 1..=terms.
    pub fn default_sequence(alpha: f64, terms: usize) -> Result<Self> {
        let a = (1..=terms).map(|n| 2f64.powf(alpha + (n * n) as f64)).collect();
        Self::new(a, alpha)
    }

    pub fn terms(&self) -> usize {
        self.a.len()
    }

    /// |x_n| = n - 1 + 2 r_n, a point of the n-th plateau.
    pub fn probe_radius(&self, n: usize) -> f64 {
        n as f64 - 1.0 + 2.0 * self.r[n - 1]
    }

    /// Radial profile; the last plateau is continued to infinity.
    pub fn radial(&self, s: f64) -> f64 {
        let big_n = self.a.len();
        let k = s.round();
        if k >= 1.0 && (k as usize) < big_n {
            let n = k as usize;
            let (an, an1, rn1) = (self.a[n - 1], self.a[n], self.r[n]);
            if (s - k).abs() <= rn1 {
                return (an1 - an) / (2.0 * rn1) * (s - k + rn1) + an;
            }
        }
        let plateau = ((s.floor() as usize) + 1).clamp(1, big_n);
        self.a[plateau - 1]
    }
}

pub fn make_counterexample(spec: &CounterexampleSpec) -> Potential {
    let s = spec.clone();
    Potential {
        eval: Arc::new(move |x| s.radial(radius(x))),
        growth: GrowthClass::Counterexample { sequence: spec.a.clone() },
        description: format!("counterexample ({} plateaus)", spec.terms()),
    }
}

/// Probe points on the first axis of R^d, spacing `step`, covering [-R, R].
pub fn line_probes(d: usize, r: f64, step: f64) -> Vec<Vec<f64>> {
    let n = (r / step).round() as i64;
    (-n..=n)
        .map(|i| {
            let mut x = vec![0.0; d];
            x[0] = i as f64 * step;
            x
        })
        .collect()
}

/// Smallest M ≥ 1 with (1+q(y)) ≤ M (1+q(x)) over probe pairs |x - y| ≤ 1.
pub fn comparability_constant(q: &Potential, probes: &[Vec<f64>]) -> f64 {
    let vals: Vec<f64> = probes.iter().map(|x| 1.0 + q.value(x)).collect();
    let mut m: f64 = 1.0;
    for (i, x) in probes.iter().enumerate() {
        for (j, y) in probes.iter().enumerate().skip(i + 1) {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 <= 1.0 + 1e-12 {
                m = m.max(vals[i] / vals[j]).max(vals[j] / vals[i]);
            }
        }
    }
    m
}
