//! Replica accumulation and the small set of goodness-of-fit statistics the
//! estimators are validated with.

use serde::Serialize;

/// Streaming mean/variance over replica values, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &Accumulator) -> Accumulator {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / n as f64;
        Accumulator { count: n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self, seed: u64) -> MCEstimate {
        MCEstimate { mean: self.mean, stderr: (self.variance() / self.count.max(1) as f64).sqrt(), n: self.count, seed }
    }
}

/// Reduce a sequence of partial accumulators by balanced pairwise merging.
/// The tree shape depends only on the number of parts.
pub fn merge_pairwise(mut parts: Vec<Accumulator>) -> Accumulator {
    if parts.is_empty() {
        return Accumulator::default();
    }
    while parts.len() > 1 {
        parts = parts.chunks(2).map(|c| if c.len() == 2 { c[0].merge(&c[1]) } else { c[0] }).collect();
    }
    parts[0]
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

impl MCEstimate {
    pub fn exact(value: f64, n: u64, seed: u64) -> Self {
        Self { mean: value, stderr: 0.0, n, seed }
    }

    /// `|mean - target| <= k * stderr + slack`.
    pub fn agrees_with(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + slack
    }

    /// Standard error of the difference of two independent estimates.
    pub fn joint_stderr(&self, other: &MCEstimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_two_sample_critical_1pct(na: usize, nb: usize) -> f64 {
    1.628 * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

/// Pearson chi-square statistic of observed counts against expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum()
}

/// Upper 1% quantile of the chi-square law with `dof` degrees of freedom
/// (Wilson-Hilferty).
pub fn chi_square_critical_1pct(dof: usize) -> f64 {
    let k = dof as f64;
    let z = 2.326_347_874_040_841;
    let c = 2.0 / (9.0 * k);
    k * (1.0 - c + z * c.sqrt()).powi(3)
}
