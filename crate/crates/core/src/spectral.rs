//! Dense one-dimensional discretization of (-Δ)^{α/2} + q on [-L, L] with
//! zero exterior values, its ground state and its spectral heat kernel.

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::stable::{StableModel, SUPPORTED_ALPHA};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub half_width: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) || n < 3 {
            return Err(Error::Config(format!("grid needs L > 0 and n >= 3, got L = {half_width}, n = {n}")));
        }
        Ok(Grid1D { half_width, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n + 1) as f64
    }

    /// x_i = -L + i h, i = 1..=n; computed from the centre so the nodes are
    /// exactly symmetric.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        let mid = (self.n as f64 + 1.0) / 2.0;
        (1..=self.n).map(|i| (i as f64 - mid) * h).collect()
    }
}

#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub matrix: DMatrix<f64>,
    pub grid: Grid1D,
    pub alpha: f64,
    pub scheme: Scheme,
    pub potential: String,
    pub q_nodes: Vec<f64>,
}

/// Antiderivative pair with G'' = z^{-1-α}.
fn g_prime(alpha: f64, z: f64) -> f64 {
    -z.powf(-alpha) / alpha
}

fn g(alpha: f64, z: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-14 {
        -z.ln()
    } else {
        z.powf(1.0 - alpha) / (alpha * (alpha - 1.0))
    }
}

/// Far-field weights w_k = ∫_{|z| ≥ h} φ_k(z) z^{-1-α} dz for the hat φ_k
/// centred at kh (only the outer half for k = 1). Σ_k w_k = h^{-α}/α.
fn far_weights(alpha: f64, h: f64, count: usize) -> Vec<f64> {
    let mut w = vec![0.0; count + 1];
    if count == 0 {
        return w;
    }
    w[1] = -g_prime(alpha, h) + (g(alpha, 2.0 * h) - g(alpha, h)) / h;
    for (k, wk) in w.iter_mut().enumerate().skip(2) {
        let kf = k as f64;
        // second difference of G, rearranged to limit cancellation
        let a = g(alpha, (kf + 1.0) * h) - g(alpha, kf * h);
        let b = g(alpha, kf * h) - g(alpha, (kf - 1.0) * h);
        *wk = (a - b) / h;
    }
    w
}

/// Discretization of the nonlocal part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scheme {
    /// Fractional centred difference: weights g_k with symbol
    /// (2 sin(ξh/2))^α / h^α, second order on smooth functions.
    #[default]
    CenteredDifference,
    /// Singular-integral quadrature: exact near-field second difference on
    /// |z| < h plus exact hat-function weights on |z| ≥ h; order 2 - α.
    Quadrature,
}

fn centered_difference_weights(alpha: f64, count: usize) -> Vec<f64> {
    let mut g = vec![0.0; count + 1];
    g[0] = libm::tgamma(alpha + 1.0) / libm::tgamma(alpha / 2.0 + 1.0).powi(2);
    for k in 0..count {
        let kf = k as f64;
        g[k + 1] = g[k] * (kf - alpha / 2.0) / (kf + alpha / 2.0 + 1.0);
    }
    g
}

/// H = (nonlocal part) + diag(q), with f = 0 outside the grid.
///
/// Quadrature row i:
/// 𝒜[h^{-α}/(2-α) (2f_i - f_{i-1} - f_{i+1}) + Σ_{k≥1} w_k (2f_i - f_{i-k} - f_{i+k})],
/// so its diagonal is 𝒜 h^{-α}(2/(2-α) + 2/α).
pub fn assemble_operator(grid: &Grid1D, alpha: f64, q: &Potential) -> Result<DiscretizedOperator> {
    assemble_operator_with(grid, alpha, q, Scheme::default())
}

pub fn assemble_operator_with(grid: &Grid1D, alpha: f64, q: &Potential, scheme: Scheme) -> Result<DiscretizedOperator> {
    if !(alpha >= SUPPORTED_ALPHA.0 && alpha <= SUPPORTED_ALPHA.1) {
        return Err(Error::Config(format!("alpha = {alpha} outside the supported range [{}, {}]", SUPPORTED_ALPHA.0, SUPPORTED_ALPHA.1)));
    }
    let n = grid.n;
    let h = grid.spacing();
    let (diag, off) = match scheme {
        Scheme::CenteredDifference => {
            let g = centered_difference_weights(alpha, n);
            let s = h.powf(-alpha);
            (g[0] * s, g.iter().map(|v| v * s).collect::<Vec<f64>>())
        }
        Scheme::Quadrature => {
            let m = StableModel::new(1, alpha)?;
            let near = h.powf(-alpha) / (2.0 - alpha);
            let w = far_weights(alpha, h, n);
            let mut off = vec![0.0; n];
            off[1] = -m.a_const * (near + w[1]);
            for k in 2..n {
                off[k] = -m.a_const * w[k];
            }
            (m.a_const * 2.0 * h.powf(-alpha) * (1.0 / (2.0 - alpha) + 1.0 / alpha), off)
        }
    };
    let nodes = grid.nodes();
    let q_nodes: Vec<f64> = nodes.iter().map(|&x| q.value(&[x])).collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| if i == j { diag + q_nodes[i] } else { off[i.abs_diff(j)] });
    Ok(DiscretizedOperator { matrix, grid: *grid, alpha, scheme, potential: q.description().to_string(), q_nodes })
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// Normalized with h Σ φ_i² = 1, strictly positive.
    pub phi: Vec<f64>,
    /// ‖Hφ - λφ‖ in the same grid norm.
    pub residual: f64,
    pub iterations: usize,
}

fn grid_norm(v: &DVector<f64>, h: f64) -> f64 {
    (h * v.norm_squared()).sqrt()
}

/// Inverse power iteration with shift 0 from the all-ones vector.
pub fn ground_state(op: &DiscretizedOperator, tol: f64) -> Result<EigenPair> {
    const MAX_ITER: usize = 10_000;
    let n = op.grid.n;
    let h = op.grid.spacing();
    let chol = op.matrix.clone().cholesky().ok_or_else(|| Error::Solver { iterations: 0, history: vec![f64::NAN] })?;
    let mut v = DVector::from_element(n, 1.0);
    v /= grid_norm(&v, h);
    let mut history = Vec::new();
    for it in 1..=MAX_ITER {
        chol.solve_mut(&mut v);
        v /= grid_norm(&v, h);
        let hv = &op.matrix * &v;
        let lambda = v.dot(&hv) / v.norm_squared();
        let residual = grid_norm(&(hv - lambda * &v), h);
        history.push(residual);
        if residual <= tol {
            if v.sum() < 0.0 {
                v.neg_mut();
            }
            if v.iter().any(|&x| x <= 0.0) {
                return Err(Error::Solver { iterations: it, history });
            }
            return Ok(EigenPair { lambda, phi: v.iter().copied().collect(), residual, iterations: it });
        }
    }
    Err(Error::Solver { iterations: MAX_ITER, history })
}

/// Full eigendecomposition, ascending, with grid-normalized vectors and a
/// positive first mode.
#[derive(Debug, Clone)]
pub struct Modes {
    pub grid: Grid1D,
    pub lambdas: Vec<f64>,
    /// Column m holds φ_m at the nodes.
    pub vectors: DMatrix<f64>,
}

pub fn modes(op: &DiscretizedOperator) -> Modes {
    let h = op.grid.spacing();
    let eig = SymmetricEigen::new(op.matrix.clone());
    let mut order: Vec<usize> = (0..op.grid.n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambdas = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = eig.eigenvectors.select_columns(&order);
    vectors /= h.sqrt();
    if vectors.column(0).sum() < 0.0 {
        vectors.column_mut(0).neg_mut();
    }
    Modes { grid: op.grid, lambdas, vectors }
}

impl Modes {
    /// Σ_{m>k} e^{-λ_m t} max_i φ_m(x_i)²: bounds the entrywise error of
    /// keeping k modes.
    pub fn truncation_bound(&self, t: f64, k: usize) -> f64 {
        (k..self.lambdas.len())
            .map(|m| {
                let mx = self.vectors.column(m).amax();
                (-self.lambdas[m] * t).exp() * mx * mx
            })
            .sum()
    }

    /// u(t, x_i, x_j) = Σ_{m<k} e^{-λ_m t} φ_m(x_i) φ_m(x_j).
    pub fn kernel(&self, t: f64, k: usize, tol: f64) -> Result<DMatrix<f64>> {
        if !(t > 0.0) || k == 0 || k > self.lambdas.len() {
            return Err(Error::Config(format!("need t > 0 and 1 <= k <= n, got t = {t}, k = {k}")));
        }
        let bound = self.truncation_bound(t, k);
        if bound > tol {
            return Err(Error::Truncation { bound, tol });
        }
        let v = self.vectors.columns(0, k);
        let scale = DVector::from_iterator(k, self.lambdas[..k].iter().map(|l| (-l * t).exp()));
        let scaled = DMatrix::from_fn(self.grid.n, k, |i, m| v[(i, m)] * scale[m]);
        let u = &scaled * v.transpose();
        // symmetrize the rounding of the product
        Ok(DMatrix::from_fn(self.grid.n, self.grid.n, |i, j| if i <= j { u[(i, j)] } else { u[(j, i)] }))
    }

    /// (T_t 1)(x_i) = Σ_{m<k} e^{-λ_m t} φ_m(x_i) h Σ_j φ_m(x_j).
    pub fn semigroup_mass(&self, t: f64, k: usize) -> Vec<f64> {
        let h = self.grid.spacing();
        let mut out = vec![0.0; self.grid.n];
        for m in 0..k.min(self.lambdas.len()) {
            let col = self.vectors.column(m);
            let c = (-self.lambdas[m] * t).exp() * h * col.sum();
            out.iter_mut().zip(col.iter()).for_each(|(o, p)| *o += c * p);
        }
        out
    }

    /// Number of modes with e^{-λ_m t} above `rel` times the first.
    pub fn modes_needed(&self, t: f64, rel: f64) -> usize {
        let l0 = self.lambdas[0];
        self.lambdas.iter().take_while(|&&l| (-(l - l0) * t).exp() > rel).count().max(1)
    }
}

/// Linear interpolation of a node function; zero outside [-L, L].
pub fn interpolate(grid: &Grid1D, values: &[f64], x: f64) -> f64 {
    let h = grid.spacing();
    let s = (x + grid.half_width) / h;
    if !(s > 0.0 && s < (grid.n + 1) as f64) {
        return 0.0;
    }
    let i = s.floor() as usize;
    let frac = s - i as f64;
    let at = |k: usize| if k == 0 || k > grid.n { 0.0 } else { values[k - 1] };
    at(i) * (1.0 - frac) + at(i + 1) * frac
}

#[derive(Debug, Clone)]
pub struct EnvelopeProfile {
    pub x: Vec<f64>,
    pub ratio: Vec<f64>,
    /// max ratio / min ratio over the window.
    pub dispersion: f64,
}

/// ρ(x_i) = φ₁(x_i) (1 + q(x_i)) (1 + |x_i|)^{1+α} for |x_i| ≤ R.
pub fn envelope_ratio_profile(grid: &Grid1D, pair: &EigenPair, q: &Potential, alpha: f64, window: f64) -> Result<EnvelopeProfile> {
    if !(window > 0.0) || window > grid.half_width / 2.0 {
        return Err(Error::Config(format!("window {window} must lie in (0, L/2] with L = {}", grid.half_width)));
    }
    let (mut x, mut ratio) = (Vec::new(), Vec::new());
    for (xi, p) in grid.nodes().into_iter().zip(&pair.phi) {
        if xi.abs() <= window {
            x.push(xi);
            ratio.push(p * (1.0 + q.value(&[xi])) * (1.0 + xi.abs()).powf(1.0 + alpha));
        }
    }
    let mx = ratio.iter().copied().fold(f64::MIN, f64::max);
    let mn = ratio.iter().copied().fold(f64::MAX, f64::min);
    Ok(EnvelopeProfile { x, ratio, dispersion: mx / mn })
}

/// sup over |x_i|, |x_j| ≤ R of u(t,x_i,x_j) / (φ₁(x_i) φ₁(x_j)).
pub fn iu_ratio_statistic(modes: &Modes, t: f64, window: f64, tol: f64) -> Result<f64> {
    let k = modes.modes_needed(t, 1e-16);
    let u = modes.kernel(t, k, tol)?;
    let phi = modes.vectors.column(0);
    let idx: Vec<usize> = modes.grid.nodes().iter().enumerate().filter(|(_, x)| x.abs() <= window).map(|(i, _)| i).collect();
    let mut sup: f64 = 0.0;
    for &i in &idx {
        for &j in &idx {
            sup = sup.max(u[(i, j)] / (phi[i] * phi[j]));
        }
    }
    Ok(sup)
}

/// CSV with a `#` metadata line, then `x,phi`.
pub fn write_ground_state_csv<W: Write>(mut w: W, grid: &Grid1D, pair: &EigenPair, meta: &str) -> Result<()> {
    writeln!(w, "# {meta} L={} n={} lambda={:.12e} residual={:.3e}", grid.half_width, grid.n, pair.lambda, pair.residual)?;
    writeln!(w, "x,phi")?;
    for (x, p) in grid.nodes().iter().zip(&pair.phi) {
        writeln!(w, "{x:.12e},{p:.12e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{make_const, make_power};
    use crate::quad;

    #[test]
    fn far_weights_sum_to_tail_integral() {
        for &alpha in &[0.5, 1.0, 1.5] {
            let h = 0.1;
            let w = far_weights(alpha, h, 200_000);
            let tail_w = w.iter().sum::<f64>();
            // hats beyond the last node carry ∫_{(K+1)h}^∞ plus half of the last hat, roughly
            let k = 200_000.0;
            let rest = ((k + 0.5) * h).powf(-alpha) / alpha;
            assert!((tail_w + rest - h.powf(-alpha) / alpha).abs() < 1e-6 * h.powf(-alpha), "alpha {alpha}");
            // one weight against direct quadrature
            let direct =
                quad::integrate(|z| (1.0 - (z / h - 3.0).abs()) * z.powf(-1.0 - alpha), 2.0 * h, 3.0 * h, 0.0, 1e-13).unwrap().value
                    + quad::integrate(|z| (1.0 - (z / h - 3.0).abs()) * z.powf(-1.0 - alpha), 3.0 * h, 4.0 * h, 0.0, 1e-13).unwrap().value;
            assert!((w[3] - direct).abs() < 1e-10 * direct);
        }
    }

    #[test]
    fn structure_and_shift() {
        for scheme in [Scheme::CenteredDifference, Scheme::Quadrature] {
            structure_and_shift_for(scheme);
        }
    }

    fn structure_and_shift_for(scheme: Scheme) {
        let grid = Grid1D::new(5.0, 40).unwrap();
        let op = assemble_operator_with(&grid, 1.2, &make_const(0.0).unwrap(), scheme).unwrap();
        let a = &op.matrix;
        for i in 0..40 {
            let mut off = 0.0;
            for j in 0..40 {
                assert_eq!(a[(i, j)], a[(j, i)]);
                if i != j {
                    assert!(a[(i, j)] < 0.0);
                    off += a[(i, j)].abs();
                }
            }
            assert!(a[(i, i)] >= off);
        }
        let shifted = assemble_operator_with(&grid, 1.2, &make_const(2.5).unwrap(), scheme).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let want = a[(i, j)] + if i == j { 2.5 } else { 0.0 };
                assert_eq!(shifted.matrix[(i, j)], want);
            }
        }
        assert!(assemble_operator(&grid, 1.95, &make_const(0.0).unwrap()).is_err());
        assert!(Grid1D::new(1.0, 2).is_err());
        let nodes = grid.nodes();
        assert!(nodes.iter().zip(nodes.iter().rev()).all(|(a, b)| a == &-b));
    }

    #[test]
    fn centered_difference_weights_match_levy_tail() {
        // g_k k^{1+α} → 𝒜 for the symbol |ξ|^α
        for &alpha in &[0.5, 1.0, 1.5] {
            let g = centered_difference_weights(alpha, 20_000);
            let a = StableModel::new(1, alpha).unwrap().a_const;
            let k: f64 = 20_000.0;
            assert!((-g[20_000] * k.powf(1.0 + alpha) / a - 1.0).abs() < 1e-3, "alpha {alpha}");
            // the full row sums to the symbol at ξ = 0; the part beyond k is 2𝒜 k^{-α}/α
            let partial = g[0] + 2.0 * g[1..].iter().sum::<f64>();
            let tail = 2.0 * a * k.powf(-alpha) / alpha;
            assert!((partial / tail - 1.0).abs() < 1e-3, "alpha {alpha}: {partial} vs {tail}");
        }
    }

    #[test]
    fn free_eigenvalue_scaling() {
        for scheme in [Scheme::CenteredDifference, Scheme::Quadrature] {
            for &alpha in &[0.6, 1.0, 1.5] {
                let q = make_const(0.0).unwrap();
                let l1 = ground_state(&assemble_operator_with(&Grid1D::new(1.0, 200).unwrap(), alpha, &q, scheme).unwrap(), 1e-9)
                    .unwrap()
                    .lambda;
                let l2 = ground_state(&assemble_operator_with(&Grid1D::new(2.0, 200).unwrap(), alpha, &q, scheme).unwrap(), 1e-9)
                    .unwrap()
                    .lambda;
                assert!((l2 / l1 - 2f64.powf(-alpha)).abs() < 1e-8, "alpha {alpha}: {}", l2 / l1);
            }
        }
    }

    #[test]
    fn free_interval_eigenvalue_against_known_value() {
        // first Dirichlet eigenvalue of the fractional Laplacian on (-1,1):
        // α = 1 gives 1.1577738...
        let q = make_const(0.0).unwrap();
        for scheme in [Scheme::CenteredDifference, Scheme::Quadrature] {
            let lam =
                ground_state(&assemble_operator_with(&Grid1D::new(1.0, 800).unwrap(), 1.0, &q, scheme).unwrap(), 1e-10).unwrap().lambda;
            assert!((lam - 1.1577738).abs() < 5e-3, "{scheme:?}: {lam}");
        }
    }

    #[test]
    fn ground_state_invariants_and_identities() {
        let grid = Grid1D::new(8.0, 300).unwrap();
        let q2 = make_power(2.0).unwrap();
        let op = assemble_operator(&grid, 1.0, &q2).unwrap();
        let p = ground_state(&op, 1e-9).unwrap();
        let h = grid.spacing();
        assert!(p.residual <= 1e-9);
        assert!(p.phi.iter().all(|&x| x > 0.0));
        assert!((h * p.phi.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted = ground_state(&assemble_operator(&grid, 1.0, &q2.shifted(3.0).unwrap()).unwrap(), 1e-9).unwrap();
        assert!((shifted.lambda - p.lambda - 3.0).abs() < 1e-8);
        let q1 = make_power(1.0).unwrap();
        let p1 = ground_state(&assemble_operator(&grid, 1.0, &q1).unwrap(), 1e-9).unwrap();
        let bigger = Potential::custom("max(|x|, x²)", |x: &[f64]| x[0].abs().max(x[0] * x[0]));
        let pb = ground_state(&assemble_operator(&grid, 1.0, &bigger).unwrap(), 1e-9).unwrap();
        assert!(p1.lambda <= pb.lambda && p.lambda <= pb.lambda);
        let full = modes(&op);
        assert!((full.lambdas[0] - p.lambda).abs() < 1e-8);
    }

    #[test]
    fn kernel_symmetry_and_chapman_kolmogorov() {
        let grid = Grid1D::new(6.0, 150).unwrap();
        let op = assemble_operator(&grid, 1.0, &make_power(2.0).unwrap()).unwrap();
        let md = modes(&op);
        let n = grid.n;
        let u1 = md.kernel(0.5, n, 1e-8).unwrap();
        let u2 = md.kernel(1.0, n, 1e-8).unwrap();
        assert_eq!(u1, u1.transpose());
        let composed = &u1 * &u1 * grid.spacing();
        let rel = (&composed - &u2).amax() / u2.amax();
        assert!(rel < 1e-10, "{rel}");
        assert!(matches!(md.kernel(0.5, 2, 1e-8), Err(Error::Truncation { .. })));
    }

    #[test]
    fn long_time_kernel_approaches_ground_state_product() {
        let grid = Grid1D::new(6.0, 150).unwrap();
        let op = assemble_operator(&grid, 1.0, &make_power(2.0).unwrap()).unwrap();
        let md = modes(&op);
        let t = 7.0 / (md.lambdas[1] - md.lambdas[0]);
        let u = md.kernel(t, grid.n, 1e-8).unwrap();
        let phi = md.vectors.column(0);
        let mut worst: f64 = 0.0;
        for i in (0..grid.n).step_by(10) {
            for j in (0..grid.n).step_by(10) {
                let lim = phi[i] * phi[j];
                worst = worst.max(((md.lambdas[0] * t).exp() * u[(i, j)] - lim).abs() / lim);
            }
        }
        assert!(worst < 0.01, "{worst}");
    }

    #[test]
    fn envelope_profile_window_checks() {
        let grid = Grid1D::new(10.0, 200).unwrap();
        let q = make_const(1.0).unwrap();
        let p = ground_state(&assemble_operator(&grid, 1.0, &q).unwrap(), 1e-9).unwrap();
        assert!(envelope_ratio_profile(&grid, &p, &q, 1.0, 6.0).is_err());
        let prof = envelope_ratio_profile(&grid, &p, &q, 1.0, 5.0).unwrap();
        assert!(prof.dispersion.is_finite() && prof.dispersion >= 1.0);
        let (i, _) = prof.x.iter().enumerate().min_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap();
        let want = 2.0 * interpolate(&grid, &p.phi, prof.x[i]) * (1.0 + prof.x[i].abs()).powi(2);
        assert!((prof.ratio[i] - want).abs() < 1e-12 * want);
    }

    #[test]
    fn csv_export() {
        let grid = Grid1D::new(4.0, 5).unwrap();
        let p = ground_state(&assemble_operator(&grid, 1.0, &make_const(0.0).unwrap()).unwrap(), 1e-10).unwrap();
        let mut buf = Vec::new();
        write_ground_state_csv(&mut buf, &grid, &p, "test").unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# test L=4 n=5"));
        assert_eq!(s.lines().count(), 7);
    }
}
