//! Adaptive Gauss-Kronrod quadrature on finite and semi-infinite intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive G7-K15 integration of `f` over `[a, b]`.
///
/// Stops once the summed error estimate is below
/// `max(abs_tol, rel_tol * |value|)`. Fails with the achieved error when the
/// subdivision budget is exhausted.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral> {
    integrate_with_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// Like [`integrate`], but starting from the given breakpoints (sorted).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Result<Integral> {
    const MAX_INTERVALS: usize = 4000;
    let mut pieces: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    if pieces.is_empty() {
        return Ok(Integral { value: 0.0, abs_error: 0.0 });
    }
    loop {
        let value: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature { residual: f64::INFINITY });
        }
        if err <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Integral { value, abs_error: err });
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { residual: err });
        }
        let (worst, _) = pieces.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("nonempty");
        let (a, b, _, _) = pieces.swap_remove(worst);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return Err(Error::Quadrature { residual: err });
        }
        let (v1, e1) = gk15(&f, a, m);
        let (v2, e2) = gk15(&f, m, b);
        pieces.push((a, m, v1, e1));
        pieces.push((m, b, v2, e2));
    }
}

/// Integral of `f` over `[a, inf)` through the map `x = a + s/(1-s)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral> {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        let x = a + s / one_minus;
        let v = f(x) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, abs_tol, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((r.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // int_0^1 x^{-1/2} dx = 2
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-10, 1e-10).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn semi_infinite() {
        let r = integrate_to_infinity(|x: f64| 1.0 / (1.0 + x * x), 0.0, 1e-12, 1e-12).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }
}
