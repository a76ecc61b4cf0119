//! Adaptive Gauss-Kronrod quadrature.
//!
//! Global adaptive 7/15-point Gauss-Kronrod integration: the subinterval with
//! the largest error estimate is bisected until the summed error estimate
//! meets the tolerance. Semi-infinite ranges are mapped onto `[0, 1)`.

use alloc::vec::Vec;

use crate::{Error, Result};

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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and subdivision budget.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        QuadOptions {
            abs_tol: tol,
            rel_tol: tol,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let sum = f(center - dx) + f(center + dx);
        kronrod += w * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// Returns [`Error::Integration`] when the error estimate does not meet the
/// tolerance within the subdivision budget or when `f` produces non-finite
/// values.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, opts).map(|v| -v);
    }
    let first = kronrod(&f, a, b);
    let mut segments: Vec<Segment> = Vec::with_capacity(64);
    segments.push(first);
    let mut total = first.value;
    let mut error = first.error;
    loop {
        if !total.is_finite() || !error.is_finite() {
            return Err(Error::Integration {
                estimate: total,
                error,
            });
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if error <= target {
            return Ok(total);
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::Integration {
                estimate: total,
                error,
            });
        }
        let (worst, _) =
            segments
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, be), (i, s)| {
                    if s.error > be {
                        (i, s.error)
                    } else {
                        (bi, be)
                    }
                });
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // The interval cannot be split further in floating point.
            return if error <= 1e3 * target {
                Ok(total)
            } else {
                Err(Error::Integration {
                    estimate: total,
                    error,
                })
            };
        }
        let left = kronrod(&f, seg.a, mid);
        let right = kronrod(&f, mid, seg.b);
        total += left.value + right.value - seg.value;
        error += left.error + right.error - seg.error;
        segments.push(left);
        segments.push(right);
        // Re-sum occasionally to keep cancellation from drifting the totals.
        if segments.len() % 64 == 0 {
            total = segments.iter().map(|s| s.value).sum();
            error = segments.iter().map(|s| s.error).sum();
        }
    }
}

/// Integrates `f` over `[a, ∞)` through the substitution `x = a + u/(1-u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, opts: QuadOptions) -> Result<f64> {
    let mapped = |u: f64| {
        let one_minus = 1.0 - u;
        let x = a + u / one_minus;
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v / (one_minus * one_minus)
        }
    };
    integrate(mapped, 0.0, 1.0, opts)
}

/// Composite Simpson rule on `n` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn polynomials_and_transcendentals() {
        let o = QuadOptions::default();
        let v = integrate(|x| x * x, 0.0, 3.0, o).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(|x: f64| x.sin(), 0.0, PI, o).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate(|x: f64| x.sin(), PI, 0.0, o).unwrap();
        assert!((v + 2.0).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite() {
        let o = QuadOptions::default();
        let v = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, o).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let v = integrate_to_infinity(|y: f64| 3.0 * y.powi(-2), 1.0, o).unwrap();
        assert!((v - 3.0).abs() < 1e-9);
    }

    #[test]
    fn divergent_integral_is_reported() {
        let o = QuadOptions::default();
        assert!(matches!(
            integrate_to_infinity(|y: f64| 3.0 / y, 1.0, o),
            Err(Error::Integration { .. })
        ));
    }

    #[test]
    fn integrable_singularity() {
        let o = QuadOptions::with_tol(1e-9);
        let v = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, o).unwrap();
        assert!((v - 2.0).abs() < 1e-7);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x, 0.0, 2.0, 4);
        assert!((v - 4.0).abs() < 1e-12);
    }
}
