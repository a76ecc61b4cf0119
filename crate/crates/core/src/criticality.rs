//! Drift criteria for extinction and survival, and tree-length tails.
//!
//! The asymptotic criteria compare `b(x) m(x)` with 1 as `x → ∞`. Any finite
//! scan is only a surrogate for a limit, so every verdict comes with the scan
//! values and a stabilization diagnostic.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::model::{LifetimeKernel, Model, RateFunction};
use crate::quad::{self, QuadOptions};
use crate::replicas::Replicas;
use crate::rng::replica_rng;
use crate::stats::wilson_interval;
use crate::tree::{simulate_tree_with, TreeOptions};
use crate::{Error, Result};

/// Margin required on both sides of 1 before a strict inequality is trusted.
pub const VERDICT_MARGIN: f64 = 0.05;

/// Relative change between the two tail quarters below which a scan counts as
/// stabilized.
pub const STABILIZATION_TOL: f64 = 0.01;

/// Outcome of the asymptotic drift criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// `limsup b·m < 1`: the tree is not supercritical.
    SubcriticalSufficient,
    /// `liminf b·m > 1` with a finite second-moment check: the tree is supercritical.
    SupercriticalSufficient,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalityReport {
    /// `(x, b(x) m(x))` over the scan.
    pub scan: Vec<(f64, f64)>,
    /// Max of `b·m` over the tail half of the scan.
    pub limsup: f64,
    /// Min of `b·m` over the tail half of the scan.
    pub liminf: f64,
    /// Relative change of the mean of `b·m` between the last two quarters.
    pub stabilization: f64,
    pub stabilized: bool,
    /// `sup_{x >= 1} b(x) m_2(x) / x` over the scan.
    pub second_moment_check: f64,
    /// Max over the tail half of `∫_0^x (m b - 1) e^{-∫_s^x b} ds`.
    pub integral_condition_value: f64,
    pub verdict: Verdict,
    /// Why the verdict is inconclusive, when a definite cause is known.
    pub reason: Option<String>,
}

/// `b(x) m(x) - 1`, or the periodic driver `cos x + offset` for a periodic rate.
pub fn drift_excess(model: &Model, x: f64) -> f64 {
    match model.rate {
        RateFunction::Periodic { offset, .. } => x.cos() + offset,
        _ => model.drift_product(x) - 1.0,
    }
}

/// Evaluates the asymptotic criteria on the scan grid `scan` (increasing).
pub fn classify_asymptotic(model: &Model, scan: &[f64]) -> Result<CriticalityReport> {
    if scan.len() < 4 {
        return Err(Error::invalid("scan", "need at least 4 scan points"));
    }
    if scan.windows(2).any(|w| w[1] <= w[0]) || scan[0] < 0.0 {
        return Err(Error::invalid("scan", "must be increasing and nonnegative"));
    }
    let values: Vec<(f64, f64)> = scan
        .iter()
        .map(|&x| (x, 1.0 + drift_excess(model, x)))
        .collect();
    let n = values.len();
    let tail = &values[n / 2..];
    let limsup = tail.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let liminf = tail.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let quarter =
        |lo: usize, hi: usize| values[lo..hi].iter().map(|v| v.1).sum::<f64>() / (hi - lo) as f64;
    let q3 = quarter(n / 2, (3 * n) / 4);
    let q4 = quarter((3 * n) / 4, n);
    let stabilization = if q3.is_finite() && q4.is_finite() {
        (q4 - q3).abs() / q3.abs().max(1e-12)
    } else {
        f64::INFINITY
    };
    let second_moment_check = scan
        .iter()
        .filter(|&&x| x >= 1.0)
        .map(|&x| {
            let b = model.rate.rate(x);
            if b == 0.0 {
                0.0
            } else {
                b * model.kernel.moment(x, 2) / x
            }
        })
        .fold(0.0, f64::max);
    let x_max = scan[n - 1];
    let max_rate = scan.iter().map(|&x| model.rate.rate(x)).fold(0.0, f64::max);
    let mesh = (0.1 / max_rate.max(1e-12)).min(x_max / 200.0);
    let integral_condition_value = if values.iter().all(|v| v.1.is_finite()) {
        integral_drift_scan(model, x_max, mesh)?
    } else {
        f64::INFINITY
    };

    let mut reason = None;
    let verdict = if values.iter().any(|v| !v.1.is_finite()) {
        reason = Some(String::from("infinite mean lifetime at some scan point"));
        Verdict::Inconclusive
    } else if limsup < 1.0 - VERDICT_MARGIN {
        Verdict::SubcriticalSufficient
    } else if liminf > 1.0 + VERDICT_MARGIN {
        if second_moment_check.is_finite() {
            Verdict::SupercriticalSufficient
        } else {
            reason = Some(String::from("sup b·m2/x is infinite"));
            Verdict::Inconclusive
        }
    } else {
        reason = Some(format!(
            "b·m within the margin of 1 on the tail of the scan: [{liminf}, {limsup}]"
        ));
        Verdict::Inconclusive
    };
    Ok(CriticalityReport {
        scan: values,
        limsup,
        liminf,
        stabilization,
        stabilized: stabilization < STABILIZATION_TOL,
        second_moment_check,
        integral_condition_value,
        verdict,
        reason,
    })
}

/// `(x, ∫_0^x (m(s)b(s) - 1) e^{-∫_s^x b} ds)` on the grid `x = k·mesh` up to `x_max`.
pub fn integral_drift_profile(model: &Model, x_max: f64, mesh: f64) -> Result<Vec<(f64, f64)>> {
    if !(mesh > 0.0) || !(x_max > mesh) {
        return Err(Error::invalid("mesh", "need 0 < mesh < x_max"));
    }
    let steps = (x_max / mesh).ceil() as usize;
    let h = x_max / steps as f64;
    let rate = &model.rate;
    let mut out = Vec::with_capacity(steps + 1);
    let mut value = 0.0;
    out.push((0.0, 0.0));
    for k in 0..steps {
        let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
        if rate.rate(a) * h > 0.1 + 1e-12 {
            return Err(Error::invalid(
                "mesh",
                "mesh must be at most 0.1 / b on the scan",
            ));
        }
        let local = quad::simpson(
            |s| drift_excess(model, s) * (-rate.cumulative_unchecked(s, b)).exp(),
            a,
            b,
            8,
        );
        value = (-rate.cumulative_unchecked(a, b)).exp() * value + local;
        out.push((b, value));
    }
    Ok(out)
}

/// Max over the tail half of `[0, x_max]` of the integral in [`integral_drift_profile`].
/// A negative value with margin is sufficient for extinction.
pub fn integral_drift_scan(model: &Model, x_max: f64, mesh: f64) -> Result<f64> {
    let profile = integral_drift_profile(model, x_max, mesh)?;
    let n = profile.len();
    Ok(profile[n / 2..]
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `PV(x) - V(x)` for the post-jump chain,
/// `PV(x) = ∫_0^x (K V(y + ·))(y) b(y) e^{-∫_y^x b} dy + V(0) e^{-∫_0^x b}`.
pub fn discrete_drift<V: Fn(f64) -> f64>(model: &Model, v: V, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let rate = &model.rate;
    let opts = QuadOptions::with_tol(1e-11);
    // A failed inner integral poisons the outer one, which then reports it.
    let integrand = |y: f64| {
        let b = rate.rate(y);
        if b == 0.0 {
            return 0.0;
        }
        match model.kernel.expect(y, |z| v(y + z)) {
            Ok(kv) => kv * b * (-rate.cumulative_unchecked(y, x)).exp(),
            Err(_) => f64::NAN,
        }
    };
    let jumps = quad::integrate(integrand, 0.0, x, opts)?;
    Ok(jumps + v(0.0) * (-rate.primitive(x)).exp() - v(x))
}

/// Periodic asymptote of the integral criterion for `b = beta` and driver
/// `cos t + c`, as displayed for one period `[0, 2π]`:
/// `(-β e^{-βt}(1 + e^{-2πβ}) + β cos t + sin t) / (1 + β²) + c`.
pub fn periodic_phi(beta: f64, c: f64, t: f64) -> f64 {
    (-beta * (-beta * t).exp() * (1.0 + (-2.0 * PI * beta).exp()) + beta * t.cos() + t.sin())
        / (1.0 + beta * beta)
        + c
}

/// `sup_{t ∈ [0, 2π]} periodic_phi(beta, c, t)` by a dense grid and local refinement.
pub fn periodic_sup_phi(beta: f64, c: f64) -> f64 {
    periodic_sup_phi_with(beta, c, 4096, 0.0)
}

/// [`periodic_sup_phi`] on a grid of `points` nodes shifted by `phase` (a
/// fraction of the grid step).
pub fn periodic_sup_phi_with(beta: f64, c: f64, points: usize, phase: f64) -> f64 {
    let period = 2.0 * PI;
    let step = period / points as f64;
    let f = |t: f64| periodic_phi(beta, c, t);
    let mut best_t = 0.0;
    let mut best = f(0.0).max(f(period));
    if f(period) > f(0.0) {
        best_t = period;
    }
    for i in 0..points {
        let t = (i as f64 + (phase - phase.floor())) * step;
        let v = f(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    // Golden-section refinement around the best node.
    let (mut lo, mut hi) = ((best_t - step).max(0.0), (best_t + step).min(period));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-13 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    best.max(f(0.5 * (lo + hi)))
}

/// One row of a tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub threshold: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Lower bound `(1 - e^{-b x0}) t^{-k}` for Pareto lifetimes with a constant
    /// rate (`t >= 1`).
    pub bound_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub rows: Vec<TailRow>,
    /// Decay rate from a log-linear fit of the estimates, for light-tailed kernels.
    pub fitted_decay: Option<f64>,
    pub heavy_tailed: bool,
    pub replicas: usize,
}

/// Monte Carlo estimate of `P_{x0}(L(T) >= t)` at each threshold with Wilson
/// 95% intervals.
///
/// Refuses with [`Error::Regime`] unless the scan over `[0, T]` gives a
/// subcritical-sufficient verdict.
#[allow(clippy::too_many_arguments)]
pub fn length_tail_estimate<E: Replicas>(
    model: &Model,
    x0: f64,
    t_max: f64,
    replicas: usize,
    thresholds: &[f64],
    seed: u64,
    exec: &E,
) -> Result<TailEstimate> {
    let scan: Vec<f64> = (0..=100).map(|i| t_max * i as f64 / 100.0).collect();
    let report = classify_asymptotic(model, &scan)?;
    if report.verdict != Verdict::SubcriticalSufficient {
        return Err(Error::Regime(format!(
            "tail estimates need limsup b·m < 1; scan gives [{}, {}]",
            report.liminf, report.limsup
        )));
    }
    let lengths = exec.run(replicas, |i| {
        let mut rng = replica_rng(seed, i as u64);
        simulate_tree_with(model, x0, t_max, TreeOptions::default(), &mut rng).map(|t| t.length())
    });
    let lengths = lengths.into_iter().collect::<Result<Vec<_>>>()?;
    let heavy_tailed = matches!(model.kernel, LifetimeKernel::Pareto { .. });
    let pareto_bound = match (&model.kernel, model.rate.as_constant()) {
        (LifetimeKernel::Pareto { k }, Some(b)) => Some((*k, b)),
        _ => None,
    };
    let rows: Vec<TailRow> = thresholds
        .iter()
        .map(|&t| {
            let hits = lengths.iter().filter(|&&l| l >= t).count();
            let (ci_low, ci_high) = wilson_interval(hits, replicas, 1.959_963_984_540_054);
            TailRow {
                threshold: t,
                estimate: hits as f64 / replicas as f64,
                ci_low,
                ci_high,
                bound_value: pareto_bound.map(|(k, b)| {
                    if t >= 1.0 {
                        -(-b * x0).exp_m1() * t.powf(-k)
                    } else {
                        0.0
                    }
                }),
            }
        })
        .collect();
    let fitted_decay = if heavy_tailed {
        None
    } else {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.estimate * replicas as f64 >= 10.0 && r.estimate < 1.0)
            .map(|r| (r.threshold, r.estimate.ln()))
            .collect();
        fit_slope(&pts).map(|s| -s)
    };
    Ok(TailEstimate {
        rows,
        fitted_decay,
        heavy_tailed,
        replicas,
    })
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Default scan grid: `points` evenly spaced values on `[0, x_max]`.
pub fn uniform_scan(x_max: f64, points: usize) -> Vec<f64> {
    let mut v = vec![0.0; points];
    for (i, x) in v.iter_mut().enumerate() {
        *x = x_max * i as f64 / (points - 1) as f64;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicas::Sequential;

    fn model(rate: RateFunction, kernel: LifetimeKernel) -> Model {
        Model::new(rate, kernel).unwrap()
    }

    #[test]
    fn verdict_examples() {
        let scan = uniform_scan(200.0, 401);
        let m = model(
            RateFunction::constant(1.0).unwrap(),
            LifetimeKernel::pareto(3.0).unwrap(),
        );
        let r = classify_asymptotic(&m, &scan).unwrap();
        assert_eq!(r.verdict, Verdict::SupercriticalSufficient);
        assert!((r.limsup - 1.5).abs() < 1e-12);
        assert!((r.second_moment_check - 3.0).abs() < 1e-12);
        assert!(r.stabilized);

        let m = model(
            RateFunction::constant(0.5).unwrap(),
            LifetimeKernel::dirac(1.0).unwrap(),
        );
        assert_eq!(
            classify_asymptotic(&m, &scan).unwrap().verdict,
            Verdict::SubcriticalSufficient
        );

        let m = model(
            RateFunction::asymptotically_critical(1.0).unwrap(),
            LifetimeKernel::dirac(1.0).unwrap(),
        );
        let r = classify_asymptotic(&m, &scan).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.reason.is_some());

        let m = model(
            RateFunction::constant(1.0).unwrap(),
            LifetimeKernel::pareto(1.0).unwrap(),
        );
        let r = classify_asymptotic(&m, &scan).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn integral_scan_for_constant_coefficients() {
        for &(b, d) in &[(1.0, 2.0), (2.0, 1.0), (0.5, 1.0)] {
            let m = Model::markov(b, d).unwrap();
            let profile = integral_drift_profile(&m, 20.0, 0.01).unwrap();
            let mb = b / d;
            for &(x, v) in profile.iter().step_by(97) {
                let exact = (mb - 1.0) * (1.0 - (-b * x).exp()) / b;
                assert!((v - exact).abs() < 1e-9, "x={x}: {v} vs {exact}");
            }
        }
        let critical = Model::markov(1.0, 1.0).unwrap();
        assert_eq!(integral_drift_scan(&critical, 10.0, 0.05).unwrap(), 0.0);
        assert!(integral_drift_scan(&critical, 10.0, 0.5).is_err());
    }

    #[test]
    fn discrete_drift_examples() {
        let m = model(
            RateFunction::constant(1.0).unwrap(),
            LifetimeKernel::dirac(2.5).unwrap(),
        );
        for &x in &[0.5, 1.0, 3.0] {
            let exact: f64 = (2.5 - 1.0) * (1.0 - (-x).exp());
            assert!((discrete_drift(&m, |y| y, x).unwrap() - exact).abs() < 1e-9);
            assert!(discrete_drift(&m, |_| 7.0, x).unwrap().abs() < 1e-9);
        }
        assert_eq!(discrete_drift(&m, |y| y, 0.0).unwrap(), 0.0);
        let heavy = model(
            RateFunction::constant(1.0).unwrap(),
            LifetimeKernel::pareto(1.5).unwrap(),
        );
        assert!(discrete_drift(&heavy, |y| y * y, 1.0).is_err());
    }

    #[test]
    fn discrete_drift_agrees_with_integral_condition() {
        let m = model(
            RateFunction::sinusoidal(1.0, 0.5, 1.0).unwrap(),
            LifetimeKernel::exponential_constant(1.5).unwrap(),
        );
        let profile = integral_drift_profile(&m, 4.0, 0.01).unwrap();
        for &(x, v) in profile.iter().step_by(50).skip(1) {
            let d = discrete_drift(&m, |y| y, x).unwrap();
            assert!((d - v).abs() < 1e-7, "x={x}: {d} vs {v}");
        }
    }

    #[test]
    fn periodic_constant() {
        let s = periodic_sup_phi(1.0, 0.0);
        assert!((s - 0.507_255_5).abs() < 1e-4, "{s}");
        assert!((periodic_sup_phi(1.0, -0.6) - (s - 0.6)).abs() < 1e-12);
        assert!(periodic_sup_phi(1.0, -0.6) < 0.0);
        for phase in [0.1, 0.37, 0.5, 0.93] {
            assert!((periodic_sup_phi_with(1.0, 0.0, 4096, phase) - s).abs() < 1e-10);
        }
        // The trigonometric part repeats after one period.
        let trig = |t: f64| (t.cos() + t.sin()) / 2.0;
        assert!((trig(0.0) - trig(2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn tail_estimates() {
        let light = Model::markov(1.0, 2.0).unwrap();
        let est = length_tail_estimate(
            &light,
            1.0,
            40.0,
            4000,
            &[0.5, 1.0, 2.0, 3.0, 4.0, 6.0],
            3,
            &Sequential,
        )
        .unwrap();
        assert_eq!(est.rows[0].estimate, 1.0);
        assert_eq!(est.rows[1].estimate, 1.0);
        assert!(est.fitted_decay.unwrap() > 0.0);
        assert!(est.rows.windows(2).all(|w| w[1].estimate <= w[0].estimate));

        let sup = Model::markov(2.0, 1.0).unwrap();
        assert!(matches!(
            length_tail_estimate(&sup, 1.0, 5.0, 10, &[1.0], 0, &Sequential),
            Err(Error::Regime(_))
        ));
    }
}
