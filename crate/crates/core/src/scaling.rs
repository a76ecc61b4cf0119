//! Rescaled contours of asymptotically critical trees and their Bessel limit.
//!
//! With `X` the contour started at `√n·x0`, the rescaled process is
//! `X^n_s = X_{ns} / √n`. It descends at slope `√n`, jumps at rate
//! `n·b(√n·x)` and its jumps are `y/√n` with `y ~ K(√n·x, ·)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::contour::{simulate_pdmp, ContourPath, Jump, PdmpOptions};
use crate::model::Model;
use crate::replicas::Replicas;
use crate::rng::{derive_seed, replica_rng};
use crate::stats::{ks_critical_value, ks_distance};
use crate::{Error, Result};

/// One scan level of [`check_scaling_assumption`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionRow {
    pub x: f64,
    /// `x·(b(x)m(x) - 1)`.
    pub drift: f64,
    /// `b(x)m₂(x)`.
    pub second: f64,
    /// `b(x)m₃(x)`.
    pub third: f64,
}

/// Diagnostics for the asymptotic criticality assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub rows: Vec<AssumptionRow>,
    /// Mean of `x·(bm - 1)` over the last quarter of the scan.
    pub c_estimate: f64,
    /// Mean of `b·m₂` over the last quarter of the scan.
    pub second_moment_limit: f64,
    pub third_moment_sup: f64,
    /// Human-readable description of each failed check.
    pub violations: Vec<String>,
}

impl AssumptionReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative spread allowed over the last quarter of the scan.
pub const ASSUMPTION_TOL: f64 = 0.05;

/// Checks `x(bm - 1) → c`, `b m₂ → 1` and `sup b m₃ < ∞` on `scan`.
///
/// A limit is accepted when the values over the last quarter of the scan stay
/// within [`ASSUMPTION_TOL`]`·(1 + |limit|)` of their mean.
pub fn check_scaling_assumption(model: &Model, scan: &[f64]) -> AssumptionReport {
    let rows: Vec<AssumptionRow> = scan
        .iter()
        .map(|&x| {
            let b = model.rate.rate(x);
            AssumptionRow {
                x,
                drift: x * (b * model.kernel.moment(x, 1) - 1.0),
                second: b * model.kernel.moment(x, 2),
                third: b * model.kernel.moment(x, 3),
            }
        })
        .collect();
    let mut violations = Vec::new();
    if rows.len() < 4 {
        violations.push(format!("scan has {} levels, need at least 4", rows.len()));
        return AssumptionReport {
            rows,
            c_estimate: f64::NAN,
            second_moment_limit: f64::NAN,
            third_moment_sup: f64::NAN,
            violations,
        };
    }
    let tail = &rows[rows.len() - rows.len() / 4..];
    let settle = |f: fn(&AssumptionRow) -> f64| {
        let mean = tail.iter().map(f).sum::<f64>() / tail.len() as f64;
        let spread = tail.iter().map(|r| (f(r) - mean).abs()).fold(0.0, f64::max);
        (mean, spread)
    };
    let (c_estimate, c_spread) = settle(|r| r.drift);
    let (second, second_spread) = settle(|r| r.second);
    let third_moment_sup = rows.iter().map(|r| r.third).fold(0.0, f64::max);
    if !c_estimate.is_finite() || c_spread > ASSUMPTION_TOL * (1.0 + c_estimate.abs()) {
        violations.push(format!(
            "x(bm-1) does not settle: mean {c_estimate} with spread {c_spread} over the last quarter"
        ));
    }
    if !second.is_finite()
        || second_spread > ASSUMPTION_TOL * (1.0 + second.abs())
        || (second - 1.0).abs() > ASSUMPTION_TOL
    {
        violations.push(format!(
            "b·m2 tends to {second} (spread {second_spread}), expected 1"
        ));
    }
    if !third_moment_sup.is_finite() {
        violations.push(String::from("b·m3 is unbounded on the scan"));
    }
    AssumptionReport {
        rows,
        c_estimate,
        second_moment_limit: second,
        third_moment_sup,
        violations,
    }
}

/// Rescales a base contour by `n`: times divided by `n`, levels by `√n`.
pub fn rescale_path(path: &ContourPath, n: u32) -> ContourPath {
    let nf = n as f64;
    let c = nf.sqrt();
    ContourPath {
        start: path.start / c,
        jumps: path
            .jumps
            .iter()
            .map(|j| Jump {
                time: j.time / nf,
                from: j.from / c,
                to: j.to / c,
            })
            .collect(),
        absorption: path.absorption.map(|a| a / nf),
        horizon: path.horizon / nf,
        slope: path.slope * c,
    }
}

/// Simulates the rescaled contour `X^n` from rescaled level `x0` up to
/// rescaled time `horizon`.
pub fn simulate_rescaled_path<R: Rng + ?Sized>(
    model: &Model,
    n: u32,
    x0: f64,
    horizon: f64,
    max_jumps: usize,
    rng: &mut R,
) -> Result<ContourPath> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    let nf = n as f64;
    let mut opts = PdmpOptions::new(None, horizon * nf);
    opts.max_jumps = max_jumps;
    let base = simulate_pdmp(model, x0 * nf.sqrt(), opts, rng)?;
    Ok(rescale_path(&base, n))
}

/// Marginals of `N` rescaled contours.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledRun {
    pub n: u32,
    pub x0: f64,
    pub times: Vec<f64>,
    /// `samples[i][k]`: value of replica `i` at `times[k]` (0 once absorbed).
    pub samples: Vec<Vec<f64>>,
    /// Absorption time of each replica, if absorbed before the horizon.
    pub absorption: Vec<Option<f64>>,
    pub horizon: f64,
}

impl RescaledRun {
    /// Values at `times[k]`.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[k]).collect()
    }

    /// Fraction of replicas absorbed by the horizon.
    pub fn absorbed_fraction(&self) -> f64 {
        self.absorption.iter().filter(|a| a.is_some()).count() as f64 / self.absorption.len() as f64
    }
}

/// Simulates `replicas` rescaled contours and records their values at `times`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_rescaled<E: Replicas>(
    model: &Model,
    n: u32,
    x0: f64,
    times: &[f64],
    horizon: f64,
    replicas: usize,
    seed: u64,
    exec: &E,
) -> Result<RescaledRun> {
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(Error::invalid("x0", "must be finite and > 0"));
    }
    if times.iter().any(|&t| !(t >= 0.0) || t > horizon) {
        return Err(Error::invalid("times", "must lie in [0, horizon]"));
    }
    let stream = derive_seed(seed, n as u64);
    let results = exec.run(replicas, |i| {
        let mut rng = replica_rng(stream, i as u64);
        simulate_rescaled_path(model, n, x0, horizon, 10_000_000, &mut rng).map(|p| {
            (
                times.iter().map(|&t| p.value_at(t)).collect::<Vec<f64>>(),
                p.absorption,
            )
        })
    });
    let mut samples = Vec::with_capacity(replicas);
    let mut absorption = Vec::with_capacity(replicas);
    for r in results {
        let (s, a) = r?;
        samples.push(s);
        absorption.push(a);
    }
    Ok(RescaledRun {
        n,
        x0,
        times: times.to_vec(),
        samples,
        absorption,
        horizon,
    })
}

/// Samples of the Bessel process with generator `(c/x) f' + ½ f''`, absorbed
/// at 0, at a fixed time. Absorbed replicas hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselSample {
    pub dimension: f64,
    pub values: Vec<f64>,
    pub absorbed: usize,
}

/// Relative Euler step used when no exact transition is available.
pub const EULER_STEP: f64 = 1e-4;

/// Draws one value at time `t` of the Bessel process of dimension `delta`
/// started at `x0`, absorbed at 0.
///
/// Dimension at least 2 never reaches 0 and uses the exact squared-Bessel
/// transition (a Poisson mixture of Gamma laws). Dimension 1 is Brownian
/// motion killed at 0, sampled exactly from the endpoint and the bridge
/// probability of having touched 0. Other dimensions use Euler steps of
/// length `EULER_STEP·t` on the squared process, absorbed when it crosses 0.
pub fn bessel_value<R: Rng + ?Sized>(delta: f64, x0: f64, t: f64, rng: &mut R) -> f64 {
    if t <= 0.0 {
        return x0;
    }
    if delta >= 2.0 {
        let lambda = x0 * x0 / (2.0 * t);
        let k = if lambda > 0.0 {
            Poisson::new(lambda).map_or(0.0, |p| p.sample(rng))
        } else {
            0.0
        };
        let shape = 0.5 * delta + k;
        let g = Gamma::new(shape, 2.0 * t).map_or(0.0, |g| g.sample(rng));
        return g.sqrt();
    }
    if delta == 1.0 {
        let z: f64 = rng.sample(StandardNormal);
        let end = x0 + t.sqrt() * z;
        if end <= 0.0 {
            return 0.0;
        }
        let touched = (-2.0 * x0 * end / t).exp();
        let u: f64 = rng.random();
        return if u < touched { 0.0 } else { end };
    }
    let steps = (1.0 / EULER_STEP).round() as usize;
    let dt = t / steps as f64;
    let mut z = x0 * x0;
    for _ in 0..steps {
        let w: f64 = rng.sample(StandardNormal);
        z += delta * dt + 2.0 * z.sqrt() * dt.sqrt() * w;
        if z <= 0.0 {
            return 0.0;
        }
    }
    z.sqrt()
}

/// `N` draws of the absorbed Bessel process of dimension `2c + 1` at time `t`.
pub fn bessel_marginal<E: Replicas>(
    c: f64,
    x0: f64,
    t: f64,
    replicas: usize,
    seed: u64,
    exec: &E,
) -> Result<BesselSample> {
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(Error::invalid("x0", "must be finite and > 0"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("t", "must be finite and >= 0"));
    }
    let delta = 2.0 * c + 1.0;
    let stream = derive_seed(seed, 0xBE55);
    let values = exec.run(replicas, |i| {
        let mut rng = replica_rng(stream, i as u64);
        bessel_value(delta, x0, t, &mut rng)
    });
    let absorbed = values.iter().filter(|&&v| v == 0.0).count();
    Ok(BesselSample {
        dimension: delta,
        values,
        absorbed,
    })
}

/// One `n` of [`compare_scaling_limit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub n: u32,
    /// KS distance between the surviving parts of the two samples.
    pub ks_distance: f64,
    /// Two-sample KS critical value at the requested level.
    pub critical_value: f64,
    pub absorbed_rescaled: f64,
    pub absorbed_oracle: f64,
    pub replicas: usize,
}

/// Distances between rescaled contours and the Bessel oracle for several `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub c: f64,
    pub x0: f64,
    pub t: f64,
    pub alpha: f64,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    /// Each distance is below the previous one or both are below their
    /// critical values.
    pub fn decreasing_to_noise_floor(&self) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].ks_distance < w[0].ks_distance
                || (w[0].ks_distance < w[0].critical_value
                    && w[1].ks_distance < w[1].critical_value)
        })
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].ks_distance < w[0].ks_distance)
    }

    /// The largest `n` is within the critical value.
    pub fn final_within_critical(&self) -> bool {
        self.rows
            .last()
            .is_some_and(|r| r.ks_distance < r.critical_value)
    }
}

/// Compares the law of `X^n_t` with the Bessel(2c + 1) marginal for each `n`.
///
/// Absorbed replicas are set aside; the KS distance compares the surviving
/// values and the absorbed fractions are reported separately.
#[allow(clippy::too_many_arguments)]
pub fn compare_scaling_limit<E: Replicas>(
    model: &Model,
    n_list: &[u32],
    c: f64,
    x0: f64,
    t: f64,
    replicas: usize,
    alpha: f64,
    seed: u64,
    exec: &E,
) -> Result<ScalingReport> {
    let oracle = bessel_marginal(c, x0, t, replicas, seed, exec)?;
    let alive_oracle: Vec<f64> = oracle.values.iter().copied().filter(|&v| v > 0.0).collect();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let run = simulate_rescaled(model, n, x0, &[t], t, replicas, seed, exec)?;
        let alive: Vec<f64> = run.marginal(0).into_iter().filter(|&v| v > 0.0).collect();
        if alive.is_empty() || alive_oracle.is_empty() {
            return Err(Error::Consistency(format!(
                "no surviving replicas to compare at n = {n} ({} rescaled, {} oracle)",
                alive.len(),
                alive_oracle.len()
            )));
        }
        rows.push(ScalingRow {
            n,
            ks_distance: ks_distance(&alive, &alive_oracle),
            critical_value: ks_critical_value(alpha, alive.len(), alive_oracle.len()),
            absorbed_rescaled: 1.0 - alive.len() as f64 / replicas as f64,
            absorbed_oracle: oracle.absorbed as f64 / replicas as f64,
            replicas,
        });
    }
    Ok(ScalingReport {
        c,
        x0,
        t,
        alpha,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LifetimeKernel, RateFunction};
    use crate::replicas::Sequential;
    use crate::stats::mean_se;

    fn dirac_base(rate: RateFunction) -> Model {
        Model::new(rate, LifetimeKernel::dirac(1.0).unwrap()).unwrap()
    }

    fn scan() -> Vec<f64> {
        (1..=400).map(|i| 5.0 * i as f64).collect()
    }

    #[test]
    fn assumption_diagnostics() {
        let r = check_scaling_assumption(
            &dirac_base(RateFunction::asymptotically_critical(1.0).unwrap()),
            &scan(),
        );
        assert!(r.passes(), "{:?}", r.violations);
        assert!((r.c_estimate - 1.0).abs() < 0.01);
        let r =
            check_scaling_assumption(&dirac_base(RateFunction::constant(1.0).unwrap()), &scan());
        assert!(r.passes());
        assert_eq!(r.c_estimate, 0.0);
        let r =
            check_scaling_assumption(&dirac_base(RateFunction::constant(2.0).unwrap()), &scan());
        assert!(!r.passes());
    }

    #[test]
    fn unit_scale_is_the_base_contour() {
        let m = dirac_base(RateFunction::asymptotically_critical(0.5).unwrap());
        for seed in 0..20 {
            let base = simulate_pdmp(
                &m,
                1.3,
                PdmpOptions::new(None, 7.0),
                &mut replica_rng(seed, 0),
            )
            .unwrap();
            let scaled =
                simulate_rescaled_path(&m, 1, 1.3, 7.0, 10_000_000, &mut replica_rng(seed, 0))
                    .unwrap();
            assert_eq!(base, scaled);
        }
    }

    #[test]
    fn dirac_jumps_are_one_over_root_n() {
        let m = dirac_base(RateFunction::constant(1.0).unwrap());
        let p =
            simulate_rescaled_path(&m, 64, 1.0, 1.0, 10_000_000, &mut replica_rng(4, 0)).unwrap();
        assert!(!p.jumps.is_empty());
        for j in &p.jumps {
            assert!((j.to - j.from - 0.125).abs() < 1e-12);
        }
        for w in [0.05, 0.2, 0.5] {
            assert!(p.negative_variation(0.1, 0.1 + w) <= w * p.slope + 1e-12);
        }
    }

    #[test]
    fn zero_rate_descends_at_unit_rescaled_slope() {
        let m = dirac_base(RateFunction::constant(0.0).unwrap());
        let p = simulate_rescaled_path(&m, 16, 1.0, 2.0, 10, &mut replica_rng(0, 0)).unwrap();
        assert!(p.jumps.is_empty());
        assert_eq!(p.absorption, Some(0.25));
        assert_eq!(p.value_at(0.125), 0.5);
    }

    #[test]
    fn squared_bessel_means() {
        for (c, t) in [(0.5, 0.3), (1.0, 0.5)] {
            let s = bessel_marginal(c, 1.0, t, 20_000, 8, &Sequential).unwrap();
            assert_eq!(s.absorbed, 0);
            let sq: Vec<f64> = s.values.iter().map(|v| v * v).collect();
            let (m, se) = mean_se(&sq);
            let exact = 1.0 + (2.0 * c + 1.0) * t;
            assert!((m - exact).abs() < 4.0 * se, "c={c}: {m} vs {exact} ± {se}");
        }
    }

    #[test]
    fn killed_brownian_motion_absorption() {
        let (x0, t) = (1.0, 0.5);
        let s = bessel_marginal(0.0, x0, t, 40_000, 2, &Sequential).unwrap();
        // P(T0 <= t) = 2 P(W_t >= x0).
        let exact = libm::erfc(x0 / (2.0 * t).sqrt());
        let freq = s.absorbed as f64 / 40_000.0;
        assert!((freq - exact).abs() < 4.0 * (exact * (1.0 - exact) / 40_000.0).sqrt());
        // Surviving density: φ_t(y - x0) - φ_t(y + x0); its mean is x0.
        let (m, se) = mean_se(&s.values);
        assert!((m - x0).abs() < 4.0 * se);
    }

    #[test]
    fn euler_branch_agrees_with_exact_killed_brownian_motion() {
        let exec = Sequential;
        let exact = exec.run(4000, |i| {
            bessel_value(1.0, 1.0, 0.2, &mut replica_rng(1, i as u64))
        });
        let euler = exec.run(4000, |i| {
            bessel_value(1.0 + 1e-12, 1.0, 0.2, &mut replica_rng(2, i as u64))
        });
        let ea = exact.iter().filter(|&&v| v == 0.0).count() as f64 / 4000.0;
        let eu = euler.iter().filter(|&&v| v == 0.0).count() as f64 / 4000.0;
        assert!((ea - eu).abs() < 0.02, "{ea} vs {eu}");
    }

    #[test]
    fn small_time_samples_stay_near_start() {
        let s = bessel_marginal(1.0, 2.0, 1e-8, 100, 0, &Sequential).unwrap();
        assert!(s.values.iter().all(|v| (v - 2.0).abs() < 1e-3));
        let s = bessel_marginal(0.25, 2.0, 0.0, 10, 0, &Sequential).unwrap();
        assert!(s.values.iter().all(|&v| v == 2.0));
    }
}
