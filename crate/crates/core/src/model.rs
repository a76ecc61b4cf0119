//! Birth rates and lifetime kernels.
//!
//! A [`RateFunction`] is the birth rate `t ↦ b(t)` together with its primitive
//! `B(t) = ∫_0^t b`, which is available in closed form for every variant. Jump
//! and birth times are sampled by inverting `B`, so no thinning bound is
//! needed. A [`LifetimeKernel`] is the law `K(t, ·)` of the lifetime of an
//! individual born at absolute time `t`.

use alloc::vec::Vec;
use alloc::{format, vec};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;

use crate::quad::{self, QuadOptions};
use crate::{Error, Result};

/// Piecewise-constant rate: `values[i]` on `[breakpoints[i], breakpoints[i+1])`,
/// the last value extending to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Rate given by linear interpolation of `values` on `grid`, held constant
/// past the last grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    grid: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Birth rate `t ↦ b(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RateFunction {
    /// `b(t) = beta`.
    Constant {
        beta: f64,
    },
    /// `b(t) = 1 + c/(1+t)`, which needs `c >= -1`.
    AsymptoticallyCritical {
        c: f64,
    },
    /// `b(t) = beta`; the periodic drift `cos t + offset` is used by
    /// [`crate::criticality`].
    Periodic {
        beta: f64,
        offset: f64,
    },
    /// `b(t) = base + amplitude·sin(frequency·t)`.
    Sinusoidal {
        base: f64,
        amplitude: f64,
        frequency: f64,
    },
    PiecewiseConstant(Piecewise),
    Tabulated(Tabulated),
}

fn check_finite_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and >= 0, got {v}"),
        ))
    }
}

fn check_increasing(name: &'static str, xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(name, "must be finite"));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(name, "must be strictly increasing"));
    }
    Ok(())
}

impl Piecewise {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::invalid(
                "breakpoints",
                "need one value per breakpoint and at least one breakpoint",
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::invalid("breakpoints", "first breakpoint must be 0"));
        }
        check_increasing("breakpoints", &breakpoints)?;
        for &v in &values {
            check_finite_nonneg("values", v)?;
        }
        let mut cumulative = vec![0.0; breakpoints.len()];
        for i in 1..breakpoints.len() {
            cumulative[i] =
                cumulative[i - 1] + values[i - 1] * (breakpoints[i] - breakpoints[i - 1]);
        }
        Ok(Piecewise {
            breakpoints,
            values,
            cumulative,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment(&self, t: f64) -> usize {
        self.breakpoints
            .partition_point(|&b| b <= t)
            .saturating_sub(1)
    }

    fn rate(&self, t: f64) -> f64 {
        self.values[self.segment(t)]
    }

    fn primitive(&self, t: f64) -> f64 {
        let i = self.segment(t);
        self.cumulative[i] + self.values[i] * (t - self.breakpoints[i])
    }

    fn inverse(&self, target: f64) -> f64 {
        let i = self
            .cumulative
            .partition_point(|&c| c <= target)
            .saturating_sub(1);
        // Skip flat pieces so that the returned point is where the primitive
        // actually reaches the target.
        let mut i = i;
        while self.values[i] == 0.0 && i + 1 < self.values.len() {
            i += 1;
        }
        self.breakpoints[i] + (target - self.cumulative[i]) / self.values[i]
    }
}

impl Tabulated {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::invalid(
                "grid",
                "need at least two points and one value per point",
            ));
        }
        if grid[0] != 0.0 {
            return Err(Error::invalid("grid", "first grid point must be 0"));
        }
        check_increasing("grid", &grid)?;
        for &v in &values {
            check_finite_nonneg("values", v)?;
        }
        let mut cumulative = vec![0.0; grid.len()];
        for i in 1..grid.len() {
            cumulative[i] =
                cumulative[i - 1] + 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
        }
        Ok(Tabulated {
            grid,
            values,
            cumulative,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment(&self, t: f64) -> usize {
        self.grid.partition_point(|&g| g <= t).saturating_sub(1)
    }

    fn rate(&self, t: f64) -> f64 {
        let i = self.segment(t);
        if i + 1 >= self.grid.len() {
            return self.values[i];
        }
        let w = (t - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    fn primitive(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let u = t - self.grid[i];
        if i + 1 >= self.grid.len() {
            return self.cumulative[i] + self.values[i] * u;
        }
        let slope = (self.values[i + 1] - self.values[i]) / (self.grid[i + 1] - self.grid[i]);
        self.cumulative[i] + self.values[i] * u + 0.5 * slope * u * u
    }

    fn inverse(&self, target: f64) -> f64 {
        let mut i = self
            .cumulative
            .partition_point(|&c| c <= target)
            .saturating_sub(1);
        let last = self.grid.len() - 1;
        while i < last && self.cumulative[i + 1] == self.cumulative[i] {
            i += 1;
        }
        let r = target - self.cumulative[i];
        let v = self.values[i];
        if i >= last {
            return self.grid[i] + r / v;
        }
        let slope = (self.values[i + 1] - v) / (self.grid[i + 1] - self.grid[i]);
        // Root of v·u + slope·u²/2 = r in the cancellation-free form.
        let disc = (v * v + 2.0 * slope * r).max(0.0);
        let u = 2.0 * r / (v + disc.sqrt());
        (self.grid[i] + u).min(self.grid[i + 1])
    }
}

const NEWTON_MAX_ITER: usize = 200;

/// Solves `g(t) = target` for a nondecreasing `g` with derivative `dg` on the
/// bracket `[lo, hi]` (with `g(lo) <= target <= g(hi)`), by Newton steps
/// safeguarded with bisection.
pub(crate) fn newton_bisect<G, D>(g: G, dg: D, target: f64, mut lo: f64, mut hi: f64) -> f64
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut t = 0.5 * (lo + hi);
    for _ in 0..NEWTON_MAX_ITER {
        let tol = 1e-12_f64.max(4.0 * f64::EPSILON * t.abs());
        if hi - lo <= tol {
            break;
        }
        let r = g(t) - target;
        if r == 0.0 {
            return t;
        }
        if r < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let d = dg(t);
        let step = if d > 0.0 { t - r / d } else { f64::NAN };
        let next = if step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= tol {
            return next;
        }
        t = next;
    }
    t
}

impl RateFunction {
    pub fn constant(beta: f64) -> Result<Self> {
        let r = RateFunction::Constant { beta };
        r.validate()?;
        Ok(r)
    }

    pub fn asymptotically_critical(c: f64) -> Result<Self> {
        let r = RateFunction::AsymptoticallyCritical { c };
        r.validate()?;
        Ok(r)
    }

    pub fn periodic(beta: f64, offset: f64) -> Result<Self> {
        let r = RateFunction::Periodic { beta, offset };
        r.validate()?;
        Ok(r)
    }

    pub fn sinusoidal(base: f64, amplitude: f64, frequency: f64) -> Result<Self> {
        let r = RateFunction::Sinusoidal {
            base,
            amplitude,
            frequency,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn piecewise_constant(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(RateFunction::PiecewiseConstant(Piecewise::new(
            breakpoints,
            values,
        )?))
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(RateFunction::Tabulated(Tabulated::new(grid, values)?))
    }

    /// Checks that the rate is nonnegative and locally bounded.
    pub fn validate(&self) -> Result<()> {
        match *self {
            RateFunction::Constant { beta } => check_finite_nonneg("beta", beta),
            RateFunction::AsymptoticallyCritical { c } => {
                if c.is_finite() && c >= -1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "c",
                        format!("must be >= -1 for a nonnegative rate, got {c}"),
                    ))
                }
            }
            RateFunction::Periodic { beta, offset } => {
                check_finite_nonneg("beta", beta)?;
                if offset.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("offset", "must be finite"))
                }
            }
            RateFunction::Sinusoidal {
                base,
                amplitude,
                frequency,
            } => {
                if !(base.is_finite() && amplitude.is_finite() && frequency.is_finite()) {
                    return Err(Error::invalid("base", "parameters must be finite"));
                }
                if frequency <= 0.0 {
                    return Err(Error::invalid("frequency", "must be > 0"));
                }
                if base < amplitude.abs() {
                    return Err(Error::invalid(
                        "base",
                        "must be >= |amplitude| for a nonnegative rate",
                    ));
                }
                Ok(())
            }
            // Both table variants are validated on construction.
            RateFunction::PiecewiseConstant(_) | RateFunction::Tabulated(_) => Ok(()),
        }
    }

    /// `b(t)`.
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            RateFunction::Constant { beta } | RateFunction::Periodic { beta, .. } => *beta,
            RateFunction::AsymptoticallyCritical { c } => 1.0 + c / (1.0 + t),
            RateFunction::Sinusoidal {
                base,
                amplitude,
                frequency,
            } => base + amplitude * (frequency * t).sin(),
            RateFunction::PiecewiseConstant(p) => p.rate(t),
            RateFunction::Tabulated(tab) => tab.rate(t),
        }
    }

    /// `B(t) = ∫_0^t b(u) du`.
    pub fn primitive(&self, t: f64) -> f64 {
        match self {
            RateFunction::Constant { beta } | RateFunction::Periodic { beta, .. } => beta * t,
            RateFunction::AsymptoticallyCritical { c } => t + c * t.ln_1p(),
            RateFunction::Sinusoidal {
                base,
                amplitude,
                frequency,
            } => {
                // 1 - cos(x) = 2 sin²(x/2) avoids cancellation near 0.
                let half = (0.5 * frequency * t).sin();
                base * t + amplitude * 2.0 * half * half / frequency
            }
            RateFunction::PiecewiseConstant(p) => p.primitive(t),
            RateFunction::Tabulated(tab) => tab.primitive(t),
        }
    }

    /// `∫_{t0}^{t1} b(u) du`.
    ///
    /// Exact for every variant; the tabulated variant integrates its linear
    /// interpolant exactly.
    pub fn cumulative(&self, t0: f64, t1: f64) -> Result<f64> {
        if t1 < t0 {
            return Err(Error::Ordering { t0, t1 });
        }
        Ok(self.cumulative_unchecked(t0, t1))
    }

    pub(crate) fn cumulative_unchecked(&self, t0: f64, t1: f64) -> f64 {
        match self {
            RateFunction::Constant { beta } | RateFunction::Periodic { beta, .. } => {
                beta * (t1 - t0)
            }
            RateFunction::AsymptoticallyCritical { c } => {
                (t1 - t0) + c * ((t1 - t0) / (1.0 + t0)).ln_1p()
            }
            _ => (self.primitive(t1) - self.primitive(t0)).max(0.0),
        }
    }

    /// The constant value when the rate does not depend on time.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            RateFunction::Constant { beta } | RateFunction::Periodic { beta, .. } => Some(*beta),
            RateFunction::Sinusoidal {
                base, amplitude, ..
            } if *amplitude == 0.0 => Some(*base),
            RateFunction::PiecewiseConstant(p) if p.values.iter().all(|&v| v == p.values[0]) => {
                Some(p.values[0])
            }
            _ => None,
        }
    }

    /// Smallest `t` in `[lo, hi]` with `B(t) = target`, given `B(lo) <= target <= B(hi)`.
    fn inverse_primitive(&self, target: f64, lo: f64, hi: f64) -> f64 {
        let t = match self {
            RateFunction::Constant { beta } | RateFunction::Periodic { beta, .. } => target / beta,
            RateFunction::PiecewiseConstant(p) => p.inverse(target),
            RateFunction::Tabulated(tab) => tab.inverse(target),
            _ => newton_bisect(|t| self.primitive(t), |t| self.rate(t), target, lo, hi),
        };
        t.clamp(lo, hi)
    }

    /// Level `y <= x` at which `∫_y^x b = e`, or `None` if `∫_0^x b <= e`.
    ///
    /// This is the landing level of a path descending at unit speed from `x`
    /// when the exponential clock `e` rings.
    pub fn descend(&self, x: f64, e: f64) -> Option<f64> {
        let total = self.cumulative_unchecked(0.0, x);
        if e >= total {
            return None;
        }
        if let Some(beta) = self.as_constant() {
            return Some((x - e / beta).clamp(0.0, x));
        }
        let target = self.primitive(x) - e;
        Some(self.inverse_primitive(target, 0.0, x))
    }

    /// Time `u >= s` at which `∫_s^u b = e`, or `None` if that happens after `limit`.
    pub fn ascend(&self, s: f64, e: f64, limit: f64) -> Option<f64> {
        if let Some(beta) = self.as_constant() {
            if beta <= 0.0 {
                return None;
            }
            let u = s + e / beta;
            return if u <= limit { Some(u) } else { None };
        }
        let base = self.primitive(s);
        let target = base + e;
        let hi = if limit.is_finite() {
            if self.primitive(limit) < target {
                return None;
            }
            limit
        } else {
            let mut hi = s + 1.0;
            let mut width = 1.0;
            while self.primitive(hi) < target {
                width *= 2.0;
                hi = s + width;
                if !hi.is_finite() || width > 1e300 {
                    return None;
                }
            }
            hi
        };
        Some(self.inverse_primitive(target, s, hi))
    }
}

/// Lifetime law given by a piecewise-linear CDF on a grid of lifetimes.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCdf {
    points: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedCdf {
    /// `points` strictly increasing and nonnegative, `cdf` nondecreasing from 0 to 1.
    pub fn new(points: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points.len() != cdf.len() {
            return Err(Error::invalid(
                "points",
                "need at least two points and one CDF value per point",
            ));
        }
        check_increasing("points", &points)?;
        if points[0] < 0.0 {
            return Err(Error::invalid("points", "lifetimes must be nonnegative"));
        }
        if cdf[0] != 0.0 || cdf[cdf.len() - 1] != 1.0 {
            return Err(Error::invalid("cdf", "must start at 0 and end at 1"));
        }
        if cdf.windows(2).any(|w| w[1] < w[0]) || cdf.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("cdf", "must be nondecreasing"));
        }
        Ok(TabulatedCdf { points, cdf })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    fn cdf(&self, y: f64) -> f64 {
        let n = self.points.len();
        if y <= self.points[0] {
            return 0.0;
        }
        if y >= self.points[n - 1] {
            return 1.0;
        }
        let i = self.points.partition_point(|&p| p <= y) - 1;
        let w = (y - self.points[i]) / (self.points[i + 1] - self.points[i]);
        self.cdf[i] + w * (self.cdf[i + 1] - self.cdf[i])
    }

    fn quantile(&self, u: f64) -> f64 {
        let n = self.points.len();
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, n - 1) - 1;
        let dc = self.cdf[i + 1] - self.cdf[i];
        if dc <= 0.0 {
            return self.points[i + 1];
        }
        let w = (u - self.cdf[i]) / dc;
        self.points[i] + w * (self.points[i + 1] - self.points[i])
    }

    /// Mass and first moment of the uniform piece on `[p_i, p_{i+1}]`
    /// intersected with `[a, b]`.
    fn piece_moments(&self, i: usize, a: f64, b: f64) -> (f64, f64) {
        let (lo, hi) = (self.points[i], self.points[i + 1]);
        let (l, r) = (lo.max(a), hi.min(b));
        if r <= l {
            return (0.0, 0.0);
        }
        let density = (self.cdf[i + 1] - self.cdf[i]) / (hi - lo);
        let mass = density * (r - l);
        (mass, mass * 0.5 * (l + r))
    }
}

/// Lifetime kernel `t ↦ K(t, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub enum LifetimeKernel {
    /// Every lifetime equals `a`.
    Dirac { a: f64 },
    /// `K(t, du) = d(t+u) exp(-∫_t^{t+u} d) du` for a death rate `d`.
    Exponential { death: RateFunction },
    /// Density `k / y^{k+1}` on `[1, ∞)`.
    Pareto { k: f64 },
    /// Deaths at the absolute times 1 and 2: an individual born at `t < 1`
    /// lives `1 - t` or `2 - t` with probability one half each, one born at
    /// `t` in `[1, 2)` lives `2 - t`. Births at `t >= 2` are given lifetime 1.
    /// This kernel is not weakly continuous at `t = 1`.
    TwoPointDeath,
    /// Time-homogeneous law with a piecewise-linear CDF.
    Tabulated(TabulatedCdf),
}

fn expect_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-11,
        max_intervals: 4000,
    }
}

impl LifetimeKernel {
    pub fn dirac(a: f64) -> Result<Self> {
        let k = LifetimeKernel::Dirac { a };
        k.validate()?;
        Ok(k)
    }

    pub fn exponential(death: RateFunction) -> Result<Self> {
        let k = LifetimeKernel::Exponential { death };
        k.validate()?;
        Ok(k)
    }

    pub fn exponential_constant(d: f64) -> Result<Self> {
        Self::exponential(RateFunction::constant(d)?)
    }

    pub fn pareto(k: f64) -> Result<Self> {
        let kernel = LifetimeKernel::Pareto { k };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn tabulated(points: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        Ok(LifetimeKernel::Tabulated(TabulatedCdf::new(points, cdf)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LifetimeKernel::Dirac { a } => {
                if a.is_finite() && *a > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "a",
                        format!("lifetime must be finite and > 0, got {a}"),
                    ))
                }
            }
            LifetimeKernel::Exponential { death } => {
                death.validate()?;
                if death.as_constant() == Some(0.0) {
                    return Err(Error::Unsupported(
                        "infinite lifetimes (death rate identically 0)",
                    ));
                }
                Ok(())
            }
            LifetimeKernel::Pareto { k } => {
                if k.is_finite() && *k > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "k",
                        format!("must be finite and > 0, got {k}"),
                    ))
                }
            }
            LifetimeKernel::TwoPointDeath | LifetimeKernel::Tabulated(_) => Ok(()),
        }
    }

    /// Whether `K(t, ·)` does not depend on `t`.
    pub fn is_time_homogeneous(&self) -> bool {
        match self {
            LifetimeKernel::Dirac { .. }
            | LifetimeKernel::Pareto { .. }
            | LifetimeKernel::Tabulated(_) => true,
            LifetimeKernel::Exponential { death } => death.as_constant().is_some(),
            LifetimeKernel::TwoPointDeath => false,
        }
    }

    /// Whether `t ↦ K(t, ·)` is weakly continuous.
    pub fn is_weakly_continuous(&self) -> bool {
        !matches!(self, LifetimeKernel::TwoPointDeath)
    }

    /// Point masses `(lifetime, weight)` of `K(t, ·)` for purely atomic kernels.
    pub fn atoms(&self, t: f64) -> Option<Vec<(f64, f64)>> {
        match self {
            LifetimeKernel::Dirac { a } => Some(vec![(*a, 1.0)]),
            LifetimeKernel::TwoPointDeath => Some(if t < 1.0 {
                vec![(1.0 - t, 0.5), (2.0 - t, 0.5)]
            } else if t < 2.0 {
                vec![(2.0 - t, 1.0)]
            } else {
                vec![(1.0, 1.0)]
            }),
            _ => None,
        }
    }

    /// Birth times at which `K(t, ·)` jumps.
    pub fn jump_times(&self) -> &'static [f64] {
        match self {
            LifetimeKernel::TwoPointDeath => &[1.0, 2.0],
            _ => &[],
        }
    }

    /// Point masses of the left limit `K(t-, ·)`. Differs from [`Self::atoms`]
    /// only where the kernel jumps in `t`.
    pub fn atoms_left(&self, t: f64) -> Option<Vec<(f64, f64)>> {
        match self {
            LifetimeKernel::TwoPointDeath => Some(if t <= 1.0 {
                vec![(1.0 - t, 0.5), (2.0 - t, 0.5)]
            } else if t <= 2.0 {
                vec![(2.0 - t, 1.0)]
            } else {
                vec![(1.0, 1.0)]
            }),
            _ => self.atoms(t),
        }
    }

    /// `K(t, [0, y])`.
    pub fn cdf(&self, t: f64, y: f64) -> f64 {
        if let Some(atoms) = self.atoms(t) {
            return atoms.iter().filter(|(a, _)| *a <= y).map(|(_, w)| w).sum();
        }
        match self {
            LifetimeKernel::Exponential { death } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-death.cumulative_unchecked(t, t + y)).exp_m1()
                }
            }
            LifetimeKernel::Pareto { k } => {
                if y <= 1.0 {
                    0.0
                } else {
                    1.0 - y.powf(-k)
                }
            }
            LifetimeKernel::Tabulated(tab) => tab.cdf(y),
            LifetimeKernel::Dirac { .. } | LifetimeKernel::TwoPointDeath => unreachable!(),
        }
    }

    /// Generalized inverse of `y ↦ K(t, [0, y])` at `u` in `[0, 1)`.
    ///
    /// Returns infinity when the lifetime is infinite (a death rate whose
    /// integral stays below the exponential clock).
    pub fn quantile(&self, t: f64, u: f64) -> f64 {
        match self {
            LifetimeKernel::Dirac { a } => *a,
            LifetimeKernel::Exponential { death } => {
                let e = -(-u).ln_1p();
                match death.ascend(t, e, f64::INFINITY) {
                    Some(s) => (s - t).max(0.0),
                    None => f64::INFINITY,
                }
            }
            LifetimeKernel::Pareto { k } => (-(-u).ln_1p() / k).exp(),
            LifetimeKernel::TwoPointDeath => {
                if t < 1.0 {
                    if u < 0.5 {
                        1.0 - t
                    } else {
                        2.0 - t
                    }
                } else if t < 2.0 {
                    2.0 - t
                } else {
                    1.0
                }
            }
            LifetimeKernel::Tabulated(tab) => tab.quantile(u),
        }
    }

    /// Density of `K(t, ·)` at `y`, or `None` for the atomic kernels.
    pub fn density(&self, t: f64, y: f64) -> Option<f64> {
        match self {
            LifetimeKernel::Dirac { .. } | LifetimeKernel::TwoPointDeath => None,
            LifetimeKernel::Exponential { death } => Some(if y < 0.0 {
                0.0
            } else {
                death.rate(t + y) * (-death.cumulative_unchecked(t, t + y)).exp()
            }),
            LifetimeKernel::Pareto { k } => Some(if y < 1.0 { 0.0 } else { k * y.powf(-k - 1.0) }),
            LifetimeKernel::Tabulated(tab) => {
                let p = &tab.points;
                if y < p[0] || y >= p[p.len() - 1] {
                    return Some(0.0);
                }
                let i = p.partition_point(|&q| q <= y) - 1;
                Some((tab.cdf[i + 1] - tab.cdf[i]) / (p[i + 1] - p[i]))
            }
        }
    }

    /// Lifetimes at which the density is not smooth.
    pub fn density_breaks(&self) -> Vec<f64> {
        match self {
            LifetimeKernel::Pareto { .. } => vec![1.0],
            LifetimeKernel::Tabulated(tab) => tab.points.clone(),
            _ => Vec::new(),
        }
    }

    /// Draws a lifetime from `K(t, ·)`.
    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        match self {
            LifetimeKernel::Dirac { a } => *a,
            _ => {
                let u: f64 = rng.random();
                self.quantile(t, u)
            }
        }
    }

    /// `m_p(t) = ∫ y^p K(t, dy)`, possibly infinite.
    pub fn moment(&self, t: f64, p: u32) -> f64 {
        let pf = p as f64;
        if let Some(atoms) = self.atoms(t) {
            return atoms.iter().map(|(a, w)| w * a.powi(p as i32)).sum();
        }
        match self {
            LifetimeKernel::Pareto { k } => {
                if *k > pf {
                    k / (k - pf)
                } else {
                    f64::INFINITY
                }
            }
            LifetimeKernel::Exponential { death } => {
                if let Some(d) = death.as_constant() {
                    let mut fact = 1.0;
                    for i in 2..=p {
                        fact *= i as f64;
                    }
                    return fact / d.powi(p as i32);
                }
                // E[ξ^p] = ∫ p y^{p-1} P(ξ > y) dy.
                let tail = |y: f64| {
                    pf * y.powi(p as i32 - 1) * (-death.cumulative_unchecked(t, t + y)).exp()
                };
                quad::integrate_to_infinity(tail, 0.0, expect_opts()).unwrap_or(f64::INFINITY)
            }
            LifetimeKernel::Tabulated(tab) => {
                let mut acc = 0.0;
                for i in 0..tab.points.len() - 1 {
                    let (lo, hi) = (tab.points[i], tab.points[i + 1]);
                    let mass = tab.cdf[i + 1] - tab.cdf[i];
                    acc += mass * (hi.powi(p as i32 + 1) - lo.powi(p as i32 + 1))
                        / ((pf + 1.0) * (hi - lo));
                }
                acc
            }
            LifetimeKernel::Dirac { .. } | LifetimeKernel::TwoPointDeath => unreachable!(),
        }
    }

    /// Mean lifetime `m(t)`.
    pub fn mean(&self, t: f64) -> f64 {
        self.moment(t, 1)
    }

    /// `(Kf)(t) = ∫ f(y) K(t, dy)`.
    ///
    /// Exact on atomic kernels, adaptive quadrature (tolerance 1e-11) on the
    /// others. Fails with [`Error::Integration`] when `f` is not integrable.
    pub fn expect<F: Fn(f64) -> f64>(&self, t: f64, f: F) -> Result<f64> {
        self.expect_with(t, f, expect_opts())
    }

    /// [`LifetimeKernel::expect`] with explicit quadrature settings.
    pub fn expect_with<F: Fn(f64) -> f64>(&self, t: f64, f: F, opts: QuadOptions) -> Result<f64> {
        if let Some(atoms) = self.atoms(t) {
            return Ok(atoms.iter().map(|&(a, w)| w * f(a)).sum());
        }
        match self {
            LifetimeKernel::Exponential { death } => {
                let integrand = |u: f64| {
                    let density = death.rate(t + u) * (-death.cumulative_unchecked(t, t + u)).exp();
                    if density == 0.0 {
                        0.0
                    } else {
                        f(u) * density
                    }
                };
                quad::integrate_to_infinity(integrand, 0.0, opts)
            }
            LifetimeKernel::Pareto { k } => {
                let integrand = |y: f64| {
                    let density = k * y.powf(-k - 1.0);
                    if density == 0.0 {
                        0.0
                    } else {
                        f(y) * density
                    }
                };
                quad::integrate_to_infinity(integrand, 1.0, opts)
            }
            LifetimeKernel::Tabulated(tab) => {
                let mut acc = 0.0;
                for i in 0..tab.points.len() - 1 {
                    let (lo, hi) = (tab.points[i], tab.points[i + 1]);
                    let mass = tab.cdf[i + 1] - tab.cdf[i];
                    if mass > 0.0 {
                        acc += mass / (hi - lo) * quad::integrate(&f, lo, hi, opts)?;
                    }
                }
                Ok(acc)
            }
            LifetimeKernel::Dirac { .. } | LifetimeKernel::TwoPointDeath => unreachable!(),
        }
    }

    /// Mass and first moment of `K(·, [a, b))` for time-homogeneous kernels.
    pub fn interval_moments(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        match self {
            LifetimeKernel::Pareto { k } => {
                let lo = a.max(1.0);
                if b <= lo {
                    return Ok((0.0, 0.0));
                }
                let mass = lo.powf(-k) - if b.is_finite() { b.powf(-k) } else { 0.0 };
                let first = if (*k - 1.0).abs() < 1e-12 {
                    if b.is_finite() {
                        k * (b / lo).ln()
                    } else {
                        f64::INFINITY
                    }
                } else {
                    let upper = if b.is_finite() {
                        b.powf(1.0 - k)
                    } else if *k > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    k / (k - 1.0) * (lo.powf(1.0 - k) - upper)
                };
                Ok((mass, first))
            }
            LifetimeKernel::Tabulated(tab) => {
                let mut out = (0.0, 0.0);
                for i in 0..tab.points.len() - 1 {
                    let (m, f) = tab.piece_moments(i, a, b);
                    out.0 += m;
                    out.1 += f;
                }
                Ok(out)
            }
            LifetimeKernel::Exponential { death } => match death.as_constant() {
                Some(d) => {
                    let ea = (-d * a).exp();
                    let eb = if b.is_finite() { (-d * b).exp() } else { 0.0 };
                    let ga = (a + 1.0 / d) * ea;
                    let gb = if b.is_finite() {
                        (b + 1.0 / d) * eb
                    } else {
                        0.0
                    };
                    Ok((ea - eb, ga - gb))
                }
                None => Err(Error::Unsupported(
                    "interval moments of a time-dependent kernel",
                )),
            },
            LifetimeKernel::Dirac { a: at } => Ok(if *at >= a && *at < b {
                (1.0, *at)
            } else {
                (0.0, 0.0)
            }),
            LifetimeKernel::TwoPointDeath => Err(Error::Unsupported(
                "interval moments of a time-dependent kernel",
            )),
        }
    }
}

/// A pair `(b, K)` describing an inhomogeneous splitting tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub rate: RateFunction,
    pub kernel: LifetimeKernel,
}

impl Model {
    pub fn new(rate: RateFunction, kernel: LifetimeKernel) -> Result<Self> {
        rate.validate()?;
        kernel.validate()?;
        Ok(Model { rate, kernel })
    }

    /// The birth-death tree with constant rates `b` and `d`.
    pub fn markov(b: f64, d: f64) -> Result<Self> {
        Model::new(
            RateFunction::constant(b)?,
            LifetimeKernel::exponential_constant(d)?,
        )
    }

    /// `b(x) m(x)`.
    pub fn drift_product(&self, x: f64) -> f64 {
        let m = self.kernel.mean(x);
        let b = self.rate.rate(x);
        if b == 0.0 {
            0.0
        } else {
            b * m
        }
    }
}

/// The jump mechanism of a contour process: a jump clock along the descent and
/// a jump-size law depending on the level at which the jump occurs.
pub trait JumpLaw {
    /// Level `y < x` at which the next jump happens when descending from `x`
    /// with exponential clock `e`, or `None` if the path reaches 0 first.
    fn next_jump_level(&self, x: f64, e: f64) -> Option<f64>;

    /// Draws the size of a jump occurring at level `y`.
    fn jump_size<R: Rng + ?Sized>(&self, y: f64, rng: &mut R) -> Result<f64>;
}

impl JumpLaw for Model {
    fn next_jump_level(&self, x: f64, e: f64) -> Option<f64> {
        self.rate.descend(x, e)
    }

    fn jump_size<R: Rng + ?Sized>(&self, y: f64, rng: &mut R) -> Result<f64> {
        Ok(self.kernel.sample(y, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use crate::stats::mean_se;
    use core::f64::consts::LN_2;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cumulative_examples() {
        let r = RateFunction::constant(1.0).unwrap();
        assert!(close(r.cumulative(0.0, 2.0).unwrap(), 2.0, 1e-15));
        let r = RateFunction::asymptotically_critical(1.0).unwrap();
        assert!(close(r.cumulative(0.0, 1.0).unwrap(), 1.0 + LN_2, 1e-14));
        let r = RateFunction::piecewise_constant(vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        assert!(close(r.cumulative(0.5, 1.5).unwrap(), 2.0, 1e-14));
    }

    #[test]
    fn cumulative_rejects_reversed_interval() {
        let r = RateFunction::constant(1.0).unwrap();
        assert_eq!(
            r.cumulative(2.0, 1.0),
            Err(Error::Ordering { t0: 2.0, t1: 1.0 })
        );
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(RateFunction::constant(-1.0).is_err());
        assert!(RateFunction::asymptotically_critical(-2.0).is_err());
        assert!(RateFunction::piecewise_constant(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(RateFunction::sinusoidal(0.1, 0.5, 1.0).is_err());
        assert!(LifetimeKernel::dirac(0.0).is_err());
        assert!(LifetimeKernel::pareto(-1.0).is_err());
        assert!(LifetimeKernel::exponential_constant(0.0).is_err());
        assert!(LifetimeKernel::tabulated(vec![0.0, 1.0], vec![0.0, 0.5]).is_err());
    }

    #[test]
    fn tabulated_rate_integrates_its_interpolant() {
        let r = RateFunction::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 2.0]).unwrap();
        assert!(close(r.cumulative(0.0, 1.0).unwrap(), 1.0, 1e-15));
        assert!(close(r.cumulative(0.0, 3.0).unwrap(), 5.0, 1e-14));
        assert!(close(r.rate(0.5), 1.0, 1e-15));
    }

    #[test]
    fn moments_examples() {
        assert_eq!(LifetimeKernel::pareto(3.0).unwrap().moment(0.0, 1), 1.5);
        assert_eq!(
            LifetimeKernel::pareto(3.0).unwrap().moment(0.0, 3),
            f64::INFINITY
        );
        assert_eq!(LifetimeKernel::dirac(1.0).unwrap().moment(4.0, 7), 1.0);
        assert!(close(
            LifetimeKernel::exponential_constant(2.0)
                .unwrap()
                .moment(0.0, 1),
            0.5,
            1e-15
        ));
        assert!(close(
            LifetimeKernel::exponential_constant(2.0)
                .unwrap()
                .moment(0.0, 2),
            0.5,
            1e-15
        ));
    }

    #[test]
    fn time_dependent_exponential_moment_uses_quadrature() {
        let death = RateFunction::piecewise_constant(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let k = LifetimeKernel::exponential(death).unwrap();
        // Born at 1, the death rate is 2 from then on.
        assert!(close(k.moment(1.0, 1), 0.5, 1e-9));
        // Born at 0: ∫_0^1 e^{-y} dy + e^{-1}/2.
        let exact = 1.0 - (-1.0f64).exp() + 0.5 * (-1.0f64).exp();
        assert!(close(k.moment(0.0, 1), exact, 1e-9));
    }

    #[test]
    fn expectation_examples() {
        let k = LifetimeKernel::dirac(2.5).unwrap();
        assert_eq!(k.expect(0.0, |y| y * y).unwrap(), 6.25);
        let k = LifetimeKernel::exponential_constant(1.0).unwrap();
        assert!(close(
            k.expect(0.0, |y: f64| (-y).exp()).unwrap(),
            0.5,
            1e-10
        ));
        let k = LifetimeKernel::pareto(3.0).unwrap();
        assert!(close(k.expect(0.0, |y| y * y).unwrap(), 3.0, 1e-8));
        assert!(matches!(
            k.expect(0.0, |y| y * y * y),
            Err(Error::Integration { .. })
        ));
    }

    fn all_kernels() -> Vec<LifetimeKernel> {
        vec![
            LifetimeKernel::dirac(1.0).unwrap(),
            LifetimeKernel::exponential_constant(2.0).unwrap(),
            LifetimeKernel::exponential(RateFunction::sinusoidal(2.0, 1.0, 1.0).unwrap()).unwrap(),
            LifetimeKernel::pareto(3.0).unwrap(),
            LifetimeKernel::TwoPointDeath,
            LifetimeKernel::tabulated(vec![0.0, 1.0, 3.0], vec![0.0, 0.25, 1.0]).unwrap(),
        ]
    }

    #[test]
    fn kernels_are_probability_measures() {
        for k in all_kernels() {
            for &t in &[0.0, 0.5, 1.5, 3.0] {
                let total = k.expect(t, |_| 1.0).unwrap();
                assert!(close(total, 1.0, 1e-10), "{k:?} at {t}: {total}");
            }
        }
    }

    #[test]
    fn sampler_mean_matches_moment() {
        for (i, k) in all_kernels().into_iter().enumerate() {
            for &t in &[0.0, 0.5, 1.5] {
                let mut rng = replica_rng(11, i as u64);
                let xs: Vec<f64> = (0..100_000).map(|_| k.sample(t, &mut rng)).collect();
                let (m, se) = mean_se(&xs);
                let exact = k.mean(t);
                let tol = 4.0 * se.max(1e-12);
                assert!((m - exact).abs() <= tol, "{k:?} at {t}: {m} vs {exact}");
            }
        }
    }

    #[test]
    fn interval_moments_sum_to_totals() {
        let k = LifetimeKernel::pareto(3.0).unwrap();
        let (a, b) = k.interval_moments(0.0, 2.0).unwrap();
        let (c, d) = k.interval_moments(2.0, f64::INFINITY).unwrap();
        assert!(close(a + c, 1.0, 1e-14));
        assert!(close(b + d, 1.5, 1e-14));
        let k = LifetimeKernel::tabulated(vec![0.0, 1.0, 3.0], vec![0.0, 0.25, 1.0]).unwrap();
        let (m, f) = k.interval_moments(0.0, 10.0).unwrap();
        assert!(close(m, 1.0, 1e-14));
        assert!(close(f, k.mean(0.0), 1e-14));
    }

    #[test]
    fn two_point_kernel_is_flagged_discontinuous() {
        assert!(!LifetimeKernel::TwoPointDeath.is_weakly_continuous());
        assert!(LifetimeKernel::pareto(2.0).unwrap().is_weakly_continuous());
        assert_eq!(LifetimeKernel::TwoPointDeath.mean(0.25), 1.25);
        assert_eq!(LifetimeKernel::TwoPointDeath.mean(1.5), 0.5);
    }

    fn rate_strategy() -> impl Strategy<Value = RateFunction> {
        prop_oneof![
            (0.0..5.0f64).prop_map(|b| RateFunction::constant(b).unwrap()),
            (-1.0..3.0f64).prop_map(|c| RateFunction::asymptotically_critical(c).unwrap()),
            (0.5..3.0f64, 0.0..0.5f64, 0.1..4.0f64)
                .prop_map(|(b, a, w)| RateFunction::sinusoidal(b, a, w).unwrap()),
            (0.0..3.0f64, 0.0..3.0f64, 0.1..4.0f64).prop_map(|(a, b, s)| {
                RateFunction::piecewise_constant(vec![0.0, s], vec![a, b]).unwrap()
            }),
            (0.0..3.0f64, 0.0..3.0f64, 0.1..4.0f64).prop_map(|(a, b, s)| RateFunction::tabulated(
                vec![0.0, s],
                vec![a, b]
            )
            .unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn cumulative_is_additive(r in rate_strategy(), a in 0.0..10.0f64, d1 in 0.0..5.0f64, d2 in 0.0..5.0f64) {
            let (t0, t1, t2) = (a, a + d1, a + d1 + d2);
            let whole = r.cumulative(t0, t2).unwrap();
            let split = r.cumulative(t0, t1).unwrap() + r.cumulative(t1, t2).unwrap();
            prop_assert!((whole - split).abs() <= 1e-12 * (1.0 + whole.abs()));
        }

        #[test]
        fn descend_inverts_the_cumulative(r in rate_strategy(), x in 0.01..20.0f64, e in 0.0..10.0f64) {
            match r.descend(x, e) {
                None => prop_assert!(r.cumulative(0.0, x).unwrap() <= e + 1e-12),
                Some(y) => {
                    prop_assert!((0.0..=x).contains(&y));
                    let got = r.cumulative(y, x).unwrap();
                    prop_assert!((got - e).abs() <= 1e-9 * (1.0 + e), "{} vs {}", got, e);
                }
            }
        }

        #[test]
        fn ascend_inverts_the_cumulative(r in rate_strategy(), s in 0.0..20.0f64, e in 0.0..10.0f64) {
            match r.ascend(s, e, 40.0) {
                None => prop_assert!(r.cumulative(s, 40.0).unwrap() <= e + 1e-12),
                Some(u) => {
                    prop_assert!(u >= s);
                    let got = r.cumulative(s, u).unwrap();
                    prop_assert!((got - e).abs() <= 1e-9 * (1.0 + e));
                }
            }
        }
    }
}
