//! Conditioning on extinction, survival or height events by an h-transform.
//!
//! Given a harmonic function `h`, the conditioned dynamics jump at rate
//! `b'(x) = b(x)·(Kh)(x)/h(x)` with jump kernel `K^h(f) = K(hf)/K(h)`, where
//! `(Kh)(x) = ∫ h(x+y) K(x, dy)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;

use crate::contour::{simulate_pdmp, ContourPath, PdmpOptions};
use crate::model::{JumpLaw, LifetimeKernel, Model, RateFunction};
use crate::quad::{self, QuadOptions};
use crate::replicas::Replicas;
use crate::rng::{derive_seed, replica_rng};
use crate::scale::{
    extinction_probability, solve_scale, ExtinctionOptions, ScaleFunction, ScaleTable,
};
use crate::stats::{ks_two_sample, KsOutcome};
use crate::{Error, Result};

/// Event to condition on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditioningEvent {
    /// Eventual extinction.
    Extinction,
    /// Survival forever.
    Survival,
    /// Height at most `T`.
    HeightAtMost(f64),
    /// Height above `T`.
    HeightAbove(f64),
}

/// The function `h` driving the transform.
#[derive(Debug, Clone, PartialEq)]
pub enum Harmonic {
    /// `h ≡ c`. Conditioning leaves the dynamics unchanged.
    Constant(f64),
    /// `h = S`.
    Extinction(ScaleFunction),
    /// `h = 1 - S`.
    Survival(ScaleFunction),
    /// `h = S_T`.
    HeightAtMost(ScaleTable),
    /// `h = 1 - S_T`.
    HeightAbove(ScaleTable),
}

/// Numerical settings used to build `h` for an event.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicOptions {
    /// Settings of the extinction solve for `Extinction` and `Survival`.
    pub extinction: ExtinctionOptions,
    /// Grid intervals per unit level for the height events.
    pub steps_per_unit: usize,
    pub solve_tol: f64,
}

impl Default for HarmonicOptions {
    fn default() -> Self {
        HarmonicOptions {
            extinction: ExtinctionOptions::default(),
            steps_per_unit: 64,
            solve_tol: 1e-10,
        }
    }
}

impl Harmonic {
    /// Solves the scale function needed for `event`.
    pub fn for_event(
        model: &Model,
        event: ConditioningEvent,
        opts: HarmonicOptions,
    ) -> Result<Self> {
        match event {
            ConditioningEvent::Extinction | ConditioningEvent::Survival => {
                let estimate = extinction_probability(model, 1.0, opts.extinction)?;
                let s = ScaleFunction::from_table(estimate.table);
                if event == ConditioningEvent::Extinction {
                    Ok(Harmonic::Extinction(s))
                } else {
                    // 1 - S below the extinction tolerance is indistinguishable from 0.
                    let far = 1.0 - s.value_at(s.trusted_range());
                    if far < 10.0 * opts.extinction.tol {
                        return Err(Error::DegenerateConditioning {
                            level: s.trusted_range(),
                        });
                    }
                    Ok(Harmonic::Survival(s))
                }
            }
            ConditioningEvent::HeightAtMost(t) | ConditioningEvent::HeightAbove(t) => {
                if !(t > 0.0) || !t.is_finite() {
                    return Err(Error::invalid("T", "height level must be finite and > 0"));
                }
                let mesh = ((t * opts.steps_per_unit as f64).ceil() as usize).max(16);
                let table = solve_scale(model, t, mesh, opts.solve_tol)?;
                if matches!(event, ConditioningEvent::HeightAtMost(_)) {
                    Ok(Harmonic::HeightAtMost(table))
                } else {
                    Ok(Harmonic::HeightAbove(table))
                }
            }
        }
    }

    /// `h(x)` for `x >= 0`.
    pub fn value_at(&self, x: f64) -> f64 {
        match self {
            Harmonic::Constant(c) => *c,
            Harmonic::Extinction(s) => s.value_at(x),
            Harmonic::Survival(s) => 1.0 - s.value_at(x),
            Harmonic::HeightAtMost(tab) => tab.value_at(x),
            Harmonic::HeightAbove(tab) => 1.0 - tab.value_at(x),
        }
    }

    /// Whether `h` vanishes at 0, so that conditioned paths must avoid 0.
    pub fn vanishes_at_zero(&self) -> bool {
        matches!(self, Harmonic::Survival(_) | Harmonic::HeightAbove(_))
    }

    /// Lifetimes `y` at which `y ↦ h(x + y)` has a kink or a jump.
    fn breaks(&self, x: f64) -> Vec<f64> {
        let (step, last) = match self {
            Harmonic::Constant(_) => return Vec::new(),
            Harmonic::Extinction(s) | Harmonic::Survival(s) => {
                let step = s.table().step();
                (step, (s.trusted_range() / step).floor() as usize)
            }
            Harmonic::HeightAtMost(tab) | Harmonic::HeightAbove(tab) => (tab.step(), tab.mesh()),
        };
        let first = (x / step).floor() as usize + 1;
        (first..=last).map(|j| j as f64 * step - x).collect()
    }

    fn event_level(&self) -> Option<f64> {
        match self {
            Harmonic::HeightAtMost(tab) | Harmonic::HeightAbove(tab) => Some(tab.t_max()),
            _ => None,
        }
    }

    /// Node values on the tabulated part, the spacing, and `sup h` beyond it.
    fn profile(&self) -> (Vec<f64>, f64, f64) {
        match self {
            Harmonic::Constant(c) => (vec![*c], 1.0, *c),
            Harmonic::Extinction(s) | Harmonic::Survival(s) => {
                let step = s.table().step();
                let last = (s.trusted_range() / step).floor() as usize;
                let nodes: Vec<f64> = (0..=last).map(|j| self.value_at(j as f64 * step)).collect();
                let tail_start = s.value_at(s.trusted_range() * (1.0 + 1e-12) + 1e-300);
                let tail = if let Harmonic::Extinction(_) = self {
                    tail_start
                } else if s.tail_rate() > 0.0 {
                    1.0
                } else {
                    1.0 - tail_start
                };
                (nodes, step, tail)
            }
            Harmonic::HeightAtMost(tab) => {
                let nodes = tab.values().to_vec();
                (nodes, tab.step(), 0.0)
            }
            Harmonic::HeightAbove(tab) => {
                let nodes = tab.values().iter().map(|v| 1.0 - v).collect();
                (nodes, tab.step(), 1.0)
            }
        }
    }
}

/// `sup_{z >= x} h(z)` for a piecewise linear `h` with a known tail bound.
#[derive(Debug, Clone, PartialEq)]
struct SuffixSup {
    suffix: Vec<f64>,
    step: f64,
    tail: f64,
}

impl SuffixSup {
    fn new(h: &Harmonic) -> Self {
        let (nodes, step, tail) = h.profile();
        let mut suffix = nodes;
        let mut run = tail;
        for v in suffix.iter_mut().rev() {
            run = run.max(*v);
            *v = run;
        }
        SuffixSup { suffix, step, tail }
    }

    fn sup_from(&self, x: f64, hx: f64) -> f64 {
        let next = (x / self.step).floor() as usize + 1;
        let beyond = self.suffix.get(next).copied().unwrap_or(self.tail);
        hx.max(beyond)
    }
}

/// Grid on which `b'` and the moments of `K^h` are tabulated.
#[derive(Debug, Clone, Copy)]
pub struct ConditioningGrid {
    /// Smallest level of the grid; levels below it use the values at `x_min`.
    pub x_min: f64,
    /// Largest level of the grid; levels above it use the values at `x_max`.
    pub x_max: f64,
    pub points: usize,
}

impl ConditioningGrid {
    pub fn new(x_min: f64, x_max: f64, points: usize) -> Self {
        ConditioningGrid {
            x_min,
            x_max,
            points,
        }
    }
}

/// One row of the conditioned-parameter dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionedRow {
    pub x: f64,
    /// `b'(x)`.
    pub rate: f64,
    /// First three moments of `K^h(x, ·)`.
    pub moments: [f64; 3],
    /// Total mass of `K^h(x, ·)`.
    pub normalization: f64,
}

/// Parameters of the h-transformed dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedParams {
    base: Model,
    harmonic: Harmonic,
    rate: RateFunction,
    rows: Vec<ConditionedRow>,
    sup: SuffixSup,
    x_min: f64,
}

const FALLBACK_CELLS: usize = 4096;
const MAX_REJECTIONS: usize = 10_000;

fn conditioning_quad() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        max_intervals: 20_000,
    }
}

/// Builds `b' = b·Kh/h` and `K^h` on `grid`.
///
/// Fails with [`Error::DegenerateConditioning`] at the first grid level where
/// `h` or `Kh` vanishes. For a constant `h` the base rate is returned as is.
pub fn condition_params(
    model: &Model,
    harmonic: Harmonic,
    grid: ConditioningGrid,
) -> Result<ConditionedParams> {
    if let Harmonic::Constant(c) = harmonic {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid("h", "constant must be finite and > 0"));
        }
    }
    let ConditioningGrid {
        x_min,
        mut x_max,
        points,
    } = grid;
    if !(x_min >= 0.0) || !(x_max > x_min) || !x_max.is_finite() || points < 2 {
        return Err(Error::invalid(
            "grid",
            "need 0 <= x_min < x_max < inf and at least 2 points",
        ));
    }
    if harmonic.vanishes_at_zero() && x_min == 0.0 {
        return Err(Error::invalid(
            "x_min",
            "h vanishes at 0; the grid must start above 0",
        ));
    }
    if let Harmonic::HeightAtMost(tab) = &harmonic {
        // h = 0 from T on; conditioned paths stay below T.
        x_max = x_max.min(tab.t_max() * (1.0 - 0.5 / tab.mesh() as f64));
        if !(x_max > x_min) {
            return Err(Error::invalid(
                "grid",
                "x_min must lie below the height level",
            ));
        }
    }
    let opts = conditioning_quad();
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let x = x_min + (x_max - x_min) * i as f64 / (points - 1) as f64;
        rows.push(transform_at(model, &harmonic, x, opts)?);
    }
    let rate = if matches!(harmonic, Harmonic::Constant(_)) {
        model.rate.clone()
    } else {
        let mut xs = Vec::with_capacity(points + 1);
        let mut vs = Vec::with_capacity(points + 1);
        if x_min > 0.0 {
            xs.push(0.0);
            vs.push(rows[0].rate);
        }
        for r in &rows {
            xs.push(r.x);
            vs.push(r.rate);
        }
        RateFunction::tabulated(xs, vs)?
    };
    let sup = SuffixSup::new(&harmonic);
    Ok(ConditionedParams {
        base: model.clone(),
        harmonic,
        rate,
        rows,
        sup,
        x_min,
    })
}

fn transform_at(
    model: &Model,
    harmonic: &Harmonic,
    x: f64,
    opts: QuadOptions,
) -> Result<ConditionedRow> {
    let kernel = &model.kernel;
    let b = model.rate.rate(x);
    if let Harmonic::Constant(_) = harmonic {
        let mut moments = [0.0; 3];
        for (p, m) in moments.iter_mut().enumerate() {
            *m = kernel.moment(x, p as u32 + 1);
        }
        return Ok(ConditionedRow {
            x,
            rate: b,
            moments,
            normalization: 1.0,
        });
    }
    let hx = harmonic.value_at(x);
    if !(hx > 0.0) {
        return Err(Error::DegenerateConditioning { level: x });
    }
    // Tolerances relative to the size of h near x.
    let opts = QuadOptions {
        abs_tol: opts.abs_tol * hx,
        ..opts
    };
    let h = |y: f64| harmonic.value_at(x + y);
    let breaks = harmonic.breaks(x);
    let kh = kernel_integral(kernel, x, h, &breaks, opts)?;
    if !(kh > 0.0) {
        return Err(Error::DegenerateConditioning { level: x });
    }
    let mut moments = [0.0; 3];
    for (p, m) in moments.iter_mut().enumerate() {
        let k = p as i32 + 1;
        *m = kernel_integral(kernel, x, |y| y.powi(k) * h(y), &breaks, opts)? / kh;
    }
    // Mass of K^h recomputed on a partition refined at the kernel median.
    let median = kernel.quantile(x, 0.5);
    let mut refined = breaks.clone();
    refined.push(median);
    let mass = kernel_integral(kernel, x, h, &refined, opts)?;
    Ok(ConditionedRow {
        x,
        rate: b * kh / hx,
        moments,
        normalization: mass / kh,
    })
}

/// `∫ f(y) K(x, dy)` with the integration range split at `breaks` and at the
/// kinks of the kernel density.
fn kernel_integral<F: Fn(f64) -> f64>(
    kernel: &LifetimeKernel,
    x: f64,
    f: F,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<f64> {
    if let Some(atoms) = kernel.atoms(x) {
        return Ok(atoms.iter().map(|&(a, w)| w * f(a)).sum());
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .chain(kernel.density_breaks().iter())
        .copied()
        .filter(|&y| y > 0.0 && y.is_finite())
        .collect();
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let integrand = |y: f64| match kernel.density(x, y) {
        Some(d) if d > 0.0 => f(y) * d,
        _ => 0.0,
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += quad::integrate(integrand, w[0], w[1], opts)?;
    }
    total += quad::integrate_to_infinity(integrand, cuts[cuts.len() - 1], opts)?;
    Ok(total)
}

impl ConditionedParams {
    pub fn base(&self) -> &Model {
        &self.base
    }

    pub fn harmonic(&self) -> &Harmonic {
        &self.harmonic
    }

    /// `b'` as a rate function (interpolated between grid levels).
    pub fn rate(&self) -> &RateFunction {
        &self.rate
    }

    /// Tabulated values, one per grid level.
    pub fn rows(&self) -> &[ConditionedRow] {
        &self.rows
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    /// Largest `|∫K^h(x, dy) - 1|` over the grid.
    pub fn normalization_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.normalization - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Draws from `K^h(x, ·)`.
    ///
    /// Rejection against `K(x, ·)` with acceptance `h(x+y) / sup_{z>=x} h(z)`.
    /// After 10⁴ consecutive rejections the draw falls back to an inverse-CDF
    /// on 4096 equal-mass cells of `K(x, ·)` reweighted by `h`.
    pub fn sample_kernel<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<f64> {
        let kernel = &self.base.kernel;
        if let Harmonic::Constant(_) = self.harmonic {
            return Ok(kernel.sample(x, rng));
        }
        let hx = self.harmonic.value_at(x);
        let sup = self.sup.sup_from(x, hx);
        if !(sup > 0.0) {
            return Err(Error::DegenerateConditioning { level: x });
        }
        for _ in 0..MAX_REJECTIONS {
            let y = kernel.sample(x, rng);
            let u: f64 = rng.random();
            if u * sup < self.harmonic.value_at(x + y) {
                return Ok(y);
            }
        }
        log::warn!(
            "conditioned kernel at level {x}: acceptance below 1e-4, using grid inverse-CDF"
        );
        self.sample_kernel_grid(kernel, x, rng)
    }

    fn sample_kernel_grid<R: Rng + ?Sized>(
        &self,
        kernel: &LifetimeKernel,
        x: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let mut cells = Vec::with_capacity(FALLBACK_CELLS);
        let mut total = 0.0;
        for i in 0..FALLBACK_CELLS {
            let y = kernel.quantile(x, (i as f64 + 0.5) / FALLBACK_CELLS as f64);
            total += self.harmonic.value_at(x + y);
            cells.push((y, total));
        }
        if !(total > 0.0) {
            return Err(Error::DegenerateConditioning { level: x });
        }
        let u: f64 = rng.random::<f64>() * total;
        let i = cells
            .partition_point(|&(_, c)| c <= u)
            .min(FALLBACK_CELLS - 1);
        Ok(cells[i].0)
    }
}

impl JumpLaw for ConditionedParams {
    fn next_jump_level(&self, x: f64, e: f64) -> Option<f64> {
        self.rate.descend(x, e)
    }

    fn jump_size<R: Rng + ?Sized>(&self, y: f64, rng: &mut R) -> Result<f64> {
        self.sample_kernel(y, rng)
    }
}

/// Height, length and population at a level of one simulated contour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSummary {
    /// Largest level visited.
    pub height: f64,
    /// Absorption time, when the path is absorbed.
    pub length: Option<f64>,
    /// Number of upcrossings of the reference level.
    pub population: usize,
    /// Smallest level visited before absorption or the horizon.
    pub floor: f64,
    /// Level at the end of the simulated window.
    pub end_value: f64,
}

impl PathSummary {
    pub fn of(path: &ContourPath, level: f64) -> Self {
        let height = path.jumps.iter().map(|j| j.to).fold(path.start, f64::max);
        let end_value = path.value_at(path.end());
        let floor = path
            .jumps
            .iter()
            .map(|j| j.from)
            .fold(end_value.min(path.start), f64::min);
        PathSummary {
            height,
            length: path.absorption,
            population: path.upcrossing_count(level),
            floor,
            end_value,
        }
    }
}

/// Settings shared by [`simulate_conditioned`] and [`rejection_filtered`].
#[derive(Debug, Clone, Copy)]
pub struct ConditionedRunOptions {
    /// Path time at which simulation stops.
    pub horizon: f64,
    /// Paths stop once they reach this level. Used to decide survival.
    pub barrier: f64,
    /// Level whose upcrossings are counted.
    pub level: f64,
    /// Threshold for the "near zero at the horizon" count.
    pub epsilon: f64,
    pub max_jumps: usize,
}

impl ConditionedRunOptions {
    pub fn new(horizon: f64, barrier: f64, level: f64) -> Self {
        ConditionedRunOptions {
            horizon,
            barrier,
            level,
            epsilon: 1e-2,
            max_jumps: 10_000_000,
        }
    }

    fn pdmp(&self) -> PdmpOptions {
        let mut o = PdmpOptions::new(None, self.horizon);
        o.max_jumps = self.max_jumps;
        o.stop_above = Some(self.barrier);
        o
    }
}

/// Outcome of [`simulate_conditioned`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedRun {
    /// Start level after flooring at `x_min`.
    pub start: f64,
    pub replicas: usize,
    pub absorbed: usize,
    /// Paths that exceeded the height level of a `HeightAtMost` event.
    pub height_violations: usize,
    /// Paths of a survival-type event that went below `x_min`.
    pub floor_violations: usize,
    /// Paths ending below `epsilon` without having been absorbed.
    pub near_zero_at_horizon: usize,
    pub summaries: Vec<PathSummary>,
}

impl ConditionedRun {
    pub fn absorbed_fraction(&self) -> f64 {
        self.absorbed as f64 / self.replicas as f64
    }
}

/// Simulates `replicas` contours of the conditioned dynamics from `x0`.
pub fn simulate_conditioned<E: Replicas>(
    params: &ConditionedParams,
    x0: f64,
    opts: ConditionedRunOptions,
    replicas: usize,
    seed: u64,
    exec: &E,
) -> Result<ConditionedRun> {
    let start = if params.harmonic.vanishes_at_zero() {
        x0.max(params.x_min)
    } else {
        x0
    };
    if !(params.harmonic.value_at(start) > 0.0) {
        return Err(Error::DegenerateConditioning { level: start });
    }
    let stream = derive_seed(seed, 0xC0D1);
    let pdmp = opts.pdmp();
    let results = exec.run(replicas, |i| {
        let mut rng = replica_rng(stream, i as u64);
        simulate_pdmp(params, start, pdmp, &mut rng).map(|p| PathSummary::of(&p, opts.level))
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>>>()?;
    let level = params.harmonic.event_level();
    let mut run = ConditionedRun {
        start,
        replicas,
        absorbed: 0,
        height_violations: 0,
        floor_violations: 0,
        near_zero_at_horizon: 0,
        summaries,
    };
    for s in &run.summaries {
        if s.length.is_some() {
            run.absorbed += 1;
        } else if s.end_value < opts.epsilon {
            run.near_zero_at_horizon += 1;
        }
        if let (Harmonic::HeightAtMost(_), Some(t)) = (&params.harmonic, level) {
            if s.height > t {
                run.height_violations += 1;
            }
        }
        if params.harmonic.vanishes_at_zero() && (s.floor < params.x_min || s.length.is_some()) {
            run.floor_violations += 1;
        }
    }
    Ok(run)
}

/// Outcome of [`rejection_filtered`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredRun {
    pub attempts: usize,
    /// Summaries of the accepted paths, in replica order.
    pub summaries: Vec<PathSummary>,
}

impl FilteredRun {
    pub fn acceptance(&self) -> f64 {
        self.summaries.len() as f64 / self.attempts as f64
    }
}

fn accepts(event: ConditioningEvent, path: &ContourPath, barrier: f64) -> bool {
    let height = path.jumps.iter().map(|j| j.to).fold(path.start, f64::max);
    match event {
        ConditioningEvent::Extinction => path.is_absorbed() && height < barrier,
        ConditioningEvent::Survival => height >= barrier,
        ConditioningEvent::HeightAtMost(t) => path.is_absorbed() && height <= t,
        ConditioningEvent::HeightAbove(t) => height > t,
    }
}

/// Simulates base contours from `x0` and keeps those realizing `event` until
/// `target` are kept or `max_attempts` have been drawn.
///
/// Extinction means absorption before reaching `opts.barrier`; survival means
/// reaching it.
#[allow(clippy::too_many_arguments)]
pub fn rejection_filtered<E: Replicas>(
    model: &Model,
    event: ConditioningEvent,
    x0: f64,
    opts: ConditionedRunOptions,
    target: usize,
    max_attempts: usize,
    seed: u64,
    exec: &E,
) -> Result<FilteredRun> {
    let stream = derive_seed(seed, 0xF11E);
    let mut pdmp = opts.pdmp();
    if let ConditioningEvent::HeightAtMost(t) | ConditioningEvent::HeightAbove(t) = event {
        pdmp.stop_above = Some(t.min(opts.barrier));
    }
    let barrier = pdmp.stop_above.unwrap_or(f64::INFINITY);
    let mut summaries = Vec::with_capacity(target);
    let mut attempts = 0;
    while summaries.len() < target && attempts < max_attempts {
        let batch = (2 * (target - summaries.len()))
            .max(64)
            .min(max_attempts - attempts);
        let offset = attempts;
        let results = exec.run(batch, |i| {
            let mut rng = replica_rng(stream, (offset + i) as u64);
            simulate_pdmp(model, x0, pdmp, &mut rng)
                .map(|p| accepts(event, &p, barrier).then(|| PathSummary::of(&p, opts.level)))
        });
        for r in results {
            attempts += 1;
            if let Some(s) = r? {
                summaries.push(s);
                if summaries.len() == target {
                    break;
                }
            }
        }
    }
    Ok(FilteredRun {
        attempts,
        summaries,
    })
}

/// Two-sample KS outcomes on height, length and population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryComparison {
    pub height: KsOutcome,
    /// Compared over absorbed paths only.
    pub length: KsOutcome,
    pub population: KsOutcome,
}

impl SummaryComparison {
    pub fn passes(&self, alpha: f64) -> bool {
        self.height.passes(alpha) && self.length.passes(alpha) && self.population.passes(alpha)
    }
}

pub fn compare_summaries(a: &[PathSummary], b: &[PathSummary]) -> Result<SummaryComparison> {
    fn column<F: Fn(&PathSummary) -> Option<f64>>(xs: &[PathSummary], f: F) -> Vec<f64> {
        xs.iter().filter_map(f).collect()
    }
    let lengths = (column(a, |s| s.length), column(b, |s| s.length));
    if lengths.0.is_empty() || lengths.1.is_empty() || a.is_empty() || b.is_empty() {
        return Err(Error::Consistency(format!(
            "cannot compare summaries: {} vs {} paths, {} vs {} absorbed",
            a.len(),
            b.len(),
            lengths.0.len(),
            lengths.1.len()
        )));
    }
    Ok(SummaryComparison {
        height: ks_two_sample(
            &column(a, |s| Some(s.height)),
            &column(b, |s| Some(s.height)),
        ),
        length: ks_two_sample(&lengths.0, &lengths.1),
        population: ks_two_sample(
            &column(a, |s| Some(s.population as f64)),
            &column(b, |s| Some(s.population as f64)),
        ),
    })
}
