//! JSON configuration of every subcommand.
//!
//! Unknown fields are rejected and every optional field has a documented
//! default, so a resolved configuration (as echoed in a manifest) fully
//! determines a run.

use ist_core::conditioning::{ConditioningEvent, HarmonicOptions};
use ist_core::model::{LifetimeKernel, Model, RateFunction};
use ist_core::scale::ExtinctionOptions;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Birth rate `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSpec {
    /// `b(t) = beta`.
    Constant { beta: f64 },
    /// `b(t) = 1 + c/(1+t)`.
    AsymptoticallyCritical { c: f64 },
    /// `b(t) = beta`, paired with the criticality driver `cos t + offset`.
    Periodic { beta: f64, offset: f64 },
    /// `b(t) = base + amplitude·sin(frequency·t)`.
    Sinusoidal {
        base: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// `values[i]` on `[breakpoints[i], breakpoints[i+1])`, first breakpoint 0.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// Linear interpolation of `values` on `grid` (first node 0), constant beyond.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl RateSpec {
    pub fn build(&self) -> ist_core::Result<RateFunction> {
        match self {
            RateSpec::Constant { beta } => RateFunction::constant(*beta),
            RateSpec::AsymptoticallyCritical { c } => RateFunction::asymptotically_critical(*c),
            RateSpec::Periodic { beta, offset } => RateFunction::periodic(*beta, *offset),
            RateSpec::Sinusoidal {
                base,
                amplitude,
                frequency,
            } => RateFunction::sinusoidal(*base, *amplitude, *frequency),
            RateSpec::PiecewiseConstant {
                breakpoints,
                values,
            } => RateFunction::piecewise_constant(breakpoints.clone(), values.clone()),
            RateSpec::Tabulated { grid, values } => {
                RateFunction::tabulated(grid.clone(), values.clone())
            }
        }
    }
}

/// Lifetime kernel `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Every lifetime equals `a`.
    Dirac { a: f64 },
    /// Death at rate `death(t)` in absolute time.
    Exponential { death: RateSpec },
    /// Density `k/y^{k+1}` on `[1, ∞)`.
    Pareto { k: f64 },
    /// Deaths at the absolute times 1 and 2.
    TwoPointDeath,
    /// Piecewise linear CDF through `(points[i], cdf[i])`.
    Tabulated { points: Vec<f64>, cdf: Vec<f64> },
}

impl KernelSpec {
    pub fn build(&self) -> ist_core::Result<LifetimeKernel> {
        match self {
            KernelSpec::Dirac { a } => LifetimeKernel::dirac(*a),
            KernelSpec::Exponential { death } => LifetimeKernel::exponential(death.build()?),
            KernelSpec::Pareto { k } => LifetimeKernel::pareto(*k),
            KernelSpec::TwoPointDeath => Ok(LifetimeKernel::TwoPointDeath),
            KernelSpec::Tabulated { points, cdf } => {
                LifetimeKernel::tabulated(points.clone(), cdf.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub rate: RateSpec,
    pub kernel: KernelSpec,
}

impl ModelSpec {
    pub fn build(&self) -> ist_core::Result<Model> {
        Model::new(self.rate.build()?, self.kernel.build()?)
    }
}

fn one() -> usize {
    1
}

fn default_max_nodes() -> usize {
    10_000_000
}

fn default_max_jumps() -> usize {
    10_000_000
}

/// `tree`: simulate truncated trees and dump them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    pub model: ModelSpec,
    /// Root lifetime.
    pub x0: f64,
    /// Truncation level `T`.
    pub t_max: f64,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

/// How `contour` builds its paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ContourSource {
    /// Explore simulated trees truncated at `cap`.
    Tree,
    /// Simulate the piecewise-deterministic process directly.
    Pdmp,
}

/// `contour`: simulate contour paths and dump them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub model: ModelSpec,
    pub source: ContourSource,
    pub x0: f64,
    /// Level cap `T`. Required for trees.
    #[serde(default)]
    pub cap: Option<f64>,
    /// Path-time horizon for the direct simulation.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default = "default_max_jumps")]
    pub max_jumps: usize,
}

fn default_horizon() -> f64 {
    1e6
}

/// `scale`: solve `S_T` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub model: ModelSpec,
    pub t_max: f64,
    #[serde(default = "default_mesh")]
    pub mesh: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
}

fn default_mesh() -> usize {
    512
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_sweeps() -> usize {
    10_000
}

/// `extinction`: the limit `S(t0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExtinctionConfig {
    pub model: ModelSpec,
    pub t0: Vec<f64>,
    #[serde(default = "default_ext_tol")]
    pub tol: f64,
    #[serde(default = "default_steps_per_unit")]
    pub steps_per_unit: usize,
    #[serde(default = "default_max_mesh")]
    pub max_mesh: usize,
    #[serde(default = "default_t_start")]
    pub t_start: f64,
    #[serde(default = "default_t_limit")]
    pub t_limit: f64,
}

fn default_ext_tol() -> f64 {
    1e-4
}

fn default_steps_per_unit() -> usize {
    64
}

fn default_max_mesh() -> usize {
    4096
}

fn default_t_start() -> f64 {
    4.0
}

fn default_t_limit() -> f64 {
    256.0
}

impl ExtinctionConfig {
    pub fn options(&self) -> ExtinctionOptions {
        ExtinctionOptions {
            tol: self.tol,
            steps_per_unit: self.steps_per_unit,
            max_mesh: self.max_mesh,
            t_start: self.t_start,
            t_limit: self.t_limit,
            solve_tol: 1e-9,
        }
    }
}

/// `population`: law of `Ξ_t` and its Monte Carlo comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub model: ModelSpec,
    /// Root lifetime.
    pub t0: f64,
    /// Observation time.
    pub t: f64,
    #[serde(default = "default_mesh")]
    pub mesh: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Tree replicas for the comparison; 0 skips it.
    #[serde(default)]
    pub replicas: usize,
}

/// Uniform scan grid `x_max·i/points`, `i = 1..=points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub x_max: f64,
    pub points: usize,
}

/// `classify`: asymptotic drift criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub model: ModelSpec,
    #[serde(default = "default_scan")]
    pub scan: ScanSpec,
    /// Also solve for the extinction probability at this level.
    #[serde(default)]
    pub extinction_at: Option<f64>,
}

fn default_scan() -> ScanSpec {
    ScanSpec {
        x_max: 200.0,
        points: 400,
    }
}

/// `tails`: tree-length tail estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TailsConfig {
    pub model: ModelSpec,
    pub x0: f64,
    pub t_max: f64,
    pub replicas: usize,
    pub thresholds: Vec<f64>,
}

/// Event of the `condition` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    Extinction,
    Survival,
    HeightAtMost { level: f64 },
    HeightAbove { level: f64 },
}

impl EventSpec {
    pub fn event(&self) -> ConditioningEvent {
        match *self {
            EventSpec::Extinction => ConditioningEvent::Extinction,
            EventSpec::Survival => ConditioningEvent::Survival,
            EventSpec::HeightAtMost { level } => ConditioningEvent::HeightAtMost(level),
            EventSpec::HeightAbove { level } => ConditioningEvent::HeightAbove(level),
        }
    }
}

/// `condition`: h-transformed parameters and their validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ConditionConfig {
    pub model: ModelSpec,
    pub event: EventSpec,
    /// Lowest grid level; must be positive for survival-type events.
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default = "default_grid_points")]
    pub points: usize,
    /// Start level of the simulated paths.
    pub x0: f64,
    #[serde(default = "default_cond_horizon")]
    pub horizon: f64,
    /// Paths stop on reaching this level; survival means reaching it.
    #[serde(default = "default_barrier")]
    pub barrier: f64,
    /// Level whose upcrossings give the population summary.
    pub level: f64,
    /// Conditioned replicas; 0 skips simulation.
    #[serde(default)]
    pub replicas: usize,
    /// Also run the rejection-filtered comparison.
    #[serde(default)]
    pub compare: bool,
    /// Scale solves behind the harmonic function.
    #[serde(default)]
    pub solver: HarmonicSpec,
}

/// Numerical settings for the harmonic function of `condition`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct HarmonicSpec {
    /// Grid intervals per unit level.
    pub steps_per_unit: usize,
    /// Tolerance of each scale solve.
    pub solve_tol: f64,
    /// Extinction limit: stop when successive levels agree to this.
    pub tol: f64,
    /// Extinction limit: cap on grid intervals.
    pub max_mesh: usize,
    /// Extinction limit: largest truncation level tried.
    pub t_limit: f64,
}

impl Default for HarmonicSpec {
    fn default() -> Self {
        HarmonicSpec {
            steps_per_unit: 64,
            solve_tol: 1e-10,
            tol: 1e-4,
            max_mesh: 4096,
            t_limit: 256.0,
        }
    }
}

impl HarmonicSpec {
    pub fn options(&self) -> HarmonicOptions {
        HarmonicOptions {
            extinction: ExtinctionOptions {
                tol: self.tol,
                steps_per_unit: self.steps_per_unit,
                max_mesh: self.max_mesh,
                t_limit: self.t_limit,
                ..ExtinctionOptions::default()
            },
            steps_per_unit: self.steps_per_unit,
            solve_tol: self.solve_tol,
        }
    }
}

fn default_x_min() -> f64 {
    0.01
}

fn default_grid_points() -> usize {
    201
}

fn default_cond_horizon() -> f64 {
    1e4
}

fn default_barrier() -> f64 {
    30.0
}

/// `scaling`: assumption check, rescaled runs and the Bessel comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub model: ModelSpec,
    /// Drift coefficient of the limiting Bessel process.
    pub c: f64,
    pub x0: f64,
    pub t: f64,
    pub n_list: Vec<u32>,
    pub replicas: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_assumption_scan")]
    pub scan: ScanSpec,
    /// Rescaled horizon for the absorption frequency; omitted skips it.
    #[serde(default)]
    pub absorption_horizon: Option<f64>,
}

fn default_alpha() -> f64 {
    0.01
}

fn default_assumption_scan() -> ScanSpec {
    ScanSpec {
        x_max: 2000.0,
        points: 400,
    }
}

/// `verify`: the acceptance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Criteria to run (1 to 10); empty runs all.
    #[serde(default)]
    pub criteria: Vec<u32>,
}
