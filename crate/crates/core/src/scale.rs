//! Scale function of the truncated contour process.
//!
//! `S_T(t)` is the probability that the contour started at level `t` reaches 0
//! before a jump takes it to level `T` or above. It is the fixed point of
//!
//! ```text
//! S(t) = e^{-B(t)} + ∫_0^t b(s) e^{-(B(t)-B(s))} J(s) ds,
//! J(s) = ∫_{[0, T-s)} S(s+v) K(s, dv),
//! ```
//!
//! which [`solve_scale`] computes by Picard iteration on a uniform grid. `S` is
//! treated as piecewise linear inside `J`, and the outer integral is advanced
//! cell by cell with `J` linear on each cell and the exponential factor
//! integrated exactly. Mass landing at `T` or above contributes 0.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::model::{LifetimeKernel, Model, RateFunction};
use crate::quad::{self, QuadOptions};
use crate::{Error, Result};

/// Landings within this relative distance below `T` count as reaching `T`.
const LANDING_EPS: f64 = 1e-12;

/// Solver settings.
#[derive(Debug, Clone, Copy)]
pub struct ScaleOptions {
    pub mesh: usize,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl ScaleOptions {
    pub fn new(mesh: usize, tol: f64) -> Self {
        ScaleOptions {
            mesh,
            tol,
            max_sweeps: 10_000,
        }
    }
}

/// `S_T` on the grid `t_j = j·T/M`. The last node holds the left limit `S_T(T-)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleTable {
    t_max: f64,
    values: Vec<f64>,
    /// Picard sweeps performed.
    pub sweeps: usize,
    /// Sup-norm change of the last sweep.
    pub change: f64,
    /// Tolerance the solver was asked for.
    pub tol: f64,
}

impl ScaleTable {
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn mesh(&self) -> usize {
        self.values.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.t_max / self.mesh() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.step();
        (0..=self.mesh()).map(|j| j as f64 * h).collect()
    }

    /// `S_T(t)` by linear interpolation; 1 below 0 and 0 from `T` on.
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if t >= self.t_max {
            return 0.0;
        }
        let u = t / self.step();
        let j = (u.floor() as usize).min(self.mesh() - 1);
        let w = u - j as f64;
        self.values[j] + w * (self.values[j + 1] - self.values[j])
    }

    /// `S_T(T-)` extrapolated linearly from the last two interior nodes.
    pub fn left_limit(&self) -> f64 {
        let m = self.mesh();
        (2.0 * self.values[m - 1] - self.values[m - 2]).clamp(0.0, 1.0)
    }

    /// `S_T(T-)` as computed at the last node.
    pub fn left_limit_node(&self) -> f64 {
        self.values[self.mesh()]
    }

    /// Largest increase between consecutive nodes (0 for a nonincreasing table).
    pub fn max_increase(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// Discretized `S ↦ J`.
enum KernelOperator {
    /// Exponential kernel: `J_j = L_j + q_j J_{j+1}` with per-interval weights.
    Markov {
        q: Vec<f64>,
        f_h: Vec<f64>,
        mu: Vec<f64>,
    },
    /// Purely atomic kernel: `(node, fraction, weight)` per grid node, for
    /// `K(t_j, ·)` and, when the kernel jumps at some node, for `K(t_j-, ·)`.
    Atoms {
        right: Vec<Vec<(usize, f64, f64)>>,
        left: Option<Vec<Vec<(usize, f64, f64)>>>,
    },
    /// Time-homogeneous kernel: `J_j = Σ_m α_m S_{j+m} + β_m S_{j+m+1}`.
    Convolution { alpha: Vec<f64>, beta: Vec<f64> },
}

impl KernelOperator {
    fn build(kernel: &LifetimeKernel, t_max: f64, m: usize) -> Result<Self> {
        let h = t_max / m as f64;
        let node = |j: usize| j as f64 * h;
        match kernel {
            LifetimeKernel::Exponential { death } => {
                let mut q = vec![0.0; m];
                let mut f_h = vec![0.0; m];
                let mut mu = vec![0.0; m];
                let constant = death.as_constant();
                for j in 0..m {
                    let t = node(j);
                    let surv = (-death.cumulative_unchecked(t, t + h)).exp();
                    let int_f = match constant {
                        Some(d) => h + (-d * h).exp_m1() / d,
                        None => {
                            let s = quad::integrate(
                                |v| (-death.cumulative_unchecked(t, t + v)).exp(),
                                0.0,
                                h,
                                QuadOptions::with_tol(1e-14),
                            )?;
                            h - s
                        }
                    };
                    q[j] = surv;
                    f_h[j] = 1.0 - surv;
                    mu[j] = h * f_h[j] - int_f;
                }
                Ok(KernelOperator::Markov { q, f_h, mu })
            }
            LifetimeKernel::Dirac { .. } | LifetimeKernel::TwoPointDeath => {
                let row = |atoms: Vec<(f64, f64)>, t: f64| atom_row(atoms, t, t_max, m);
                let mut right = Vec::with_capacity(m + 1);
                let mut left = Vec::with_capacity(m + 1);
                for j in 0..=m {
                    let t = node(j);
                    right.push(row(kernel.atoms(t).unwrap_or_default(), t));
                    left.push(row(kernel.atoms_left(t).unwrap_or_default(), t));
                }
                let left = (left != right).then_some(left);
                Ok(KernelOperator::Atoms { right, left })
            }
            LifetimeKernel::Pareto { .. } | LifetimeKernel::Tabulated(_) => {
                let mut alpha = vec![0.0; m];
                let mut beta = vec![0.0; m];
                for k in 0..m {
                    let lo = k as f64 * h;
                    let (mass, first) = kernel.interval_moments(lo, lo + h)?;
                    let b = ((first - lo * mass) / h).clamp(0.0, mass);
                    alpha[k] = mass - b;
                    beta[k] = b;
                }
                Ok(KernelOperator::Convolution { alpha, beta })
            }
        }
    }

    fn apply(&self, s: &[f64], h: f64, out: &mut [f64]) {
        let m = s.len() - 1;
        out[m] = 0.0;
        match self {
            KernelOperator::Markov { q, f_h, mu } => {
                for j in (0..m).rev() {
                    let local = s[j] * f_h[j] + (s[j + 1] - s[j]) * mu[j] / h;
                    out[j] = local + q[j] * out[j + 1];
                }
            }
            KernelOperator::Atoms { right, .. } => atom_sums(right, s, out),
            KernelOperator::Convolution { alpha, beta } => {
                for j in 0..m {
                    let mut acc = 0.0;
                    for k in 0..(m - j) {
                        acc += alpha[k] * s[j + k] + beta[k] * s[j + k + 1];
                    }
                    out[j] = acc;
                }
            }
        }
    }
}

impl KernelOperator {
    /// Left limits `J(t_j-)`, or `None` when `J` has no jumps at grid nodes.
    fn apply_left(&self, s: &[f64], out: &mut [f64]) -> bool {
        match self {
            KernelOperator::Atoms {
                left: Some(rows), ..
            } => {
                out[s.len() - 1] = 0.0;
                atom_sums(rows, s, out);
                true
            }
            _ => false,
        }
    }
}

/// `(node, fraction, weight)` for each atom landing below `T` from birth time `t`.
fn atom_row(atoms: Vec<(f64, f64)>, t: f64, t_max: f64, m: usize) -> Vec<(usize, f64, f64)> {
    let h = t_max / m as f64;
    let limit = t_max * (1.0 - LANDING_EPS);
    atoms
        .into_iter()
        .filter(|&(a, _)| t + a < limit)
        .map(|(a, w)| {
            let u = (t + a) / h;
            let k = (u.floor() as usize).min(m - 1);
            (k, u - k as f64, w)
        })
        .collect()
}

fn atom_sum(row: &[(usize, f64, f64)], s: &[f64]) -> f64 {
    row.iter()
        .map(|&(k, w, p)| p * (s[k] + w * (s[k + 1] - s[k])))
        .sum()
}

fn atom_sums(rows: &[Vec<(usize, f64, f64)>], s: &[f64], out: &mut [f64]) {
    let m = s.len() - 1;
    for (j, row) in rows.iter().enumerate().take(m) {
        out[j] = atom_sum(row, s);
    }
}

/// Precomputed pieces of the Picard operator on one grid.
struct Discretization {
    h: f64,
    /// `e^{-B(t_j)}`.
    no_birth: Vec<f64>,
    /// `e^{-(B(t_{j+1}) - B(t_j))}`.
    step_decay: Vec<f64>,
    /// Weights of `J_j` and `J_{j+1}` in `∫_{t_j}^{t_{j+1}} b(s) e^{-(B(t_{j+1})-B(s))} J(s) ds`
    /// for `J` linear on the cell.
    w_left: Vec<f64>,
    w_right: Vec<f64>,
    /// `b(t_j)`.
    rate: Vec<f64>,
    kernel: KernelOperator,
    /// Cells with a kernel jump strictly inside, sorted by cell.
    splits: Vec<Split>,
}

/// A cell `[t_j, t_{j+1}]` whose kernel jumps at an interior time `τ`. The
/// outer integral is taken over `[t_j, τ]` and `[τ, t_{j+1}]` separately.
struct Split {
    cell: usize,
    /// Weights of `J(t_j)` and `J(τ-)`, already decayed to `t_{j+1}`.
    before: (f64, f64),
    /// Weights of `J(τ)` and `J(t_{j+1}-)`.
    after: (f64, f64),
    at_left: Vec<(usize, f64, f64)>,
    at_right: Vec<(usize, f64, f64)>,
}

/// `(e^{-ΔB}, w_a, w_b)` with `w_a J(a) + w_b J(b)` approximating
/// `∫_a^b b(s) e^{-(B(b)-B(s))} J(s) ds` for `J` linear on `[a, b]`.
fn cell_weights(model: &Model, a: f64, b: f64) -> Result<(f64, f64, f64)> {
    let delta = model.rate.cumulative_unchecked(a, b);
    // E = ∫_a^b e^{-(B(b)-B(s))} ds; then ∫ b e^{..} θ ds = 1 - E/(b-a)
    // and ∫ b e^{..} ds = 1 - e^{-ΔB}, with θ = (s-a)/(b-a).
    let e = match model.rate.as_constant() {
        Some(beta) if beta * (b - a) > 1e-12 => -(-beta * (b - a)).exp_m1() / beta,
        Some(_) => b - a,
        None => quad::integrate(
            |s| (-model.rate.cumulative_unchecked(s, b)).exp(),
            a,
            b,
            QuadOptions::with_tol(1e-15),
        )?,
    };
    let total = -(-delta).exp_m1();
    let w_b = if b > a {
        (1.0 - e / (b - a)).clamp(0.0, total)
    } else {
        0.0
    };
    Ok(((-delta).exp(), total - w_b, w_b))
}

impl Discretization {
    fn new(model: &Model, t_max: f64, m: usize) -> Result<Self> {
        let h = t_max / m as f64;
        let node = |j: usize| if j == m { t_max } else { j as f64 * h };
        let no_birth = (0..=m)
            .map(|j| (-model.rate.primitive(node(j))).exp())
            .collect();
        let mut step_decay = vec![0.0; m];
        let mut w_left = vec![0.0; m];
        let mut w_right = vec![0.0; m];
        for j in 0..m {
            (step_decay[j], w_left[j], w_right[j]) = cell_weights(model, node(j), node(j + 1))?;
        }
        let mut splits = Vec::new();
        for &tau in model.kernel.jump_times() {
            let cell = (tau / h).floor() as usize;
            if cell >= m || tau - node(cell) <= 1e-9 * h || node(cell + 1) - tau <= 1e-9 * h {
                continue;
            }
            let (a, b) = (node(cell), node(cell + 1));
            let (_, l1, r1) = cell_weights(model, a, tau)?;
            let (decay2, l2, r2) = cell_weights(model, tau, b)?;
            let row =
                |atoms: Option<Vec<(f64, f64)>>| atom_row(atoms.unwrap_or_default(), tau, t_max, m);
            splits.push(Split {
                cell,
                before: (decay2 * l1, decay2 * r1),
                after: (l2, r2),
                at_left: row(model.kernel.atoms_left(tau)),
                at_right: row(model.kernel.atoms(tau)),
            });
        }
        splits.sort_by_key(|sp| sp.cell);
        let rate = (0..=m).map(|j| model.rate.rate(node(j))).collect();
        Ok(Discretization {
            h,
            no_birth,
            step_decay,
            w_left,
            w_right,
            rate,
            kernel: KernelOperator::build(&model.kernel, t_max, m)?,
            splits,
        })
    }

    /// One application of the operator.
    /// `j_buf` holds `2(M+1)` entries: `J(t_j)` followed by `J(t_j-)`.
    fn sweep(&self, s: &[f64], j_buf: &mut [f64], next: &mut [f64]) {
        let m = s.len() - 1;
        let (j_right, j_left) = j_buf.split_at_mut(m + 1);
        self.kernel.apply(s, self.h, j_right);
        let j_left: &[f64] = if self.kernel.apply_left(s, j_left) {
            j_left
        } else {
            j_right
        };
        let mut acc = 0.0;
        let mut splits = self.splits.iter().peekable();
        next[0] = self.no_birth[0];
        for j in 0..m {
            let inflow = match splits.next_if(|sp| sp.cell == j) {
                Some(sp) => {
                    sp.before.0 * j_right[j]
                        + sp.before.1 * atom_sum(&sp.at_left, s)
                        + sp.after.0 * atom_sum(&sp.at_right, s)
                        + sp.after.1 * j_left[j + 1]
                }
                None => self.w_left[j] * j_right[j] + self.w_right[j] * j_left[j + 1],
            };
            acc = self.step_decay[j] * acc + inflow;
            next[j + 1] = (self.no_birth[j + 1] + acc).clamp(0.0, 1.0);
        }
    }
}

fn check_scale_args(t_max: f64, mesh: usize, tol: f64) -> Result<()> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::invalid("t_max", "must be finite and > 0"));
    }
    if mesh < 16 {
        return Err(Error::invalid("mesh", "need at least 16 grid intervals"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    Ok(())
}

/// Solves for `S_T` on `mesh` uniform intervals, iterating from `e^{-B}` until
/// the sup-norm change of a sweep drops below `tol`.
pub fn solve_scale(model: &Model, t_max: f64, mesh: usize, tol: f64) -> Result<ScaleTable> {
    solve_scale_with(model, t_max, ScaleOptions::new(mesh, tol), None)
}

/// Like [`solve_scale`], optionally starting from another table.
///
/// A table for a smaller level is a valid starting point: `S_T` increases
/// with `T`, so iterates still increase towards the fixed point.
pub fn solve_scale_with(
    model: &Model,
    t_max: f64,
    opts: ScaleOptions,
    initial: Option<&ScaleTable>,
) -> Result<ScaleTable> {
    check_scale_args(t_max, opts.mesh, opts.tol)?;
    let m = opts.mesh;
    let disc = Discretization::new(model, t_max, m)?;
    let h = disc.h;
    let mut cur: Vec<f64> = match initial {
        Some(tab) => (0..=m)
            .map(|j| tab.value_at(j as f64 * h).max(disc.no_birth[j]))
            .collect(),
        None => disc.no_birth.clone(),
    };
    let mut next = vec![0.0; m + 1];
    let mut j_buf = vec![0.0; 2 * (m + 1)];
    let mut change = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        disc.sweep(&cur, &mut j_buf, &mut next);
        change = cur
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        core::mem::swap(&mut cur, &mut next);
        if change < opts.tol {
            log::debug!("scale solve T={t_max} M={m}: {sweep} sweeps, change {change:e}");
            return Ok(ScaleTable {
                t_max,
                values: cur,
                sweeps: sweep,
                change,
                tol: opts.tol,
            });
        }
    }
    Err(Error::Convergence {
        sweeps: opts.max_sweeps,
        change,
    })
}

/// Sup-norm distance between a table and one more application of the operator.
pub fn fixed_point_residual(model: &Model, table: &ScaleTable) -> Result<f64> {
    let m = table.mesh();
    let disc = Discretization::new(model, table.t_max, m)?;
    let mut next = vec![0.0; m + 1];
    let mut j_buf = vec![0.0; 2 * (m + 1)];
    disc.sweep(&table.values, &mut j_buf, &mut next);
    Ok(table
        .values
        .iter()
        .zip(&next)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Residuals of `S'(t) = b(t)(J(t) - S(t))` at interior nodes, with `S'` by
/// central differences.
pub fn ode_residuals(model: &Model, table: &ScaleTable) -> Result<Vec<f64>> {
    let m = table.mesh();
    let disc = Discretization::new(model, table.t_max, m)?;
    let mut j_buf = vec![0.0; m + 1];
    disc.kernel.apply(&table.values, disc.h, &mut j_buf);
    let s = &table.values;
    Ok((1..m)
        .map(|j| {
            let deriv = (s[j + 1] - s[j - 1]) / (2.0 * disc.h);
            deriv - disc.rate[j] * (j_buf[j] - s[j])
        })
        .collect())
}

/// `S_T(t)` for the tree with birth rate `b` and exponential lifetimes of
/// death rate `d`:
/// `(1 + ∫_t^T b(s) e^{-∫_s^T (d-b)} ds) / (1 + ∫_0^T b(s) e^{-∫_s^T (d-b)} ds)`.
pub fn scale_markov_closed_form(
    b: &RateFunction,
    d: &RateFunction,
    t_max: f64,
    t: f64,
) -> Result<f64> {
    if !(0.0..=t_max).contains(&t) {
        return Err(Error::OutOfRange {
            value: t,
            low: 0.0,
            high: t_max,
        });
    }
    if let (Some(bc), Some(dc)) = (b.as_constant(), d.as_constant()) {
        if (bc - dc).abs() <= 1e-14 * (bc + dc) {
            return Ok((1.0 + bc * (t_max - t)) / (1.0 + bc * t_max));
        }
        let r = bc - dc;
        return Ok((dc - bc * (r * (t_max - t)).exp()) / (dc - bc * (r * t_max).exp()));
    }
    let integrand = |s: f64| {
        let net = d.cumulative_unchecked(s, t_max) - b.cumulative_unchecked(s, t_max);
        b.rate(s) * (-net).exp()
    };
    let opts = QuadOptions::with_tol(1e-13);
    let tail = quad::integrate(integrand, t, t_max, opts)?;
    let head = quad::integrate(integrand, 0.0, t, opts)?;
    Ok((1.0 + tail) / (1.0 + head + tail))
}

/// `W(t) = (d - b e^{(b-d)t}) / (d - b)`, with the limit `1 + bt` when `b = d`.
pub fn scale_w_constant(b: f64, d: f64, t: f64) -> f64 {
    if (b - d).abs() <= 1e-14 * (b + d).abs().max(1e-300) {
        return 1.0 + b * t;
    }
    (d - b * ((b - d) * t).exp()) / (d - b)
}

/// `S_T(t)` for the kernel with deaths at the absolute times 1 and 2, valid
/// for `T <= 2` (so that landings at 2 never count).
///
/// Solving the fixed point by hand with `C = e^{-B(1)} / (1 + e^{-B(1)})`:
/// `S(t) = e^{-B(t)} + (1 - e^{-B(t)}) C` on `[0, 1)` and
/// `S(t) = e^{-B(t)} (1 + (e^{B(1)} - 1) C)` on `[1, T)` when `T > 1`.
pub fn fixed_death_closed_form(b: &RateFunction, t_max: f64, t: f64) -> Result<f64> {
    if !(t_max > 0.0 && t_max <= 2.0) {
        return Err(Error::invalid("t_max", "the closed form needs 0 < T <= 2"));
    }
    if t >= t_max {
        return Ok(0.0);
    }
    let bt = b.primitive(t);
    if t_max <= 1.0 {
        return Ok((-bt).exp());
    }
    let b1 = b.primitive(1.0);
    let c = (-b1).exp() / (1.0 + (-b1).exp());
    Ok(if t < 1.0 {
        (-bt).exp() + (1.0 - (-bt).exp()) * c
    } else {
        (-bt).exp() * (1.0 + b1.exp_m1() * c)
    })
}

/// `P_t(τ_{[0,s]} > τ_{[T,∞)}) = (S_T(s) - S_T(t)) / S_T(s)`.
pub fn hitting_probability(table: &ScaleTable, s: f64, t: f64) -> Result<f64> {
    if s > t {
        return Err(Error::Ordering { t0: s, t1: t });
    }
    if s < 0.0 || t > table.t_max {
        return Err(Error::OutOfRange {
            value: if s < 0.0 { s } else { t },
            low: 0.0,
            high: table.t_max,
        });
    }
    let ss = table.value_at(s);
    if ss <= 0.0 {
        return Err(Error::DegenerateBarrier { level: s });
    }
    Ok(((ss - table.value_at(t)) / ss).clamp(0.0, 1.0))
}

/// Settings for [`extinction_probability`].
#[derive(Debug, Clone, Copy)]
pub struct ExtinctionOptions {
    /// Stop when two successive levels change `S_T(t0)` by less than this.
    pub tol: f64,
    /// Grid intervals per unit of level.
    pub steps_per_unit: usize,
    /// Cap on grid intervals; beyond it the mesh coarsens.
    pub max_mesh: usize,
    /// First truncation level tried (raised to `2·t0` if smaller).
    pub t_start: f64,
    /// Largest truncation level tried.
    pub t_limit: f64,
    /// Tolerance of each scale solve.
    pub solve_tol: f64,
}

impl Default for ExtinctionOptions {
    fn default() -> Self {
        ExtinctionOptions {
            tol: 1e-4,
            steps_per_unit: 64,
            max_mesh: 4096,
            t_start: 4.0,
            t_limit: 256.0,
            solve_tol: 1e-9,
        }
    }
}

/// Limit of `S_T(t0)` as `T` grows.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionEstimate {
    pub t0: f64,
    pub value: f64,
    /// `(T, S_T(t0))` for each level solved.
    pub history: Vec<(f64, f64)>,
    /// Fixed-point residual of the last table.
    pub residual: f64,
    /// The last table solved.
    pub table: ScaleTable,
}

/// Extinction probability from level `t0`, the increasing limit of `S_T(t0)`,
/// by solving for doubling levels `T` until successive values agree to `tol`.
pub fn extinction_probability(
    model: &Model,
    t0: f64,
    opts: ExtinctionOptions,
) -> Result<ExtinctionEstimate> {
    if !(t0 >= 0.0) || !t0.is_finite() {
        return Err(Error::invalid("t0", "must be finite and >= 0"));
    }
    let mut t_max = opts.t_start.max(2.0 * t0).max(1.0);
    let mut history = Vec::new();
    let mut previous: Option<ScaleTable> = None;
    loop {
        let mesh = ((t_max * opts.steps_per_unit as f64).ceil() as usize).clamp(16, opts.max_mesh);
        let table = solve_scale_with(
            model,
            t_max,
            ScaleOptions::new(mesh, opts.solve_tol),
            previous.as_ref(),
        )?;
        let value = table.value_at(t0);
        if let Some(&(_, last)) = history.last() {
            if value < last - 1e-6 - 10.0 * opts.tol {
                return Err(Error::Consistency(format!(
                    "S_T({t0}) decreased from {last} to {value} when raising T to {t_max}"
                )));
            }
            history.push((t_max, value));
            if (value - last).abs() < opts.tol {
                let residual = fixed_point_residual(model, &table)?;
                return Ok(ExtinctionEstimate {
                    t0,
                    value,
                    history,
                    residual,
                    table,
                });
            }
        } else {
            history.push((t_max, value));
        }
        if t_max >= opts.t_limit {
            let change = history
                .windows(2)
                .last()
                .map_or(f64::INFINITY, |w| (w[1].1 - w[0].1).abs());
            return Err(Error::Convergence {
                sweeps: history.len(),
                change,
            });
        }
        previous = Some(table);
        t_max = (2.0 * t_max).min(opts.t_limit);
    }
}

/// `P_{t0}(Ξ_t = 0) = p0` and `P_{t0}(Ξ_t = k | Ξ_t ≠ 0) = q (1-q)^{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationLaw {
    pub p0: f64,
    /// Extrapolated `S_t(t-)`.
    pub q: f64,
    /// `S_t(t-)` at the last grid node, for comparison with `q`.
    pub q_node: f64,
    /// Set when `t <= t0`: the ancestor is still alive and `p0 = 0`.
    pub ancestor_alive: bool,
    pub table: ScaleTable,
}

impl PopulationLaw {
    /// `P(Ξ_t = k)`.
    pub fn pmf(&self, k: usize) -> f64 {
        if k == 0 {
            self.p0
        } else {
            (1.0 - self.p0) * self.q * (1.0 - self.q).powi(k as i32 - 1)
        }
    }
}

/// Law of the population at time `t` of a tree whose root lives until `t0`.
pub fn population_law(
    model: &Model,
    t0: f64,
    t: f64,
    mesh: usize,
    tol: f64,
) -> Result<PopulationLaw> {
    let table = solve_scale(model, t, mesh, tol)?;
    let ancestor_alive = t <= t0;
    let p0 = if ancestor_alive {
        0.0
    } else {
        table.value_at(t0)
    };
    Ok(PopulationLaw {
        p0,
        q: table.left_limit(),
        q_node: table.left_limit_node(),
        ancestor_alive,
        table,
    })
}

/// Extinction probability `S` as a function on `[0, ∞)`: the converged table on
/// its trusted range `[0, T/2]` and a log-linear tail fitted on the last tenth
/// of that range.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFunction {
    table: ScaleTable,
    trusted: f64,
    tail_log_value: f64,
    tail_rate: f64,
}

impl ScaleFunction {
    pub fn from_table(table: ScaleTable) -> Self {
        let trusted = 0.5 * table.t_max;
        let h = table.step();
        let last = (trusted / h).floor() as usize;
        let first = last - (last / 10).max(2);
        let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in first..=last {
            let x = j as f64 * h;
            let y = table.values[j].max(1e-300).ln();
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            n += 1.0;
        }
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let tail_rate = (-slope).max(0.0);
        let tail_log_value = (intercept + slope * trusted).min(0.0);
        ScaleFunction {
            table,
            trusted,
            tail_log_value,
            tail_rate,
        }
    }

    /// `S(x)`.
    pub fn value_at(&self, x: f64) -> f64 {
        if x <= self.trusted {
            self.table.value_at(x)
        } else {
            (self.tail_log_value - self.tail_rate * (x - self.trusted)).exp()
        }
    }

    /// Decay rate of the fitted exponential tail.
    pub fn tail_rate(&self) -> f64 {
        self.tail_rate
    }

    pub fn trusted_range(&self) -> f64 {
        self.trusted
    }

    pub fn table(&self) -> &ScaleTable {
        &self.table
    }

    /// Short description of the tail model.
    pub fn describe(&self) -> String {
        format!(
            "table on [0, {}], tail exp({} - {}·(x - {}))",
            self.trusted, self.tail_log_value, self.tail_rate, self.trusted
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LifetimeKernel;

    fn markov_exact(b: f64, d: f64, t_max: f64, t: f64) -> f64 {
        (d - b * ((b - d) * (t_max - t)).exp()) / (d - b * ((b - d) * t_max).exp())
    }

    #[test]
    fn constant_markov_matches_closed_form() {
        let m = Model::markov(1.0, 2.0).unwrap();
        let tab = solve_scale(&m, 1.0, 512, 1e-10).unwrap();
        assert_eq!(tab.values()[0], 1.0);
        for (t, v) in tab.grid().iter().zip(tab.values()) {
            assert!((v - markov_exact(1.0, 2.0, 1.0, *t)).abs() < 5e-5);
        }
        assert!((tab.left_limit() - 0.612_700).abs() < 1e-5);
        assert!((tab.left_limit_node() - 1.0 / (2.0 - (-1.0f64).exp())).abs() < 1e-5);
    }

    #[test]
    fn time_varying_markov_matches_quadrature_oracle() {
        let b = RateFunction::sinusoidal(1.0, 0.5, 1.0).unwrap();
        let d = RateFunction::constant(2.0).unwrap();
        let m = Model::new(b.clone(), LifetimeKernel::exponential(d.clone()).unwrap()).unwrap();
        let tab = solve_scale(&m, 2.0, 512, 1e-11).unwrap();
        let mut worst: f64 = 0.0;
        for (t, v) in tab.grid().iter().zip(tab.values()) {
            let t = t.min(2.0);
            worst = worst.max((v - scale_markov_closed_form(&b, &d, 2.0, t).unwrap()).abs());
        }
        assert!(worst < 2e-5, "{worst}");
    }

    #[test]
    fn dirac_lifetime_beyond_level_gives_no_birth_probability() {
        let m = Model::new(
            RateFunction::constant(1.0).unwrap(),
            LifetimeKernel::dirac(1.0).unwrap(),
        )
        .unwrap();
        let tab = solve_scale(&m, 1.0, 64, 1e-12).unwrap();
        assert!((tab.value_at(0.5) - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn long_lifetimes_make_scale_constant_only_when_all_mass_exceeds() {
        let m = Model::new(
            RateFunction::constant(1.0).unwrap(),
            LifetimeKernel::dirac(3.0).unwrap(),
        )
        .unwrap();
        let tab = solve_scale(&m, 2.0, 64, 1e-12).unwrap();
        // Every jump reaches T, so S_T is the no-jump probability, not constant.
        assert!(tab.value_at(1.0) < 0.5);
        // Births stop at 1 and every child dies before 1.5 < T: no jump reaches T.
        let rate = RateFunction::piecewise_constant(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let short = Model::new(rate, LifetimeKernel::dirac(0.5).unwrap()).unwrap();
        let tab = solve_scale(&short, 2.0, 64, 1e-13).unwrap();
        assert!(
            tab.values().iter().all(|&v| (v - 1.0).abs() < 1e-12),
            "{:?}",
            tab.values()
        );
    }

    #[test]
    fn closed_form_helpers() {
        let b = RateFunction::constant(1.0).unwrap();
        let d = RateFunction::constant(2.0).unwrap();
        assert_eq!(scale_markov_closed_form(&b, &d, 1.0, 0.0).unwrap(), 1.0);
        let v = scale_markov_closed_form(&b, &d, 1.0, 0.3).unwrap();
        assert!((v - markov_exact(1.0, 2.0, 1.0, 0.3)).abs() < 1e-14);
        assert!(scale_markov_closed_form(&b, &d, 1.0, 1.0).unwrap() > 0.0);
        // The quadrature path agrees with the closed form on constants.
        let bt = RateFunction::tabulated(vec![0.0, 10.0], vec![1.0, 1.0]).unwrap();
        let q = scale_markov_closed_form(&bt, &d, 1.0, 0.3).unwrap();
        assert!((q - v).abs() < 1e-12);
        assert_eq!(scale_w_constant(1.0, 2.0, 0.0), 1.0);
        assert!((scale_w_constant(1.0, 2.0, core::f64::consts::LN_2) - 1.5).abs() < 1e-14);
        assert_eq!(scale_w_constant(1.0, 1.0, 3.0), 4.0);
    }

    #[test]
    fn w_is_the_reversed_scale_function() {
        let (b, d, tm) = (1.0, 2.0, 1.5);
        let br = RateFunction::constant(b).unwrap();
        let dr = RateFunction::constant(d).unwrap();
        let end = scale_markov_closed_form(&br, &dr, tm, tm).unwrap();
        for &t in &[0.0, 0.3, 1.0] {
            let s = scale_markov_closed_form(&br, &dr, tm, tm - t).unwrap();
            assert!((s - scale_w_constant(b, d, t) * end).abs() < 1e-12);
        }
    }

    #[test]
    fn hitting_probability_edges() {
        let m = Model::markov(1.0, 2.0).unwrap();
        let tab = solve_scale(&m, 1.0, 128, 1e-10).unwrap();
        assert_eq!(hitting_probability(&tab, 0.3, 0.3).unwrap(), 0.0);
        assert_eq!(hitting_probability(&tab, 0.3, 1.0).unwrap(), 1.0);
        assert!(hitting_probability(&tab, 0.5, 0.3).is_err());
    }

    #[test]
    fn solver_rejects_bad_arguments() {
        let m = Model::markov(1.0, 2.0).unwrap();
        assert!(solve_scale(&m, 1.0, 8, 1e-10).is_err());
        assert!(solve_scale(&m, -1.0, 64, 1e-10).is_err());
        assert!(solve_scale(&m, 1.0, 64, 0.0).is_err());
        let mut opts = ScaleOptions::new(64, 1e-15);
        opts.max_sweeps = 2;
        assert!(matches!(
            solve_scale_with(&m, 4.0, opts, None),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn fixed_death_times_closed_form() {
        let b = RateFunction::constant(1.0).unwrap();
        let m = Model::new(b.clone(), LifetimeKernel::TwoPointDeath).unwrap();
        let tab = solve_scale(&m, 2.0, 2048, 1e-12).unwrap();
        for &t in &[0.1, 0.5, 0.9, 1.2, 1.7] {
            let exact = fixed_death_closed_form(&b, 2.0, t).unwrap();
            assert!((tab.value_at(t) - exact).abs() < 2e-3, "t={t}");
        }
        // One-sided derivatives at t = 1 differ by b·C.
        let eps = 1e-6;
        let f = |t| fixed_death_closed_form(&b, 2.0, t).unwrap();
        let left = (f(1.0 - eps) - f(1.0 - 2.0 * eps)) / eps;
        let right = (f(1.0 + 2.0 * eps) - f(1.0 + eps)) / eps;
        let c = (-1.0f64).exp() / (1.0 + (-1.0f64).exp());
        assert!(((left - right) - c).abs() < 1e-4);
    }

    #[test]
    fn fixed_death_contour_stays_below_two() {
        // From any level up to 2 the contour only ever jumps to 1 or 2.
        let b = RateFunction::asymptotically_critical(1.76).unwrap();
        let m = Model::new(b, LifetimeKernel::TwoPointDeath).unwrap();
        for mesh in [32, 256] {
            let tab = solve_scale(&m, 4.0, mesh, 1e-12).unwrap();
            for &t in &[0.5, 1.0, 1.5, 2.0] {
                assert!(tab.value_at(t) > 1.0 - 1e-8, "mesh={mesh} t={t}");
            }
        }
        let off_grid = solve_scale(&m, 4.1, 2048, 1e-12).unwrap();
        assert!(off_grid.value_at(1.0) > 0.99);
    }

    #[test]
    fn monotone_in_t_and_in_level() {
        let m = Model::markov(2.0, 1.0).unwrap();
        let small = solve_scale(&m, 2.0, 128, 1e-11).unwrap();
        let large = solve_scale(&m, 4.0, 256, 1e-11).unwrap();
        assert!(small.max_increase() <= 1e-9);
        assert!(large.max_increase() <= 1e-9);
        for t in small.grid() {
            assert!(large.value_at(t) >= small.value_at(t) - 1e-9);
        }
    }

    #[test]
    fn residuals_are_small() {
        let m = Model::new(
            RateFunction::sinusoidal(1.0, 0.5, 1.0).unwrap(),
            LifetimeKernel::exponential_constant(2.0).unwrap(),
        )
        .unwrap();
        let tab = solve_scale(&m, 2.0, 256, 1e-11).unwrap();
        assert!(fixed_point_residual(&m, &tab).unwrap() < 1e-10);
        let ode = ode_residuals(&m, &tab).unwrap();
        assert!(ode.iter().all(|r| r.abs() < 1e-3));
    }

    #[test]
    fn extinction_limits() {
        let sub = Model::markov(1.0, 2.0).unwrap();
        let e = extinction_probability(&sub, 1.0, ExtinctionOptions::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-3, "{e:?}");
        let sup = Model::markov(2.0, 1.0).unwrap();
        let e = extinction_probability(&sup, 1.0, ExtinctionOptions::default()).unwrap();
        assert!((e.value - (-1.0f64).exp()).abs() < 1e-3, "{:?}", e.history);
        let e = extinction_probability(&sup, 0.0, ExtinctionOptions::default()).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn scale_function_tail_is_exponential() {
        let sup = Model::markov(2.0, 1.0).unwrap();
        let tab = solve_scale(&sup, 16.0, 1024, 1e-11).unwrap();
        let s = ScaleFunction::from_table(tab);
        assert!((s.tail_rate() - 1.0).abs() < 1e-2);
        assert!((s.value_at(12.0) / (-12.0f64).exp() - 1.0).abs() < 5e-2);
    }

    #[test]
    fn population_law_flags_living_ancestor() {
        let m = Model::markov(2.0, 1.0).unwrap();
        let law = population_law(&m, 2.0, 1.0, 64, 1e-10).unwrap();
        assert!(law.ancestor_alive);
        assert_eq!(law.p0, 0.0);
        let law = population_law(&m, 0.5, 3.0, 384, 1e-10).unwrap();
        let total: f64 = (0..2000).map(|k| law.pmf(k)).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
