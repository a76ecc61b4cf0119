//! Jump chronological contour process.
//!
//! A [`ContourPath`] decreases linearly between upward jumps and is absorbed
//! at 0. It is obtained either by exploring a finished [`ChronoTree`] or by
//! simulating the piecewise-deterministic Markov process directly.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::Exp1;

use crate::model::{JumpLaw, Model};
use crate::replicas::Replicas;
use crate::rng::replica_rng;
use crate::stats::mean_se;
use crate::tree::ChronoTree;
use crate::{Error, Result};

/// An upward jump at path time `time` from level `from` to level `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub from: f64,
    pub to: f64,
}

/// A càdlàg path with slope `-slope` between upward jumps, absorbed at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPath {
    pub start: f64,
    pub jumps: Vec<Jump>,
    /// Time at which the path reaches 0, if it does before the horizon.
    pub absorption: Option<f64>,
    /// End of the observation window.
    pub horizon: f64,
    /// Speed of descent; 1 for contour processes, `√n` for rescaled ones.
    pub slope: f64,
}

/// Which barrier a path reaches first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exit {
    /// The path reached `low` or below at the given time.
    Low(f64),
    /// A jump landed at `high` or above at the given time.
    High(f64),
    /// Neither barrier was touched before the horizon.
    Neither,
}

impl ContourPath {
    /// Time up to which the path is described: absorption if any, else the horizon.
    pub fn end(&self) -> f64 {
        self.absorption.unwrap_or(self.horizon)
    }

    pub fn is_absorbed(&self) -> bool {
        self.absorption.is_some()
    }

    /// Value at time `s`.
    pub fn value_at(&self, s: f64) -> f64 {
        if let Some(a) = self.absorption {
            if s >= a {
                return 0.0;
            }
        }
        let k = self.jumps.partition_point(|j| j.time <= s);
        let (t0, v0) = if k == 0 {
            (0.0, self.start)
        } else {
            (self.jumps[k - 1].time, self.jumps[k - 1].to)
        };
        (v0 - self.slope * (s - t0)).max(0.0)
    }

    /// Value just before time `s`.
    pub fn value_before(&self, s: f64) -> f64 {
        if let Some(a) = self.absorption {
            if s > a {
                return 0.0;
            }
        }
        let k = self.jumps.partition_point(|j| j.time < s);
        let (t0, v0) = if k == 0 {
            (0.0, self.start)
        } else {
            (self.jumps[k - 1].time, self.jumps[k - 1].to)
        };
        (v0 - self.slope * (s - t0)).max(0.0)
    }

    /// First barrier touched: a descent to `low` or below, or a jump landing
    /// at `high` or above.
    pub fn first_exit(&self, low: f64, high: f64) -> Exit {
        if self.start <= low {
            return Exit::Low(0.0);
        }
        if self.start >= high {
            return Exit::High(0.0);
        }
        let (mut t0, mut v0) = (0.0, self.start);
        for j in &self.jumps {
            if j.from <= low {
                return Exit::Low(t0 + (v0 - low) / self.slope);
            }
            if j.to >= high {
                return Exit::High(j.time);
            }
            t0 = j.time;
            v0 = j.to;
        }
        let reached = match self.absorption {
            Some(_) => true,
            None => v0 - self.slope * (self.horizon - t0) <= low,
        };
        if reached {
            Exit::Low(t0 + (v0 - low) / self.slope)
        } else {
            Exit::Neither
        }
    }

    /// Number of jumps with `from < t <= to`, plus one if the start is at or above `t`.
    pub fn upcrossing_count(&self, t: f64) -> usize {
        let initial = usize::from(self.start >= t);
        initial
            + self
                .jumps
                .iter()
                .filter(|j| j.from < t && t <= j.to)
                .count()
    }

    /// Total downward movement of the path on `[a, b]`, summed over the
    /// linear pieces.
    pub fn negative_variation(&self, a: f64, b: f64) -> f64 {
        let end = self.end();
        let mut total = 0.0;
        let mut piece_start = 0.0;
        let mut v0 = self.start;
        let mut add = |p0: f64, p1: f64, level: f64| {
            let lo = p0.max(a);
            let hi = p1.min(b);
            if hi > lo {
                let top = level - self.slope * (lo - p0);
                let bottom = (level - self.slope * (hi - p0)).max(0.0);
                total += (top - bottom).max(0.0);
            }
        };
        for j in &self.jumps {
            add(piece_start, j.time, v0);
            piece_start = j.time;
            v0 = j.to;
        }
        add(piece_start, end, v0);
        total
    }
}

/// Explores `tree` depth first, visiting the children of each individual in
/// decreasing order of birth time.
///
/// The path starts at the death time of the root, descends along each life
/// and jumps to the death time of a child when reaching its birth time. Its
/// total duration is the length of the tree.
pub fn contour_of_tree(tree: &ChronoTree) -> ContourPath {
    let nodes = tree.nodes();
    let mut jumps = Vec::with_capacity(nodes.len().saturating_sub(1));
    let mut s = 0.0;
    let mut level = nodes[0].death;
    // Each frame is (individual, number of children still to visit).
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(64);
    stack.push((0, nodes[0].children.len()));
    while let Some(frame) = stack.last_mut() {
        let (node, remaining) = *frame;
        if remaining == 0 {
            s += level - nodes[node].birth;
            level = nodes[node].birth;
            stack.pop();
            continue;
        }
        frame.1 -= 1;
        let child = nodes[node].children[remaining - 1];
        let c = &nodes[child];
        s += level - c.birth;
        jumps.push(Jump {
            time: s,
            from: c.birth,
            to: c.death,
        });
        level = c.death;
        stack.push((child, c.children.len()));
    }
    ContourPath {
        start: nodes[0].death,
        jumps,
        absorption: Some(s),
        horizon: s,
        slope: 1.0,
    }
}

/// Settings for [`simulate_pdmp`].
#[derive(Debug, Clone, Copy)]
pub struct PdmpOptions {
    /// Level cap `T`: jumps land at `(y + size) ∧ T`.
    pub cap: Option<f64>,
    /// Path time at which simulation stops.
    pub horizon: f64,
    /// Maximum number of jumps before the horizon.
    pub max_jumps: usize,
    /// Stop right after a jump landing at or above this level.
    pub stop_above: Option<f64>,
}

impl PdmpOptions {
    pub fn new(cap: Option<f64>, horizon: f64) -> Self {
        PdmpOptions {
            cap,
            horizon,
            max_jumps: 10_000_000,
            stop_above: None,
        }
    }
}

/// Simulates the contour process started at `x0`.
///
/// From level `x` the next jump level `y` solves `∫_y^x b = E` with `E`
/// standard exponential; if no such `y >= 0` exists the path is absorbed
/// after time `x`. Jump sizes come from the jump law at level `y`.
pub fn simulate_pdmp<L: JumpLaw, R: Rng + ?Sized>(
    law: &L,
    x0: f64,
    opts: PdmpOptions,
    rng: &mut R,
) -> Result<ContourPath> {
    if !(x0 >= 0.0) || !x0.is_finite() {
        return Err(Error::invalid("x0", "start level must be finite and >= 0"));
    }
    if let Some(cap) = opts.cap {
        if x0 > cap {
            return Err(Error::invalid("x0", "start level exceeds the cap"));
        }
    }
    if !(opts.horizon >= 0.0) {
        return Err(Error::invalid("horizon", "must be >= 0"));
    }
    let mut jumps = Vec::new();
    let mut s = 0.0;
    let mut x = x0;
    let mut absorption = None;
    let mut horizon = opts.horizon;
    if x0 == 0.0 {
        absorption = Some(0.0);
    }
    while absorption.is_none() {
        let e: f64 = rng.sample(Exp1);
        match law.next_jump_level(x, e) {
            None => {
                if s + x <= opts.horizon {
                    absorption = Some(s + x);
                }
                break;
            }
            Some(y) => {
                let t = s + (x - y);
                if t > opts.horizon {
                    break;
                }
                // Stored so that `to - slope·(t - s)` reproduces it exactly.
                let from = x - (t - s);
                let size = law.jump_size(from, rng)?;
                let mut to = from + size;
                if let Some(cap) = opts.cap {
                    to = to.min(cap);
                }
                if !to.is_finite() {
                    return Err(Error::Unsupported("infinite jump without a level cap"));
                }
                if jumps.len() >= opts.max_jumps {
                    return Err(Error::Explosion {
                        max_jumps: opts.max_jumps,
                    });
                }
                jumps.push(Jump { time: t, from, to });
                s = t;
                x = to;
                if opts.stop_above.is_some_and(|h| to >= h) {
                    horizon = t;
                    break;
                }
            }
        }
    }
    Ok(ContourPath {
        start: x0,
        jumps,
        absorption,
        horizon,
        slope: 1.0,
    })
}

/// `L^{(T)} f(x) = -f'(x) + b(x) ∫ (f((x+y) ∧ T) - f(x)) K(x, dy)`.
pub fn generator_value<F, D>(model: &Model, cap: f64, f: F, df: D, x: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let fx = f(x);
    let b = model.rate.rate(x);
    let jump = if b == 0.0 {
        0.0
    } else {
        b * model.kernel.expect(x, |y| f((x + y).min(cap)) - fx)?
    };
    Ok(-df(x) + jump)
}

/// Monte Carlo check of the generator against short-time simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorCheck {
    /// `(Ê f(X_h) - f(x)) / h`.
    pub estimate: f64,
    /// Standard error of `estimate`.
    pub std_error: f64,
    /// `L^{(T)} f(x)` by quadrature.
    pub exact: f64,
    /// `|estimate - exact|`.
    pub residual: f64,
}

/// Compares `(Ê_x f(X_h) - f(x)) / h` over `replicas` paths with `L^{(T)} f(x)`.
#[allow(clippy::too_many_arguments)]
pub fn generator_residual<F, D, E>(
    model: &Model,
    cap: f64,
    f: F,
    df: D,
    x: f64,
    h: f64,
    replicas: usize,
    seed: u64,
    exec: &E,
) -> Result<GeneratorCheck>
where
    F: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64,
    E: Replicas,
{
    let exact = generator_value(model, cap, &f, df, x)?;
    let fx = f(x);
    let opts = PdmpOptions::new(Some(cap), h);
    let samples = exec.run(replicas, |i| {
        let mut rng = replica_rng(seed, i as u64);
        simulate_pdmp(model, x, opts, &mut rng).map(|p| (f(p.value_at(h)) - fx) / h)
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let (estimate, std_error) = mean_se(&samples);
    Ok(GeneratorCheck {
        estimate,
        std_error,
        exact,
        residual: (estimate - exact).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LifetimeKernel, RateFunction};
    use crate::replicas::Sequential;
    use crate::stats::ks_one_sample;
    use crate::tree::{simulate_tree, Label};
    use alloc::vec;
    use proptest::prelude::*;

    fn no_jump(x: f64) -> ContourPath {
        ContourPath {
            start: x,
            jumps: vec![],
            absorption: Some(x),
            horizon: x,
            slope: 1.0,
        }
    }

    fn two_node() -> ChronoTree {
        ChronoTree::from_records(
            &[(Label::root(), 0.0, 2.0), (Label(vec![1]), 1.0, 1.7)],
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn single_node_contour() {
        let t = ChronoTree::from_records(&[(Label::root(), 0.0, 3.0)], 3.0).unwrap();
        assert_eq!(contour_of_tree(&t), no_jump(3.0));
    }

    #[test]
    fn two_node_contour_by_hand() {
        let p = contour_of_tree(&two_node());
        assert_eq!(
            p.jumps,
            vec![Jump {
                time: 1.0,
                from: 1.0,
                to: 1.7
            }]
        );
        assert!((p.absorption.unwrap() - 2.7).abs() < 1e-15);
        assert_eq!(p.upcrossing_count(1.5), 2);
        assert!((p.value_at(1.5) - 1.2).abs() < 1e-15);
        assert!((p.value_before(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn path_queries_on_simple_paths() {
        let p = ContourPath {
            start: 4.0,
            jumps: vec![],
            absorption: Some(4.0),
            horizon: 10.0,
            slope: 1.0,
        };
        assert_eq!(p.value_at(1.5), 2.5);
        assert_eq!(p.first_exit(1.0, 10.0), Exit::Low(3.0));
        assert_eq!(p.negative_variation(0.0, 1.0), 1.0);
        assert_eq!(p.upcrossing_count(3.0), 1);
        assert_eq!(p.upcrossing_count(5.0), 0);
        let absorbed = no_jump(0.5);
        assert_eq!(absorbed.negative_variation(0.0, 1.0), 0.5);
        let jumping = ContourPath {
            start: 4.0,
            jumps: vec![Jump {
                time: 1.0,
                from: 3.0,
                to: 7.0,
            }],
            absorption: None,
            horizon: 2.0,
            slope: 1.0,
        };
        assert_eq!(jumping.first_exit(2.5, 6.0), Exit::High(1.0));
        assert_eq!(jumping.first_exit(0.5, 8.0), Exit::Neither);
    }

    #[test]
    fn zero_rate_pdmp_is_deterministic() {
        let m = Model::new(
            RateFunction::constant(0.0).unwrap(),
            LifetimeKernel::dirac(1.0).unwrap(),
        )
        .unwrap();
        let p = simulate_pdmp(
            &m,
            4.0,
            PdmpOptions::new(None, 100.0),
            &mut replica_rng(0, 0),
        )
        .unwrap();
        assert_eq!(p.absorption, Some(4.0));
        assert!(p.jumps.is_empty());
        let p =
            simulate_pdmp(&m, 4.0, PdmpOptions::new(None, 1.0), &mut replica_rng(0, 0)).unwrap();
        assert_eq!(p.absorption, None);
        assert_eq!(p.value_at(1.0), 3.0);
    }

    #[test]
    fn dirac_jumps_have_unit_size_or_hit_the_cap() {
        let m = Model::new(
            RateFunction::constant(1.0).unwrap(),
            LifetimeKernel::dirac(1.0).unwrap(),
        )
        .unwrap();
        for i in 0..50 {
            let p = simulate_pdmp(
                &m,
                2.0,
                PdmpOptions::new(Some(5.0), 30.0),
                &mut replica_rng(3, i),
            )
            .unwrap();
            for j in &p.jumps {
                assert!(j.to == 5.0 || (j.to - j.from - 1.0).abs() < 1e-12);
                assert!(j.to <= 5.0);
            }
        }
    }

    #[test]
    fn first_jump_time_is_exponential() {
        let beta = 1.5;
        let m = Model::new(
            RateFunction::constant(beta).unwrap(),
            LifetimeKernel::dirac(1.0).unwrap(),
        )
        .unwrap();
        let x0 = 50.0;
        let times: Vec<f64> = (0..20_000)
            .map(|i| {
                let p = simulate_pdmp(
                    &m,
                    x0,
                    PdmpOptions::new(None, 100.0),
                    &mut replica_rng(5, i),
                )
                .unwrap();
                p.jumps.first().map_or(x0, |j| j.time)
            })
            .collect();
        let r = ks_one_sample(&times, |u| 1.0 - (-beta * u).exp());
        assert!(r.passes(0.01), "{r:?}");
    }

    #[test]
    fn explosion_guard_trips() {
        let m = Model::new(
            RateFunction::constant(5.0).unwrap(),
            LifetimeKernel::dirac(1.0).unwrap(),
        )
        .unwrap();
        let mut opts = PdmpOptions::new(None, 1e6);
        opts.max_jumps = 100;
        let r = simulate_pdmp(&m, 1.0, opts, &mut replica_rng(0, 0));
        assert_eq!(r, Err(Error::Explosion { max_jumps: 100 }));
    }

    #[test]
    fn generator_examples() {
        let m = Model::markov(1.0, 2.0).unwrap();
        let one = generator_value(&m, 100.0, |_| 1.0, |_| 0.0, 1.0).unwrap();
        assert!(one.abs() < 1e-12);
        let id = generator_value(&m, 1e6, |x| x, |_| 1.0, 1.0).unwrap();
        assert!((id - (-1.0 + 0.5)).abs() < 1e-9);
        let theta = 0.5;
        let e = generator_value(
            &m,
            1e6,
            |x: f64| (theta * x).exp(),
            |x: f64| theta * (theta * x).exp(),
            1.0,
        )
        .unwrap();
        // ∫ (e^{θy} - 1) 2e^{-2y} dy = 2/(2-θ) - 1.
        let expected = theta.exp() * (-theta + (2.0 / (2.0 - theta) - 1.0));
        assert!((e - expected).abs() < 1e-8);
        let check =
            generator_residual(&m, 3.0, |_| 1.0, |_| 0.0, 1.0, 0.01, 200, 1, &Sequential).unwrap();
        assert_eq!(check.residual, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn tree_contour_invariants(b in 0.2..1.5f64, d in 0.5..3.0f64, x0 in 0.2..3.0f64, seed in any::<u64>()) {
            let m = Model::markov(b, d).unwrap();
            let tree = simulate_tree(&m, x0, 4.0, seed).unwrap();
            let p = contour_of_tree(&tree);
            prop_assert_eq!(p.jumps.len(), tree.len() - 1);
            let len = tree.length();
            prop_assert!((p.absorption.unwrap() - len).abs() <= 1e-12 * (1.0 + len));
            for k in 1..=20 {
                let t = 4.0 * k as f64 / 20.0;
                prop_assert_eq!(p.upcrossing_count(t), tree.population_at(t).unwrap());
            }
            for j in &p.jumps {
                prop_assert!((p.value_before(j.time) - j.from).abs() < 1e-9);
                prop_assert!(j.to > j.from);
            }
        }

        #[test]
        fn negative_variation_is_bounded_by_window(seed in any::<u64>(), a in 0.0..5.0f64, w in 0.0..5.0f64) {
            let m = Model::markov(1.0, 1.0).unwrap();
            let p = simulate_pdmp(&m, 1.0, PdmpOptions::new(Some(6.0), 20.0), &mut replica_rng(seed, 0)).unwrap();
            let v = p.negative_variation(a, a + w);
            prop_assert!(v <= w + 1e-12);
            prop_assert!(v >= 0.0);
        }
    }
}
