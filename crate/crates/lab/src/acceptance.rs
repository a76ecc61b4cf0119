//! The acceptance suite: ten end-to-end checks of the numerics and simulators.
//!
//! Every criterion is deterministic given the base seed. An outcome records
//! the measured quantities so a failure can be diagnosed from the report.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use ist_core::conditioning::{
    compare_summaries, condition_params, rejection_filtered, simulate_conditioned,
    ConditionedRunOptions, ConditioningEvent, ConditioningGrid, Harmonic, HarmonicOptions,
};
use ist_core::contour::{contour_of_tree, generator_residual, simulate_pdmp, Exit, PdmpOptions};
use ist_core::criticality::{
    classify_asymptotic, discrete_drift, integral_drift_profile, periodic_sup_phi, Verdict,
};
use ist_core::model::{LifetimeKernel, Model, RateFunction};
use ist_core::replicas::Replicas;
use ist_core::rng::{derive_seed, replica_rng};
use ist_core::scale::{
    extinction_probability, fixed_point_residual, population_law, scale_markov_closed_form,
    solve_scale, ExtinctionOptions,
};
use ist_core::scaling::{
    compare_scaling_limit, rescale_path, simulate_rescaled, simulate_rescaled_path,
};
use ist_core::stats::{binomial_se, ks_one_sample, ks_two_sample};
use ist_core::tree::{simulate_tree_with, TreeOptions};
use serde::Serialize;

use crate::commands::{execute, rerun, Command};
use crate::config::*;
use crate::exec::Pool;
use crate::output::Format;
use crate::stats::population_gof;

/// Number of criteria.
pub const CRITERIA: usize = 10;

/// Shared settings of a suite run.
#[derive(Debug)]
pub struct Context<'a> {
    pub seed: u64,
    pub exec: &'a Pool,
}

impl<'a> Context<'a> {
    pub fn new(seed: u64, exec: &'a Pool) -> Self {
        Context { seed, exec }
    }

    /// Seed stream of one criterion and sub-experiment.
    fn stream(&self, criterion: u64, part: u64) -> u64 {
        derive_seed(self.seed, (criterion << 16) | part)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl Outcome {
    /// `PASS [3] name (0.01 s): detail`.
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_s,
            self.detail
        )
    }
}

pub fn name(id: usize) -> &'static str {
    match id {
        1 => "closed-form scale function",
        2 => "time-varying Markovian scale function",
        3 => "periodic criticality constant",
        4 => "tree contour and direct simulation agree",
        5 => "two-barrier exit probabilities",
        6 => "population law",
        7 => "extinction and conditioning",
        8 => "drift verdicts",
        9 => "scaling limit",
        10 => "invariants",
        _ => "unknown",
    }
}

/// Runs criterion `id` (1 to [`CRITERIA`]). Errors from the library count as
/// failures.
pub fn run_criterion(id: usize, ctx: &Context<'_>) -> Outcome {
    let start = Instant::now();
    let result = match id {
        1 => c1_closed_form(),
        2 => c2_time_varying(),
        3 => c3_periodic(),
        4 => c4_law_equivalence(ctx),
        5 => c5_hitting(ctx),
        6 => c6_population(ctx),
        7 => c7_extinction(ctx),
        8 => c8_verdicts(),
        9 => c9_scaling(ctx),
        10 => c10_invariants(ctx),
        _ => Err(format!("no criterion {id}")),
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match result {
        Ok(c) => (c.passed, c.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = time_limit(id) {
        let _ = write!(detail, "; runtime {elapsed_s:.2} s (limit {limit} s)");
        passed &= elapsed_s < limit;
    }
    Outcome {
        id,
        name: name(id),
        passed,
        detail,
        elapsed_s,
    }
}

fn time_limit(id: usize) -> Option<f64> {
    match id {
        1 => Some(5.0),
        3 => Some(1.0),
        4 => Some(60.0),
        5 => Some(120.0),
        9 => Some(600.0),
        _ => None,
    }
}

struct Check {
    passed: bool,
    detail: String,
}

type Res = Result<Check, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn c1_closed_form() -> Res {
    let (b, d, t_max) = (1.0f64, 2.0f64, 1.0f64);
    let model = Model::markov(b, d).map_err(err)?;
    let table = solve_scale(&model, t_max, 512, 1e-10).map_err(err)?;
    let exact =
        |t: f64| (d - b * ((b - d) * (t_max - t)).exp()) / (d - b * ((b - d) * t_max).exp());
    let sup = table
        .grid()
        .into_iter()
        .zip(table.values())
        .map(|(t, v)| (v - exact(t)).abs())
        .fold(0.0, f64::max);
    Ok(Check {
        passed: sup < 5e-5,
        detail: format!("sup error {sup:.3e} (bound 5e-5), {} sweeps", table.sweeps),
    })
}

fn c2_time_varying() -> Res {
    let b = RateFunction::sinusoidal(1.0, 0.5, 1.0).map_err(err)?;
    let d = RateFunction::constant(2.0).map_err(err)?;
    let model = Model::new(
        b.clone(),
        LifetimeKernel::exponential(d.clone()).map_err(err)?,
    )
    .map_err(err)?;
    let t_max = 2.0;
    let table = solve_scale(&model, t_max, 512, 1e-10).map_err(err)?;
    let mut sup = 0.0f64;
    let grid = table.grid();
    // The last node holds the left limit, which equals the closed form's
    // continuous extension at T.
    for (t, v) in grid.iter().zip(table.values()) {
        let exact = scale_markov_closed_form(&b, &d, t_max, *t).map_err(err)?;
        sup = sup.max((v - exact).abs());
    }
    Ok(Check {
        passed: sup < 2e-4,
        detail: format!("sup error {sup:.3e} (bound 2e-4)"),
    })
}

fn c3_periodic() -> Res {
    let v = periodic_sup_phi(1.0, 0.0);
    let diff = (v - 0.507_255_5).abs();
    Ok(Check {
        passed: diff <= 1e-4,
        detail: format!("sup phi = {v:.7} (target 0.5072555 ± 1e-4)"),
    })
}

fn c4_law_equivalence(ctx: &Context<'_>) -> Res {
    let model = Model::new(
        RateFunction::constant(1.0).map_err(err)?,
        LifetimeKernel::dirac(1.0).map_err(err)?,
    )
    .map_err(err)?;
    let (x0, cap, n) = (2.0, 5.0, 10_000usize);
    let levels: Vec<f64> = (1..=20).map(|k| cap * k as f64 / 21.0).collect();
    let tree_stream = ctx.stream(4, 1);
    let tree_runs = ctx.exec.run(n, |i| {
        let mut rng = replica_rng(tree_stream, i as u64);
        let tree = simulate_tree_with(&model, x0, cap, TreeOptions::default(), &mut rng)?;
        let path = contour_of_tree(&tree);
        let mismatches = if i < 1000 {
            let mut bad = 0usize;
            for &t in &levels {
                if path.upcrossing_count(t) != tree.population_at(t)? {
                    bad += 1;
                }
            }
            bad
        } else {
            0
        };
        Ok::<_, ist_core::Error>((path.absorption, path.value_at(1.0), mismatches))
    });
    let pdmp_stream = ctx.stream(4, 2);
    let opts = PdmpOptions::new(Some(cap), f64::INFINITY);
    let pdmp_runs = ctx.exec.run(n, |i| {
        let mut rng = replica_rng(pdmp_stream, i as u64);
        simulate_pdmp(&model, x0, opts, &mut rng).map(|p| (p.absorption, p.value_at(1.0)))
    });
    let (mut abs_tree, mut val_tree, mut mismatches) = (Vec::new(), Vec::new(), 0usize);
    for r in tree_runs {
        let (a, v, m) = r.map_err(err)?;
        abs_tree.push(a.ok_or("tree contour not absorbed")?);
        val_tree.push(v);
        mismatches += m;
    }
    let (mut abs_pdmp, mut val_pdmp) = (Vec::new(), Vec::new());
    for r in pdmp_runs {
        let (a, v) = r.map_err(err)?;
        abs_pdmp.push(a.ok_or("direct path not absorbed")?);
        val_pdmp.push(v);
    }
    let ks_abs = ks_two_sample(&abs_tree, &abs_pdmp);
    let ks_val = ks_two_sample(&val_tree, &val_pdmp);
    Ok(Check {
        passed: ks_abs.passes(0.01) && ks_val.passes(0.01) && mismatches == 0,
        detail: format!(
            "absorption KS D={:.4} p={:.3}; value at 1 KS D={:.4} p={:.3}; {mismatches} upcrossing mismatches over 1000 trees x 20 levels",
            ks_abs.statistic, ks_abs.p_value, ks_val.statistic, ks_val.p_value
        ),
    })
}

fn c5_hitting(ctx: &Context<'_>) -> Res {
    let model = Model::markov(1.0, 2.0).map_err(err)?;
    let t_max = 1.0;
    let table = solve_scale(&model, t_max, 512, 1e-10).map_err(err)?;
    let pairs = [(0.1, 0.5), (0.2, 0.8), (0.3, 0.6), (0.5, 0.9), (0.05, 0.3)];
    let n = 100_000usize;
    let mut opts = PdmpOptions::new(Some(t_max), f64::INFINITY);
    opts.stop_above = Some(t_max);
    let mut ok = true;
    let mut detail = String::new();
    for (k, &(s, t)) in pairs.iter().enumerate() {
        let ss = table.value_at(s);
        let p = (ss - table.value_at(t)) / ss;
        let stream = ctx.stream(5, k as u64);
        let hits = ctx.exec.run(n, |i| {
            let mut rng = replica_rng(stream, i as u64);
            simulate_pdmp(&model, t, opts, &mut rng)
                .map(|path| matches!(path.first_exit(s, t_max), Exit::High(_)))
        });
        let mut count = 0usize;
        for h in hits {
            count += usize::from(h.map_err(err)?);
        }
        let freq = count as f64 / n as f64;
        let se = binomial_se(p, n);
        let z = (freq - p) / se;
        ok &= z.abs() <= 3.0;
        let _ = write!(
            detail,
            "(s={s}, t={t}) formula {p:.5} MC {freq:.5} z={z:+.2}; "
        );
    }
    Ok(Check {
        passed: ok,
        detail: detail.trim_end_matches("; ").to_string(),
    })
}

fn c6_population(ctx: &Context<'_>) -> Res {
    let model = Model::markov(2.0, 1.0).map_err(err)?;
    let (t0, t) = (0.5, 3.0);
    let law = population_law(&model, t0, t, 768, 1e-11).map_err(err)?;
    let stream = ctx.stream(6, 0);
    let counts = ctx.exec.run(100_000, |i| {
        let mut rng = replica_rng(stream, i as u64);
        simulate_tree_with(&model, t0, t, TreeOptions::default(), &mut rng)
            .and_then(|tree| tree.population_at(t))
    });
    let counts = counts
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let gof = population_gof(&law, &counts);
    Ok(Check {
        passed: gof.passes(0.01),
        detail: format!(
            "p0 {:.5}, q {:.5}; chi-square {:.2} on {} dof, p-value {:.3}",
            law.p0, law.q, gof.statistic, gof.dof, gof.p_value
        ),
    })
}

fn c7_extinction(ctx: &Context<'_>) -> Res {
    let model = Model::markov(2.0, 1.0).map_err(err)?;
    let mut ok = true;
    let mut detail = String::new();
    for t0 in [0.5, 1.0, 2.0] {
        let est = extinction_probability(&model, t0, ExtinctionOptions::default()).map_err(err)?;
        let diff = (est.value - (-t0).exp()).abs();
        ok &= diff < 1e-3;
        let _ = write!(detail, "S({t0}) err {diff:.2e}; ");
    }
    let harmonic = Harmonic::for_event(
        &model,
        ConditioningEvent::Extinction,
        HarmonicOptions::default(),
    )
    .map_err(err)?;
    let params =
        condition_params(&model, harmonic, ConditioningGrid::new(0.0, 12.0, 241)).map_err(err)?;
    for (k, x) in [1.0, 4.0].into_iter().enumerate() {
        let stream = ctx.stream(7, 10 + k as u64);
        let samples = ctx.exec.run(10_000, |i| {
            let mut rng = replica_rng(stream, i as u64);
            params.sample_kernel(x, &mut rng)
        });
        let samples = samples
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let ks = ks_one_sample(
            &samples,
            |y| if y <= 0.0 { 0.0 } else { -(-2.0 * y).exp_m1() },
        );
        ok &= ks.passes(0.01);
        let _ = write!(detail, "K^h({x}) vs Exp(2) p={:.3}; ", ks.p_value);
    }
    let cases = [
        (
            "Ext",
            ConditioningEvent::Extinction,
            ConditioningGrid::new(0.0, 12.0, 241),
        ),
        (
            "H<=5",
            ConditioningEvent::HeightAtMost(5.0),
            ConditioningGrid::new(0.0, 5.0, 321),
        ),
    ];
    let n = 10_000usize;
    for (k, (label, event, grid)) in cases.into_iter().enumerate() {
        let h = Harmonic::for_event(&model, event, HarmonicOptions::default()).map_err(err)?;
        let params = condition_params(&model, h, grid).map_err(err)?;
        let opts = ConditionedRunOptions::new(1e4, 30.0, 0.5);
        let cond = simulate_conditioned(
            &params,
            1.0,
            opts,
            n,
            ctx.stream(7, 20 + k as u64),
            ctx.exec,
        )
        .map_err(err)?;
        let base = rejection_filtered(
            &model,
            event,
            1.0,
            opts,
            n,
            20 * n,
            ctx.stream(7, 30 + k as u64),
            ctx.exec,
        )
        .map_err(err)?;
        if base.summaries.len() < n {
            return Err(format!(
                "{label}: rejection filter accepted only {} paths",
                base.summaries.len()
            ));
        }
        let cmp = compare_summaries(&cond.summaries, &base.summaries).map_err(err)?;
        ok &= cmp.passes(0.01);
        let _ = write!(
            detail,
            "{label} conditioned vs filtered p(height)={:.3} p(length)={:.3} p(population)={:.3}; ",
            cmp.height.p_value, cmp.length.p_value, cmp.population.p_value
        );
    }
    Ok(Check {
        passed: ok,
        detail: detail.trim_end_matches("; ").to_string(),
    })
}

fn c8_verdicts() -> Res {
    let default_scan: Vec<f64> = (1..=400).map(|i| 200.0 * i as f64 / 400.0).collect();
    let mut ok = true;
    let mut detail = String::new();

    let pareto = Model::new(
        RateFunction::constant(1.0).map_err(err)?,
        LifetimeKernel::pareto(3.0).map_err(err)?,
    )
    .map_err(err)?;
    let rep = classify_asymptotic(&pareto, &default_scan).map_err(err)?;
    let ext = extinction_probability(&pareto, 1.0, ExtinctionOptions::default()).map_err(err)?;
    ok &= rep.verdict == Verdict::SupercriticalSufficient && ext.value < 0.95;
    let _ = write!(
        detail,
        "Pareto(3): {:?}, S(1)={:.4}; ",
        rep.verdict, ext.value
    );

    let dirac = Model::new(
        RateFunction::constant(0.5).map_err(err)?,
        LifetimeKernel::dirac(1.0).map_err(err)?,
    )
    .map_err(err)?;
    let rep = classify_asymptotic(&dirac, &default_scan).map_err(err)?;
    let ext = extinction_probability(&dirac, 1.0, ExtinctionOptions::default()).map_err(err)?;
    ok &= rep.verdict == Verdict::SubcriticalSufficient && (ext.value - 1.0).abs() <= 1e-3;
    let _ = write!(
        detail,
        "b=0.5 Dirac(1): {:?}, S(1)={:.5}; ",
        rep.verdict, ext.value
    );

    let fixtures = [
        (
            "b=1 Exp(2)",
            Model::markov(1.0, 2.0).map_err(err)?,
            1.0f64,
            0.5f64,
        ),
        ("b=0.5 Dirac(1)", dirac, 0.5, 1.0),
        ("b=1 Pareto(3)", pareto, 1.0, 1.5),
    ];
    let mut worst = 0.0f64;
    let mesh = 0.01;
    for (_, model, b, m) in &fixtures {
        let profile = integral_drift_profile(model, 5.0, mesh).map_err(err)?;
        for x in [0.5, 1.0, 2.0, 5.0] {
            let closed = (b * m - 1.0) * (1.0 - (-b * x).exp()) / b;
            let node = profile[(x / mesh).round() as usize];
            let discrete = discrete_drift(model, |y| y, x).map_err(err)?;
            worst = worst
                .max((node.1 - closed).abs())
                .max((discrete - closed).abs())
                .max((node.1 - discrete).abs());
        }
    }
    ok &= worst <= 1e-6;
    let _ = write!(
        detail,
        "integral vs discrete drift vs closed form: max gap {worst:.2e}"
    );
    Ok(Check { passed: ok, detail })
}

fn c9_scaling(ctx: &Context<'_>) -> Res {
    let mut ok = true;
    let mut detail = String::new();
    let n_list = [16u32, 64, 256];
    for (k, c) in [0.0f64, 1.0].into_iter().enumerate() {
        let model = Model::new(
            RateFunction::asymptotically_critical(c).map_err(err)?,
            LifetimeKernel::dirac(1.0).map_err(err)?,
        )
        .map_err(err)?;
        let report = compare_scaling_limit(
            &model,
            &n_list,
            c,
            1.0,
            0.5,
            10_000,
            0.01,
            ctx.stream(9, k as u64),
            ctx.exec,
        )
        .map_err(err)?;
        let dists: Vec<String> = report
            .rows
            .iter()
            .map(|r| format!("{:.4}", r.ks_distance))
            .collect();
        let last = report.rows.last().ok_or("empty report")?;
        let decreasing = report.strictly_decreasing();
        let within = report.final_within_critical();
        let run = simulate_rescaled(
            &model,
            16,
            1.0,
            &[],
            50.0,
            10_000,
            ctx.stream(9, 10 + k as u64),
            ctx.exec,
        )
        .map_err(err)?;
        let absorbed = run.absorbed_fraction();
        let split = if c <= 0.5 {
            absorbed > 0.99
        } else {
            absorbed < 0.9
        };
        ok &= decreasing && within && split;
        let _ = write!(
            detail,
            "c={c}: KS [{}] decreasing={decreasing}, final {:.4} vs critical {:.4}; absorbed by 50 (n=16) {absorbed:.4} ({}); ",
            dists.join(", "),
            last.ks_distance,
            last.critical_value,
            if c <= 0.5 { "need > 0.99" } else { "need < 0.9" },
        );
    }
    Ok(Check {
        passed: ok,
        detail: detail.trim_end_matches("; ").to_string(),
    })
}

type Invariant = fn(&Context<'_>) -> Res;

fn c10_invariants(ctx: &Context<'_>) -> Res {
    let parts: [(&str, Invariant); 7] = [
        ("scale monotonicity", inv_scale_monotone),
        ("fixed-point residual", inv_residual),
        ("negative variation", inv_negative_variation),
        ("K^h normalization", inv_normalization),
        ("generator residual", inv_generator),
        ("n=1 rescaling", inv_rescaling_identity),
        ("manifest determinism", inv_manifest),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (label, f) in parts {
        let (p, d) = match f(ctx) {
            Ok(c) => (c.passed, c.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        ok &= p;
        let _ = write!(
            detail,
            "{label}: {} ({d}); ",
            if p { "ok" } else { "FAILED" }
        );
    }
    Ok(Check {
        passed: ok,
        detail: detail.trim_end_matches("; ").to_string(),
    })
}

fn invariant_models() -> Result<Vec<(Model, f64)>, String> {
    Ok(vec![
        (Model::markov(1.0, 2.0).map_err(err)?, 1.0),
        (Model::markov(2.0, 1.0).map_err(err)?, 3.0),
        (
            Model::new(
                RateFunction::constant(1.0).map_err(err)?,
                LifetimeKernel::pareto(3.0).map_err(err)?,
            )
            .map_err(err)?,
            4.0,
        ),
        (
            Model::new(
                RateFunction::constant(1.5).map_err(err)?,
                LifetimeKernel::dirac(1.0).map_err(err)?,
            )
            .map_err(err)?,
            3.0,
        ),
        (
            Model::new(
                RateFunction::sinusoidal(1.0, 0.5, 1.0).map_err(err)?,
                LifetimeKernel::exponential_constant(2.0).map_err(err)?,
            )
            .map_err(err)?,
            2.0,
        ),
    ])
}

fn inv_scale_monotone(_: &Context<'_>) -> Res {
    let mut worst_t = 0.0f64;
    let mut worst_level = 0.0f64;
    for (model, t_max) in invariant_models()? {
        let small = solve_scale(&model, t_max, 128, 1e-10).map_err(err)?;
        let large = solve_scale(&model, 2.0 * t_max, 256, 1e-10).map_err(err)?;
        worst_t = worst_t.max(small.max_increase()).max(large.max_increase());
        // Same step on both grids; the last node of the small table is a left limit.
        for (j, v) in small.values().iter().enumerate().take(small.mesh()) {
            worst_level = worst_level.max(v - large.values()[j]);
        }
    }
    Ok(Check {
        passed: worst_t <= 1e-9 && worst_level <= 1e-9,
        detail: format!("max increase in t {worst_t:.1e}, max decrease in T {worst_level:.1e}"),
    })
}

fn inv_residual(_: &Context<'_>) -> Res {
    let tol = 1e-10;
    let mut worst = 0.0f64;
    for (model, t_max) in invariant_models()? {
        let table = solve_scale(&model, t_max, 256, tol).map_err(err)?;
        worst = worst.max(fixed_point_residual(&model, &table).map_err(err)?);
    }
    Ok(Check {
        passed: worst < 10.0 * tol,
        detail: format!("max residual {worst:.1e} (bound {:.0e})", 10.0 * tol),
    })
}

fn inv_negative_variation(ctx: &Context<'_>) -> Res {
    let models = [
        Model::markov(1.0, 2.0).map_err(err)?,
        Model::new(
            RateFunction::constant(1.0).map_err(err)?,
            LifetimeKernel::pareto(3.0).map_err(err)?,
        )
        .map_err(err)?,
        Model::new(
            RateFunction::asymptotically_critical(1.0).map_err(err)?,
            LifetimeKernel::dirac(1.0).map_err(err)?,
        )
        .map_err(err)?,
    ];
    let stream = ctx.stream(10, 3);
    let results = ctx.exec.run(1000, |i| {
        use rand::Rng;
        let mut rng = replica_rng(stream, i as u64);
        let model = &models[i % models.len()];
        let path = simulate_pdmp(
            model,
            rng.random_range(0.5..3.0),
            PdmpOptions::new(None, 30.0),
            &mut rng,
        )?;
        let scaled = rescale_path(&path, 16);
        let mut excess = 0.0f64;
        for p in [&path, &scaled] {
            let end = p.end();
            for _ in 0..5 {
                let a = rng.random_range(0.0..end);
                let b = rng.random_range(a..=end);
                excess = excess.max(p.negative_variation(a, b) - p.slope * (b - a) * (1.0 + 1e-12));
            }
        }
        Ok::<_, ist_core::Error>(excess)
    });
    let mut worst = f64::NEG_INFINITY;
    for r in results {
        worst = worst.max(r.map_err(err)?);
    }
    Ok(Check {
        passed: worst <= 1e-12,
        detail: format!("1000 paths, 5 windows each at scales 1 and 16, max excess {worst:.1e}"),
    })
}

fn inv_normalization(_: &Context<'_>) -> Res {
    let sup = Model::markov(2.0, 1.0).map_err(err)?;
    let sub = Model::markov(1.0, 2.0).map_err(err)?;
    let cases = [
        (
            &sup,
            ConditioningEvent::Extinction,
            ConditioningGrid::new(0.0, 12.0, 121),
        ),
        (
            &sup,
            ConditioningEvent::Survival,
            ConditioningGrid::new(0.01, 12.0, 121),
        ),
        (
            &sup,
            ConditioningEvent::HeightAtMost(5.0),
            ConditioningGrid::new(0.0, 5.0, 161),
        ),
        (
            &sub,
            ConditioningEvent::HeightAbove(3.0),
            ConditioningGrid::new(0.01, 3.0, 121),
        ),
    ];
    let mut worst = 0.0f64;
    for (model, event, grid) in cases {
        let h = Harmonic::for_event(model, event, HarmonicOptions::default()).map_err(err)?;
        let params = condition_params(model, h, grid).map_err(err)?;
        worst = worst.max(params.normalization_error());
    }
    Ok(Check {
        passed: worst < 1e-8,
        detail: format!("four events, max |∫K^h - 1| {worst:.1e}"),
    })
}

/// Bound on `residual / (h + N^{-1/2})`.
const GENERATOR_RATE_BOUND: f64 = 10.0;

fn inv_generator(ctx: &Context<'_>) -> Res {
    let model = Model::markov(1.0, 2.0).map_err(err)?;
    let (cap, x, n) = (3.0, 1.0, 100_000usize);
    type F = fn(f64) -> f64;
    let fns: [(&str, F, F); 6] = [
        ("y", |y| y, |_| 1.0),
        ("y^2", |y| y * y, |y| 2.0 * y),
        ("y^3", |y| y * y * y, |y| 3.0 * y * y),
        ("sin", f64::sin, f64::cos),
        ("cos", f64::cos, |y| -y.sin()),
        ("exp(-y)", |y| (-y).exp(), |y| -(-y).exp()),
    ];
    let hs = [0.2, 0.1, 0.05, 0.025];
    let mut ok = true;
    let mut worst_ratio = 0.0f64;
    let mut detail = String::new();
    for (k, (label, f, df)) in fns.into_iter().enumerate() {
        let mut residuals = Vec::new();
        for (j, &h) in hs.iter().enumerate() {
            let seed = ctx.stream(10, 100 + 10 * k as u64 + j as u64);
            let chk =
                generator_residual(&model, cap, f, df, x, h, n, seed, ctx.exec).map_err(err)?;
            let ratio = chk.residual / (h + 1.0 / (n as f64).sqrt());
            worst_ratio = worst_ratio.max(ratio);
            ok &= ratio <= GENERATOR_RATE_BOUND;
            residuals.push((chk.residual, chk.std_error));
        }
        let (first, _) = residuals[0];
        let (last, last_se) = residuals[residuals.len() - 1];
        let shrinks = last <= first.max(3.0 * last_se);
        ok &= shrinks;
        let _ = write!(detail, "{label} {first:.3}->{last:.3}; ");
    }
    let _ = write!(
        detail,
        "max residual/(h+N^-1/2) {worst_ratio:.2} (bound {GENERATOR_RATE_BOUND})"
    );
    Ok(Check { passed: ok, detail })
}

fn inv_rescaling_identity(ctx: &Context<'_>) -> Res {
    let model = Model::new(
        RateFunction::asymptotically_critical(1.0).map_err(err)?,
        LifetimeKernel::dirac(1.0).map_err(err)?,
    )
    .map_err(err)?;
    let stream = ctx.stream(10, 6);
    let mut differing = 0usize;
    for i in 0..100u64 {
        let mut r1 = replica_rng(stream, i);
        let mut r2 = replica_rng(stream, i);
        let a = simulate_rescaled_path(&model, 1, 1.5, 40.0, 1_000_000, &mut r1).map_err(err)?;
        let mut opts = PdmpOptions::new(None, 40.0);
        opts.max_jumps = 1_000_000;
        let b = simulate_pdmp(&model, 1.5, opts, &mut r2).map_err(err)?;
        if a != b || rescale_path(&b, 1) != b {
            differing += 1;
        }
    }
    Ok(Check {
        passed: differing == 0,
        detail: format!("{differing} of 100 paths differ"),
    })
}

static SCRATCH: AtomicUsize = AtomicUsize::new(0);

/// A fresh directory under the system temporary directory, removed on drop.
struct Scratch(PathBuf);

impl Scratch {
    fn new() -> Result<Self, String> {
        let k = SCRATCH.fetch_add(1, Ordering::Relaxed);
        let dir = std::env::temp_dir().join(format!("ist-lab-verify-{}-{k}", std::process::id()));
        std::fs::create_dir_all(&dir).map_err(err)?;
        Ok(Scratch(dir))
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn inv_manifest(ctx: &Context<'_>) -> Res {
    let markov = |b: f64, d: f64| ModelSpec {
        rate: RateSpec::Constant { beta: b },
        kernel: KernelSpec::Exponential {
            death: RateSpec::Constant { beta: d },
        },
    };
    let commands = [
        Command::Scale(ScaleConfig {
            model: markov(1.0, 2.0),
            t_max: 1.0,
            mesh: 64,
            tol: 1e-10,
            max_sweeps: 10_000,
        }),
        Command::Tree(TreeConfig {
            model: markov(2.0, 1.0),
            x0: 0.5,
            t_max: 3.0,
            replicas: 6,
            max_nodes: 1_000_000,
        }),
        Command::Contour(ContourConfig {
            model: markov(1.0, 2.0),
            source: ContourSource::Pdmp,
            x0: 1.0,
            cap: Some(3.0),
            horizon: 50.0,
            replicas: 8,
            max_jumps: 1_000_000,
        }),
        Command::Population(PopulationConfig {
            model: markov(2.0, 1.0),
            t0: 0.5,
            t: 2.0,
            mesh: 128,
            tol: 1e-10,
            replicas: 300,
        }),
    ];
    let single = Pool::new(1).map_err(err)?;
    let seed = ctx.stream(10, 7);
    let mut compared = 0usize;
    let mut problems = Vec::new();
    for cmd in &commands {
        let (a, b, c) = (Scratch::new()?, Scratch::new()?, Scratch::new()?);
        let (_, ma) = execute(cmd, seed, ctx.exec, &a.0, Format::Csv).map_err(err)?;
        let (_, mb) = execute(cmd, seed, &single, &b.0, Format::Csv).map_err(err)?;
        if ma.artifacts != mb.artifacts {
            problems.push(format!("{}: thread count changed outputs", cmd.name()));
        }
        let (_, mismatches) =
            rerun(&a.0.join(crate::output::MANIFEST_FILE), ctx.exec, &c.0).map_err(err)?;
        problems.extend(
            mismatches
                .into_iter()
                .map(|m| format!("{}: {m}", cmd.name())),
        );
        compared += ma.artifacts.len();
    }
    Ok(Check {
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{compared} artifacts identical across thread counts and manifest replays")
        } else {
            problems.join(", ")
        },
    })
}
