//! Subcommand runners.

use std::path::Path;

use ist_core::conditioning::{
    compare_summaries, condition_params, rejection_filtered, simulate_conditioned,
    ConditionedRunOptions, ConditioningGrid, Harmonic, PathSummary,
};
use ist_core::contour::{contour_of_tree, simulate_pdmp, ContourPath, PdmpOptions};
use ist_core::criticality::{classify_asymptotic, length_tail_estimate, Verdict};
use ist_core::replicas::Replicas;
use ist_core::rng::{derive_seed, replica_rng};
use ist_core::scale::{
    extinction_probability, fixed_point_residual, population_law, solve_scale_with, ScaleOptions,
};
use ist_core::scaling::{check_scaling_assumption, compare_scaling_limit, simulate_rescaled};
use ist_core::stats::KsOutcome;
use ist_core::tree::{simulate_tree_with, TreeOptions};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::acceptance;
use crate::config::*;
use crate::error::{LabError, LabResult};
use crate::exec::Pool;
use crate::formats::{path_table, tree_table, Cell, Table};
use crate::output::{Manifest, Output};
use crate::stats::population_gof;

/// Subcommand names, in help order.
pub const SUBCOMMANDS: [&str; 10] = [
    "tree",
    "contour",
    "scale",
    "extinction",
    "population",
    "classify",
    "tails",
    "condition",
    "scaling",
    "verify",
];

/// A subcommand with its parsed configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Tree(TreeConfig),
    Contour(ContourConfig),
    Scale(ScaleConfig),
    Extinction(ExtinctionConfig),
    Population(PopulationConfig),
    Classify(ClassifyConfig),
    Tails(TailsConfig),
    Condition(ConditionConfig),
    Scaling(ScalingConfig),
    Verify(VerifyConfig),
}

fn parse<T: DeserializeOwned>(text: &str) -> LabResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(|e| LabError::Config {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })?;
    Ok(value)
}

fn schema<T: schemars::JsonSchema>() -> Value {
    serde_json::to_value(schemars::schema_for!(T)).expect("schema serializes")
}

impl Command {
    /// Parses the JSON configuration of subcommand `name`. Errors name the
    /// offending field path.
    pub fn from_json(name: &str, text: &str) -> LabResult<Self> {
        Ok(match name {
            "tree" => Command::Tree(parse(text)?),
            "contour" => Command::Contour(parse(text)?),
            "scale" => Command::Scale(parse(text)?),
            "extinction" => Command::Extinction(parse(text)?),
            "population" => Command::Population(parse(text)?),
            "classify" => Command::Classify(parse(text)?),
            "tails" => Command::Tails(parse(text)?),
            "condition" => Command::Condition(parse(text)?),
            "scaling" => Command::Scaling(parse(text)?),
            "verify" => Command::Verify(parse(text)?),
            other => return Err(LabError::Usage(format!("unknown subcommand `{other}`"))),
        })
    }

    /// JSON schema of the configuration of subcommand `name`.
    pub fn schema(name: &str) -> LabResult<Value> {
        Ok(match name {
            "tree" => schema::<TreeConfig>(),
            "contour" => schema::<ContourConfig>(),
            "scale" => schema::<ScaleConfig>(),
            "extinction" => schema::<ExtinctionConfig>(),
            "population" => schema::<PopulationConfig>(),
            "classify" => schema::<ClassifyConfig>(),
            "tails" => schema::<TailsConfig>(),
            "condition" => schema::<ConditionConfig>(),
            "scaling" => schema::<ScalingConfig>(),
            "verify" => schema::<VerifyConfig>(),
            other => return Err(LabError::Usage(format!("unknown subcommand `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Tree(_) => "tree",
            Command::Contour(_) => "contour",
            Command::Scale(_) => "scale",
            Command::Extinction(_) => "extinction",
            Command::Population(_) => "population",
            Command::Classify(_) => "classify",
            Command::Tails(_) => "tails",
            Command::Condition(_) => "condition",
            Command::Scaling(_) => "scaling",
            Command::Verify(_) => "verify",
        }
    }

    /// The configuration with defaults filled in.
    pub fn resolved(&self) -> Value {
        let v = match self {
            Command::Tree(c) => serde_json::to_value(c),
            Command::Contour(c) => serde_json::to_value(c),
            Command::Scale(c) => serde_json::to_value(c),
            Command::Extinction(c) => serde_json::to_value(c),
            Command::Population(c) => serde_json::to_value(c),
            Command::Classify(c) => serde_json::to_value(c),
            Command::Tails(c) => serde_json::to_value(c),
            Command::Condition(c) => serde_json::to_value(c),
            Command::Scaling(c) => serde_json::to_value(c),
            Command::Verify(c) => serde_json::to_value(c),
        };
        v.expect("configs serialize")
    }
}

/// What a run reports on standard output.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub lines: Vec<String>,
    /// Set when a verification inside the run failed.
    pub failed: bool,
}

impl Summary {
    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

/// Runs `cmd`, writing its artifacts and manifest under `dir`.
pub fn execute(
    cmd: &Command,
    seed: u64,
    exec: &Pool,
    dir: &Path,
    format: crate::output::Format,
) -> LabResult<(Summary, Manifest)> {
    let mut out = Output::create(dir, format)?;
    let summary = run(cmd, seed, exec, &mut out)?;
    let manifest = out.finish(cmd.name(), seed, cmd.resolved())?;
    Ok((summary, manifest))
}

/// Replays a manifest into `dir` and lists the artifacts whose hash differs.
pub fn rerun(manifest_path: &Path, exec: &Pool, dir: &Path) -> LabResult<(Manifest, Vec<String>)> {
    let old = Manifest::load(manifest_path)?;
    let text = old.config.to_string();
    let cmd = Command::from_json(&old.subcommand, &text)?;
    let (_, new) = execute(&cmd, old.seed, exec, dir, old.format)?;
    let mut mismatches = Vec::new();
    for a in &old.artifacts {
        match new.artifacts.iter().find(|b| b.file == a.file) {
            Some(b) if b.sha256 == a.sha256 => {}
            Some(_) => mismatches.push(format!("{}: hash differs", a.file)),
            None => mismatches.push(format!("{}: not produced", a.file)),
        }
    }
    for b in &new.artifacts {
        if !old.artifacts.iter().any(|a| a.file == b.file) {
            mismatches.push(format!("{}: not in the manifest", b.file));
        }
    }
    Ok((new, mismatches))
}

pub fn run(cmd: &Command, seed: u64, exec: &Pool, out: &mut Output) -> LabResult<Summary> {
    match cmd {
        Command::Tree(c) => run_tree(c, seed, exec, out),
        Command::Contour(c) => run_contour(c, seed, exec, out),
        Command::Scale(c) => run_scale(c, out),
        Command::Extinction(c) => run_extinction(c, out),
        Command::Population(c) => run_population(c, seed, exec, out),
        Command::Classify(c) => run_classify(c, out),
        Command::Tails(c) => run_tails(c, seed, exec, out),
        Command::Condition(c) => run_condition(c, seed, exec, out),
        Command::Scaling(c) => run_scaling(c, seed, exec, out),
        Command::Verify(c) => run_verify(c, seed, exec, out),
    }
}

fn positive_count(name: &str, n: usize) -> LabResult<()> {
    if n == 0 {
        return Err(LabError::Config {
            path: name.to_string(),
            message: "must be at least 1".into(),
        });
    }
    Ok(())
}

fn run_tree(c: &TreeConfig, seed: u64, exec: &Pool, out: &mut Output) -> LabResult<Summary> {
    positive_count("replicas", c.replicas)?;
    let model = c.model.build()?;
    let opts = TreeOptions {
        max_nodes: c.max_nodes,
    };
    let results = exec.run(c.replicas, |i| {
        let mut rng = replica_rng(seed, i as u64);
        simulate_tree_with(&model, c.x0, c.t_max, opts, &mut rng).map(|tree| {
            let row = vec![
                Cell::from(i),
                tree.len().into(),
                tree.length().into(),
                tree.height().into(),
                Cell::from(if tree.is_extinct() { "true" } else { "false" }),
            ];
            (row, (i == 0).then_some(tree))
        })
    });
    let mut summary_table = Table::new(&["replica", "individuals", "length", "height", "extinct"]);
    let mut first = None;
    for r in results {
        let (row, tree) = r?;
        summary_table.push(row);
        if tree.is_some() {
            first = tree;
        }
    }
    let first = first.expect("replica 0 keeps its tree");
    out.table("tree", &tree_table(&first))?;
    out.table("trees", &summary_table)?;
    let mut s = Summary::default();
    s.say(format!(
        "tree 0: {} individuals, length {}, height {}",
        first.len(),
        first.length(),
        first.height()
    ));
    Ok(s)
}

fn path_height(p: &ContourPath) -> f64 {
    p.jumps.iter().map(|j| j.to).fold(p.start, f64::max)
}

fn run_contour(c: &ContourConfig, seed: u64, exec: &Pool, out: &mut Output) -> LabResult<Summary> {
    positive_count("replicas", c.replicas)?;
    let model = c.model.build()?;
    let results = match c.source {
        ContourSource::Tree => {
            let cap = c.cap.ok_or_else(|| LabError::Config {
                path: "cap".into(),
                message: "tree contours need a truncation level".into(),
            })?;
            exec.run(c.replicas, |i| {
                let mut rng = replica_rng(seed, i as u64);
                simulate_tree_with(&model, c.x0, cap, TreeOptions::default(), &mut rng)
                    .map(|t| contour_of_tree(&t))
            })
        }
        ContourSource::Pdmp => {
            let opts = PdmpOptions {
                cap: c.cap,
                horizon: c.horizon,
                max_jumps: c.max_jumps,
                stop_above: None,
            };
            exec.run(c.replicas, |i| {
                let mut rng = replica_rng(seed, i as u64);
                simulate_pdmp(&model, c.x0, opts, &mut rng)
            })
        }
    };
    let mut table = Table::new(&["replica", "jumps", "height", "absorption"]);
    let mut first = None;
    for (i, r) in results.into_iter().enumerate() {
        let p = r?;
        table.push(vec![
            i.into(),
            p.jumps.len().into(),
            path_height(&p).into(),
            p.absorption.into(),
        ]);
        if i == 0 {
            first = Some(p);
        }
    }
    let first = first.expect("at least one replica");
    out.table("path", &path_table(&first))?;
    out.table("paths", &table)?;
    let absorbed = table
        .rows
        .iter()
        .filter(|r| !matches!(r[3], Cell::Empty))
        .count();
    let mut s = Summary::default();
    s.say(format!(
        "{} paths, {absorbed} absorbed before the horizon",
        c.replicas
    ));
    Ok(s)
}

fn run_scale(c: &ScaleConfig, out: &mut Output) -> LabResult<Summary> {
    let model = c.model.build()?;
    let opts = ScaleOptions {
        mesh: c.mesh,
        tol: c.tol,
        max_sweeps: c.max_sweeps,
    };
    let table = solve_scale_with(&model, c.t_max, opts, None)?;
    let residual = fixed_point_residual(&model, &table)?;
    let mut t = Table::new(&["t", "S"]);
    for (x, v) in table.grid().into_iter().zip(table.values()) {
        t.push(vec![x.into(), (*v).into()]);
    }
    out.table("scale", &t)?;
    out.report(
        "scale_meta",
        &json!({
            "T": c.t_max,
            "M": c.mesh,
            "tol": c.tol,
            "sweeps": table.sweeps,
            "last_change": table.change,
            "residual": residual,
            "left_limit": table.left_limit(),
        }),
    )?;
    let mut s = Summary::default();
    s.say(format!(
        "S_T solved on {} intervals in {} sweeps, residual {residual:e}",
        c.mesh, table.sweeps
    ));
    Ok(s)
}

fn run_extinction(c: &ExtinctionConfig, out: &mut Output) -> LabResult<Summary> {
    if c.t0.is_empty() {
        return Err(LabError::Config {
            path: "t0".into(),
            message: "give at least one level".into(),
        });
    }
    let model = c.model.build()?;
    let mut values = Table::new(&["t0", "S", "T_final", "residual"]);
    let mut history = Table::new(&["t0", "T", "S_T"]);
    let mut s = Summary::default();
    for &t0 in &c.t0 {
        let est = extinction_probability(&model, t0, c.options())?;
        let t_final = est.history.last().map_or(f64::NAN, |h| h.0);
        values.push(vec![
            t0.into(),
            est.value.into(),
            t_final.into(),
            est.residual.into(),
        ]);
        for &(t, v) in &est.history {
            history.push(vec![t0.into(), t.into(), v.into()]);
        }
        s.say(format!("S({t0}) = {} (T = {t_final})", est.value));
    }
    out.table("extinction", &values)?;
    out.table("extinction_history", &history)?;
    Ok(s)
}

fn run_population(
    c: &PopulationConfig,
    seed: u64,
    exec: &Pool,
    out: &mut Output,
) -> LabResult<Summary> {
    let model = c.model.build()?;
    let law = population_law(&model, c.t0, c.t, c.mesh, c.tol)?;
    let mut pmf = Table::new(&["k", "pmf"]);
    let mut mass = 0.0;
    for k in 0..100_000usize {
        let p = law.pmf(k);
        pmf.push(vec![k.into(), p.into()]);
        mass += p;
        if mass >= 1.0 - 1e-12 || (k > 0 && law.q >= 1.0) {
            break;
        }
    }
    out.table("population", &pmf)?;
    let mut s = Summary::default();
    let mut report = json!({
        "t0": c.t0,
        "t": c.t,
        "p0": law.p0,
        "q": law.q,
        "q_node": law.q_node,
        "ancestor_alive": law.ancestor_alive,
    });
    s.say(format!("p0 = {}, q = {}", law.p0, law.q));
    if c.replicas > 0 {
        let counts = exec.run(c.replicas, |i| {
            let mut rng = replica_rng(seed, i as u64);
            simulate_tree_with(&model, c.t0, c.t, TreeOptions::default(), &mut rng)
                .and_then(|tree| tree.population_at(c.t))
        });
        let counts = counts.into_iter().collect::<Result<Vec<_>, _>>()?;
        let gof = population_gof(&law, &counts);
        let mut mc = Table::new(&["k_low", "k_high", "observed", "expected"]);
        for b in &gof.bins {
            mc.push(vec![
                b.low.into(),
                b.high.map_or(Cell::Empty, Cell::from),
                b.observed.into(),
                b.expected.into(),
            ]);
        }
        out.table("population_mc", &mc)?;
        s.say(format!(
            "chi-square {} on {} degrees of freedom, p-value {}",
            gof.statistic, gof.dof, gof.p_value
        ));
        report["comparison"] = serde_json::to_value(&gof).expect("gof serializes");
    }
    out.report("population_report", &report)?;
    Ok(s)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::SubcriticalSufficient => "SubcriticalSufficient",
        Verdict::SupercriticalSufficient => "SupercriticalSufficient",
        Verdict::Inconclusive => "Inconclusive",
    }
}

/// `x_max·i/points` for `i = 1..=points`.
pub fn scan_grid(scan: &ScanSpec) -> LabResult<Vec<f64>> {
    if scan.points < 2 || !(scan.x_max.is_finite() && scan.x_max > 0.0) {
        return Err(LabError::Config {
            path: "scan".into(),
            message: "need points >= 2 and a finite x_max > 0".into(),
        });
    }
    Ok((1..=scan.points)
        .map(|i| scan.x_max * i as f64 / scan.points as f64)
        .collect())
}

fn run_classify(c: &ClassifyConfig, out: &mut Output) -> LabResult<Summary> {
    let model = c.model.build()?;
    let grid = scan_grid(&c.scan)?;
    let report = classify_asymptotic(&model, &grid)?;
    let mut scan = Table::new(&["x", "bm"]);
    for &(x, v) in &report.scan {
        scan.push(vec![x.into(), v.into()]);
    }
    out.table("classify_scan", &scan)?;
    let mut value = json!({
        "verdict": verdict_name(report.verdict),
        "reason": report.reason,
        "limsup_bm": report.limsup,
        "liminf_bm": report.liminf,
        "stabilization": report.stabilization,
        "stabilized": report.stabilized,
        "second_moment_check": report.second_moment_check,
        "integral_condition_value": report.integral_condition_value,
        "scan": report.scan.iter().map(|p| [p.0, p.1]).collect::<Vec<_>>(),
    });
    let mut s = Summary::default();
    s.say(format!("verdict: {}", verdict_name(report.verdict)));
    if let Some(t0) = c.extinction_at {
        let est = extinction_probability(&model, t0, Default::default())?;
        value["extinction"] = json!({
            "t0": t0,
            "value": est.value,
            "history": est.history,
            "residual": est.residual,
        });
        s.say(format!("extinction probability from {t0}: {}", est.value));
    }
    out.report("classify", &value)?;
    Ok(s)
}

fn run_tails(c: &TailsConfig, seed: u64, exec: &Pool, out: &mut Output) -> LabResult<Summary> {
    positive_count("replicas", c.replicas)?;
    let model = c.model.build()?;
    let est = length_tail_estimate(&model, c.x0, c.t_max, c.replicas, &c.thresholds, seed, exec)?;
    let mut t = Table::new(&["threshold", "estimate", "ci_low", "ci_high", "bound_value"]);
    for r in &est.rows {
        t.push(vec![
            r.threshold.into(),
            r.estimate.into(),
            r.ci_low.into(),
            r.ci_high.into(),
            r.bound_value.into(),
        ]);
    }
    out.table("tails", &t)?;
    out.report(
        "tails_report",
        &json!({
            "replicas": est.replicas,
            "heavy_tailed": est.heavy_tailed,
            "fitted_decay": est.fitted_decay,
        }),
    )?;
    let mut s = Summary::default();
    s.say(format!(
        "{} thresholds from {} trees",
        est.rows.len(),
        est.replicas
    ));
    Ok(s)
}

fn summaries_table(summaries: &[PathSummary]) -> Table {
    let mut t = Table::new(&[
        "replica",
        "height",
        "length",
        "population",
        "floor",
        "end_value",
    ]);
    for (i, p) in summaries.iter().enumerate() {
        t.push(vec![
            i.into(),
            p.height.into(),
            p.length.into(),
            p.population.into(),
            p.floor.into(),
            p.end_value.into(),
        ]);
    }
    t
}

fn ks_json(k: &KsOutcome) -> Value {
    json!({ "statistic": k.statistic, "p_value": k.p_value })
}

fn run_condition(
    c: &ConditionConfig,
    seed: u64,
    exec: &Pool,
    out: &mut Output,
) -> LabResult<Summary> {
    let model = c.model.build()?;
    let event = c.event.event();
    let harmonic = Harmonic::for_event(&model, event, c.solver.options())?;
    let params = condition_params(
        &model,
        harmonic,
        ConditioningGrid::new(c.x_min, c.x_max, c.points),
    )?;
    let mut t = Table::new(&["x", "rate", "m1", "m2", "m3"]);
    for r in params.rows() {
        t.push(vec![
            r.x.into(),
            r.rate.into(),
            r.moments[0].into(),
            r.moments[1].into(),
            r.moments[2].into(),
        ]);
    }
    out.table("condition", &t)?;
    let mut s = Summary::default();
    let norm = params.normalization_error();
    s.say(format!(
        "conditioned parameters on {} levels, normalization error {norm:e}",
        params.rows().len()
    ));
    let mut report = json!({
        "event": serde_json::to_value(c.event).expect("event serializes"),
        "x_min": params.x_min(),
        "grid_points": params.rows().len(),
        "normalization_error": norm,
    });
    if c.replicas > 0 {
        let opts = ConditionedRunOptions::new(c.horizon, c.barrier, c.level);
        let run = simulate_conditioned(&params, c.x0, opts, c.replicas, seed, exec)?;
        out.table("conditioned_paths", &summaries_table(&run.summaries))?;
        report["conditioned"] = json!({
            "start": run.start,
            "replicas": run.replicas,
            "absorbed": run.absorbed,
            "absorbed_fraction": run.absorbed_fraction(),
            "height_violations": run.height_violations,
            "floor_violations": run.floor_violations,
            "near_zero_at_horizon": run.near_zero_at_horizon,
        });
        s.say(format!(
            "{} conditioned paths, {} absorbed",
            run.replicas, run.absorbed
        ));
        if c.compare {
            let filtered = rejection_filtered(
                &model,
                event,
                c.x0,
                opts,
                c.replicas,
                1000 * c.replicas,
                seed,
                exec,
            )?;
            out.table("filtered_paths", &summaries_table(&filtered.summaries))?;
            let cmp = compare_summaries(&run.summaries, &filtered.summaries)?;
            report["comparison"] = json!({
                "attempts": filtered.attempts,
                "acceptance": filtered.acceptance(),
                "height": ks_json(&cmp.height),
                "length": ks_json(&cmp.length),
                "population": ks_json(&cmp.population),
                "passes_at_0.01": cmp.passes(0.01),
            });
            s.say(format!(
                "two-sample KS p-values: height {}, length {}, population {}",
                cmp.height.p_value, cmp.length.p_value, cmp.population.p_value
            ));
        }
    }
    out.report("condition_report", &report)?;
    Ok(s)
}

fn run_scaling(c: &ScalingConfig, seed: u64, exec: &Pool, out: &mut Output) -> LabResult<Summary> {
    positive_count("replicas", c.replicas)?;
    if c.n_list.is_empty() {
        return Err(LabError::Config {
            path: "n_list".into(),
            message: "give at least one scale".into(),
        });
    }
    let model = c.model.build()?;
    let assumption = check_scaling_assumption(&model, &scan_grid(&c.scan)?);
    let mut at = Table::new(&["x", "drift", "second", "third"]);
    for r in &assumption.rows {
        at.push(vec![
            r.x.into(),
            r.drift.into(),
            r.second.into(),
            r.third.into(),
        ]);
    }
    out.table("assumption", &at)?;
    let mut s = Summary::default();
    if (assumption.c_estimate - c.c).abs() > 0.05 * (1.0 + c.c.abs()) {
        log::warn!(
            "configured c = {} but the drift scan suggests {}",
            c.c,
            assumption.c_estimate
        );
    }
    let report = compare_scaling_limit(
        &model, &c.n_list, c.c, c.x0, c.t, c.replicas, c.alpha, seed, exec,
    )?;
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "ks_distance": r.ks_distance,
                "critical_value": r.critical_value,
                "absorbed_rescaled": r.absorbed_rescaled,
                "absorbed_oracle": r.absorbed_oracle,
                "replicas": r.replicas,
            })
        })
        .collect();
    for r in &report.rows {
        s.say(format!(
            "n = {}: KS {} (critical {}), absorbed {} vs {}",
            r.n, r.ks_distance, r.critical_value, r.absorbed_rescaled, r.absorbed_oracle
        ));
    }
    let mut value = json!({
        "c": c.c,
        "x0": c.x0,
        "t": c.t,
        "alpha": c.alpha,
        "bessel_dimension": 2.0 * c.c + 1.0,
        "assumption": {
            "c_estimate": assumption.c_estimate,
            "second_moment_limit": assumption.second_moment_limit,
            "third_moment_sup": assumption.third_moment_sup,
            "violations": assumption.violations,
            "passes": assumption.passes(),
        },
        "rows": rows,
        "strictly_decreasing": report.strictly_decreasing(),
        "final_within_critical": report.final_within_critical(),
    });
    if let Some(h) = c.absorption_horizon {
        let stream = derive_seed(seed, 0xAB5);
        let mut fractions = Vec::new();
        for &n in &c.n_list {
            let run = simulate_rescaled(&model, n, c.x0, &[], h, c.replicas, stream, exec)?;
            fractions.push(
                json!({ "n": n, "horizon": h, "absorbed_fraction": run.absorbed_fraction() }),
            );
            s.say(format!(
                "n = {n}: absorbed by {h}: {}",
                run.absorbed_fraction()
            ));
        }
        value["absorption"] = Value::Array(fractions);
    }
    out.report("scaling", &value)?;
    Ok(s)
}

fn run_verify(c: &VerifyConfig, seed: u64, exec: &Pool, out: &mut Output) -> LabResult<Summary> {
    for &id in &c.criteria {
        if !(1..=acceptance::CRITERIA).contains(&(id as usize)) {
            return Err(LabError::Config {
                path: "criteria".into(),
                message: format!("no criterion {id}"),
            });
        }
    }
    let ids: Vec<usize> = if c.criteria.is_empty() {
        (1..=acceptance::CRITERIA).collect()
    } else {
        c.criteria.iter().map(|&i| i as usize).collect()
    };
    let ctx = acceptance::Context::new(seed, exec);
    let mut s = Summary::default();
    let mut outcomes = Vec::new();
    for id in ids {
        let o = acceptance::run_criterion(id, &ctx);
        s.say(o.line());
        s.failed |= !o.passed;
        outcomes.push(o);
    }
    out.report("verify", &outcomes)?;
    Ok(s)
}
