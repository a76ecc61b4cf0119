//! Configurations that pass schema validation must never crash the runners:
//! they either succeed or return an error.

use ist_lab::commands::{execute, Command};
use ist_lab::exec::Pool;
use ist_lab::output::Format;
use proptest::prelude::*;
use serde_json::{json, Value};

fn rate() -> impl Strategy<Value = Value> {
    prop_oneof![
        (-1.0f64..4.0).prop_map(|b| json!({"kind": "constant", "beta": b})),
        (-2.0f64..3.0).prop_map(|c| json!({"kind": "asymptotically_critical", "c": c})),
        (-1.0f64..3.0, -1.0f64..1.0)
            .prop_map(|(b, o)| json!({"kind": "periodic", "beta": b, "offset": o})),
        (-1.0f64..3.0, -2.0f64..2.0, -1.0f64..3.0).prop_map(
            |(b, a, f)| json!({"kind": "sinusoidal", "base": b, "amplitude": a, "frequency": f})
        ),
        (
            prop::collection::vec(-1.0f64..5.0, 0..4),
            prop::collection::vec(-1.0f64..3.0, 0..4)
        )
            .prop_map(
                |(bp, v)| json!({"kind": "piecewise_constant", "breakpoints": bp, "values": v})
            ),
        (
            prop::collection::vec(-1.0f64..5.0, 0..4),
            prop::collection::vec(-1.0f64..3.0, 0..4)
        )
            .prop_map(|(g, v)| json!({"kind": "tabulated", "grid": g, "values": v})),
    ]
}

fn kernel() -> impl Strategy<Value = Value> {
    prop_oneof![
        (-1.0f64..3.0).prop_map(|a| json!({"kind": "dirac", "a": a})),
        rate().prop_map(|d| json!({"kind": "exponential", "death": d})),
        (-1.0f64..5.0).prop_map(|k| json!({"kind": "pareto", "k": k})),
        Just(json!({"kind": "two_point_death"})),
        (
            prop::collection::vec(-1.0f64..4.0, 0..4),
            prop::collection::vec(-0.5f64..1.5, 0..4)
        )
            .prop_map(|(p, c)| json!({"kind": "tabulated", "points": p, "cdf": c})),
    ]
}

fn model() -> impl Strategy<Value = Value> {
    (rate(), kernel()).prop_map(|(r, k)| json!({"rate": r, "kernel": k}))
}

/// Models that pass validation, so runs reach the numerics.
fn valid_model() -> impl Strategy<Value = Value> {
    let rate = prop_oneof![
        (0.0f64..2.5).prop_map(|b| json!({"kind": "constant", "beta": b})),
        (-1.0f64..2.0).prop_map(|c| json!({"kind": "asymptotically_critical", "c": c})),
        (0.1f64..2.0, 0.0f64..1.0)
            .prop_map(|(b, a)| json!({"kind": "sinusoidal", "base": b, "amplitude": a * b, "frequency": 1.0})),
        (0.0f64..2.0, 0.0f64..2.0, 0.1f64..3.0)
            .prop_map(|(a, b, x)| json!({"kind": "piecewise_constant", "breakpoints": [0.0, x], "values": [a, b]})),
    ];
    let kernel = prop_oneof![
        (0.05f64..2.0).prop_map(|a| json!({"kind": "dirac", "a": a})),
        (0.2f64..3.0).prop_map(|d| json!({"kind": "exponential", "death": {"kind": "constant", "beta": d}})),
        (0.5f64..5.0).prop_map(|k| json!({"kind": "pareto", "k": k})),
        Just(json!({"kind": "two_point_death"})),
        (0.1f64..1.0, 0.0f64..1.0, 1.0f64..3.0)
            .prop_map(|(a, c, b)| json!({"kind": "tabulated", "points": [0.0, a, a + b], "cdf": [0.0, c, 1.0]})),
    ];
    (rate, kernel).prop_map(|(r, k)| json!({"rate": r, "kernel": k}))
}

fn config(model: BoxedStrategy<Value>) -> impl Strategy<Value = (&'static str, Value)> {
    let model = move || model.clone();
    prop_oneof![
        (model(), -0.5f64..3.0, -0.5f64..4.0, 1usize..4).prop_map(|(m, x0, t, r)| (
            "tree",
            json!({"model": m, "x0": x0, "t_max": t, "replicas": r, "max_nodes": 5000})
        )),
        (model(), any::<bool>(), -0.5f64..3.0, prop::option::of(-0.5f64..4.0), -1.0f64..30.0).prop_map(
            |(m, tree, x0, cap, h)| (
                "contour",
                json!({"model": m, "source": if tree { "tree" } else { "pdmp" }, "x0": x0, "cap": cap,
                       "horizon": h, "replicas": 2, "max_jumps": 5000})
            )
        ),
        (model(), -0.5f64..4.0, 0usize..64, 1e-12f64..1e-2).prop_map(|(m, t, mesh, tol)| (
            "scale",
            json!({"model": m, "t_max": t, "mesh": mesh, "tol": tol, "max_sweeps": 200})
        )),
        (model(), prop::collection::vec(-0.5f64..3.0, 0..3)).prop_map(|(m, t0)| (
            "extinction",
            json!({"model": m, "t0": t0, "max_mesh": 128, "t_start": 2.0, "t_limit": 8.0, "steps_per_unit": 8})
        )),
        (model(), -0.5f64..2.0, -0.5f64..3.0, 0usize..64, 0usize..20).prop_map(|(m, t0, t, mesh, r)| (
            "population",
            json!({"model": m, "t0": t0, "t": t, "mesh": mesh, "replicas": r})
        )),
        (model(), -1.0f64..50.0, 0usize..40).prop_map(|(m, x, n)| (
            "classify",
            json!({"model": m, "scan": {"x_max": x, "points": n}})
        )),
        (model(), prop::sample::select(vec![
            json!({"kind": "extinction"}),
            json!({"kind": "survival"}),
            json!({"kind": "height_at_most", "level": 2.0}),
            json!({"kind": "height_above", "level": 1.5}),
            json!({"kind": "height_at_most", "level": -1.0}),
        ]), -0.5f64..1.0, -1.0f64..4.0, 0usize..12, 0usize..4).prop_map(|(m, e, lo, hi, pts, r)| (
            "condition",
            json!({"model": m, "event": e, "x_min": lo, "x_max": hi, "points": pts, "x0": 1.0,
                   "level": 0.5, "horizon": 50.0, "barrier": 5.0, "replicas": r,
                   "solver": {"steps_per_unit": 8, "max_mesh": 128, "t_limit": 8.0}})
        )),
        (model(), -1.0f64..2.0, -0.5f64..2.0, -0.5f64..1.0, prop::collection::vec(0u32..8, 0..3)).prop_map(
            |(m, c, x0, t, ns)| (
                "scaling",
                json!({"model": m, "c": c, "x0": x0, "t": t, "n_list": ns, "replicas": 8,
                       "scan": {"x_max": 50.0, "points": 10}})
            )
        ),
    ]
}

fn check(sub: &'static str, cfg: &Value) -> Result<(), TestCaseError> {
    let cmd = match Command::from_json(sub, &cfg.to_string()) {
        Ok(c) => c,
        Err(e) => {
            prop_assert_eq!(e.exit_code(), 2);
            return Ok(());
        }
    };
    let pool = Pool::new(1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    match execute(&cmd, 1, &pool, dir.path(), Format::Csv) {
        Ok((_, manifest)) => prop_assert_eq!(manifest.subcommand, sub),
        Err(e) => prop_assert!((2..=4).contains(&e.exit_code()), "{}", e),
    }
    Ok(())
}

fn small_model(v: &Value) -> bool {
    // Keep runs short: very fertile models with long horizons only exercise
    // the node and jump limits, which the bounded settings already cover.
    let r = &v["model"]["rate"];
    let big = ["beta", "base"]
        .iter()
        .any(|k| r[k].as_f64().is_some_and(|b| b > 2.5));
    !big
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 160,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn valid_shapes_never_panic((sub, cfg) in config(model().boxed())) {
        prop_assume!(small_model(&cfg));
        check(sub, &cfg)?;
    }

    #[test]
    fn valid_models_run_or_refuse((sub, cfg) in config(valid_model().boxed())) {
        check(sub, &cfg)?;
    }

    #[test]
    fn arbitrary_text_is_rejected_cleanly(text in ".{0,80}", sub in prop::sample::select(ist_lab::commands::SUBCOMMANDS.to_vec())) {
        if let Err(e) = Command::from_json(sub, &text) {
            prop_assert_eq!(e.exit_code(), 2);
        }
    }
}
