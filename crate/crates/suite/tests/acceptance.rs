//! Acceptance suite: one test per criterion, each printing a PASS or FAIL line.
//!
//! Criteria run one at a time so that the runtime limits are measured without
//! competing work from the other tests of this binary.

use std::io::Write;
use std::sync::{Mutex, OnceLock};

use ist_lab::acceptance::{run_criterion, Context};
use ist_lab::exec::Pool;

static SERIAL: Mutex<()> = Mutex::new(());

fn pool() -> &'static Pool {
    static POOL: OnceLock<Pool> = OnceLock::new();
    POOL.get_or_init(|| Pool::new(0).expect("thread pool"))
}

fn criterion(id: usize) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let outcome = run_criterion(id, &Context::new(0, pool()));
    // Written to the process stream directly so the line shows without --nocapture.
    let _ = writeln!(std::io::stderr(), "{}", outcome.line());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn criterion_01_closed_form_scale() {
    criterion(1);
}

#[test]
fn criterion_02_time_varying_scale() {
    criterion(2);
}

#[test]
fn criterion_03_periodic_constant() {
    criterion(3);
}

#[test]
fn criterion_04_law_equivalence() {
    criterion(4);
}

#[test]
fn criterion_05_exit_probabilities() {
    criterion(5);
}

#[test]
fn criterion_06_population_law() {
    criterion(6);
}

#[test]
fn criterion_07_extinction_and_conditioning() {
    criterion(7);
}

#[test]
fn criterion_08_drift_verdicts() {
    criterion(8);
}

#[test]
fn criterion_09_scaling_limit() {
    criterion(9);
}

#[test]
fn criterion_10_invariants() {
    criterion(10);
}
