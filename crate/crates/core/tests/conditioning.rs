use ist_core::conditioning::{
    compare_summaries, condition_params, rejection_filtered, simulate_conditioned,
    ConditionedRunOptions, ConditioningEvent, ConditioningGrid, Harmonic, HarmonicOptions,
};
use ist_core::model::Model;
use ist_core::replicas::Sequential;

fn cross_check(event: ConditioningEvent, grid: ConditioningGrid, n: usize) {
    let m = Model::markov(2.0, 1.0).unwrap();
    let h = Harmonic::for_event(&m, event, HarmonicOptions::default()).unwrap();
    let params = condition_params(&m, h, grid).unwrap();
    assert!(params.normalization_error() < 1e-8);
    let opts = ConditionedRunOptions::new(1e4, 30.0, 0.5);
    let cond = simulate_conditioned(&params, 1.0, opts, n, 11, &Sequential).unwrap();
    assert_eq!(cond.absorbed, n);
    let base = rejection_filtered(&m, event, 1.0, opts, n, 20 * n, 12, &Sequential).unwrap();
    assert_eq!(base.summaries.len(), n);
    let cmp = compare_summaries(&cond.summaries, &base.summaries).unwrap();
    assert!(cmp.passes(0.01), "{cmp:?}");
}

#[test]
fn extinction_conditioning_matches_rejection_filter() {
    cross_check(
        ConditioningEvent::Extinction,
        ConditioningGrid::new(0.0, 12.0, 241),
        4000,
    );
}

#[test]
fn height_conditioning_matches_rejection_filter() {
    cross_check(
        ConditioningEvent::HeightAtMost(5.0),
        ConditioningGrid::new(0.0, 5.0, 321),
        4000,
    );
}
