use edl_core::experiments::{
    emit_results, population_monotonicity_probe, run_sweep, LearnerConfig, OutputFormat,
    SweepConfig,
};
use edl_core::stats::mean;
use edl_core::toymodels::{ToyParams, ToySpec};
use edl_core::StoppingRule;

fn coupon_sweep() -> SweepConfig {
    SweepConfig::new(
        ToySpec::new(ToyParams::CouponCollector { concepts: 12, k: 3 }, 4),
        vec![5, 20, 40],
        (0..16).collect(),
        LearnerConfig::ConceptTable,
    )
}

#[test]
fn sweeps_are_reproducible_across_thread_counts() {
    let cfg = coupon_sweep();
    let one = edl_core::experiments::with_threads(Some(1), || run_sweep(&cfg)).unwrap().unwrap();
    let four = edl_core::experiments::with_threads(Some(4), || run_sweep(&cfg)).unwrap().unwrap();
    assert_eq!(one, four);
    assert_eq!(one.len(), 48);
    assert!(one.windows(2).all(|w| (w[0].n, w[0].seed) < (w[1].n, w[1].seed)));
}

#[test]
fn emitted_files_are_byte_identical() {
    let rows = run_sweep(&coupon_sweep()).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for format in [OutputFormat::Csv, OutputFormat::Json] {
        let pa = emit_results(&rows, a.path(), "run", format).unwrap();
        let pb = emit_results(&rows, b.path(), "run", format).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }
    let csv = std::fs::read_to_string(a.path().join("run.csv")).unwrap();
    assert!(csv.starts_with("n,seed,mdl_nats"));
    assert_eq!(csv.lines().count(), 49);
}

#[test]
fn config_round_trips_through_json() {
    let text = r#"{
        "spec": {"seed": 3, "kind": "random_labels", "k": 4},
        "n_grid": [10, 20],
        "seeds": [0, 1, 2],
        "learner": {"kind": "kt"},
        "stopping": {"max_epochs": 3, "patience": 0, "validation_fraction": 0.0}
    }"#;
    let cfg = SweepConfig::from_json(text).unwrap();
    assert_eq!(cfg.stopping, StoppingRule::fixed_budget(3));
    assert_eq!(run_sweep(&cfg).unwrap().len(), 6);
    assert!(SweepConfig::from_json(r#"{"spec": {"seed": 1, "kind": "nope"}}"#).is_err());
}

#[test]
fn kt_updates_do_not_raise_population_loss_on_average() {
    let spec = ToySpec::new(ToyParams::RandomLabels { k: 3, marginal: Some(vec![0.7, 0.2, 0.1]) }, 8);
    let deltas = population_monotonicity_probe(&spec, &LearnerConfig::Kt, 30, &(0..400).collect::<Vec<_>>()).unwrap();
    for d in &deltas {
        assert!(d.mean_delta <= 3.0 * d.se + 1e-12, "step {} rose by {}", d.step, d.mean_delta);
    }
    let early: Vec<f64> = deltas[..5].iter().map(|d| d.mean_delta).collect();
    assert!(mean(&early) < 0.0);
}

#[test]
fn mismatched_learner_is_a_config_error() {
    let cfg = SweepConfig::new(
        ToySpec::new(ToyParams::CouponCollector { concepts: 5, k: 2 }, 1),
        vec![4],
        vec![0],
        LearnerConfig::Bayesian,
    );
    assert!(matches!(run_sweep(&cfg), Err(edl_core::EdlError::Config(_))));
}

#[test]
fn elicitation_edl_per_example_does_not_grow() {
    use edl_core::toymodels::TableStyle;
    let spec = ToySpec::new(
        ToyParams::HypothesisCollapse { m: 16, k: 4, input_space_size: 16, tables: TableStyle::Balanced },
        2,
    );
    let rows = run_sweep(&SweepConfig::new(spec, vec![1, 2, 4, 8], (0..200).collect(), LearnerConfig::Bayesian)).unwrap();
    let per: Vec<f64> = edl_core::experiments::summarize(&rows).iter().map(|s| s.mean_edl_nats / s.n as f64).collect();
    assert!(per.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{per:?}");
}

#[test]
fn oracle_learner_has_no_edl_variance() {
    let cfg = SweepConfig::new(
        ToySpec::new(ToyParams::CouponCollector { concepts: 8, k: 3 }, 1),
        vec![10, 20, 40],
        (0..100).collect(),
        LearnerConfig::Oracle,
    );
    let table = edl_core::experiments::variance_study(&cfg).unwrap();
    assert!(table.rows.iter().all(|r| r.variance == 0.0));
}

#[test]
fn sorted_order_changes_sgd_mdl() {
    use edl_core::experiments::SeparableTask;
    use edl_core::prequential::run_prequential;
    let task = SeparableTask::new(3, 4, 0.3, 5).unwrap();
    let data = task.sample(120, 5);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by_key(|&i| data.examples()[i].label);
    let sorted = data.permuted(&order).unwrap();
    order.reverse();
    let reversed = data.permuted(&order).unwrap();
    let learner = task.learner(0.5).unwrap();
    let a = run_prequential(&sorted, &learner, 1).unwrap().trace.mdl();
    let b = run_prequential(&reversed, &learner, 1).unwrap().trace.mdl();
    assert_ne!(a, b);
}

#[test]
fn bayesian_absorbs_more_than_kt_when_realizable() {
    use edl_core::toymodels::TableStyle;
    let spec = ToySpec::new(
        ToyParams::HypothesisCollapse { m: 16, k: 4, input_space_size: 16, tables: TableStyle::Balanced },
        3,
    );
    for n in [4, 16, 32] {
        let bay = run_sweep(&SweepConfig::new(spec.clone(), vec![n], (0..100).collect(), LearnerConfig::Bayesian)).unwrap();
        let kt = run_sweep(&SweepConfig::new(spec.clone(), vec![n], (0..100).collect(), LearnerConfig::Kt)).unwrap();
        let m = |rows: &[edl_core::experiments::SweepRow]| mean(&rows.iter().map(|r| r.report.edl_nats).collect::<Vec<_>>());
        assert!(m(&bay) >= m(&kt), "n={n}: {} < {}", m(&bay), m(&kt));
    }
}
