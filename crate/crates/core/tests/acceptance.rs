//! Acceptance suite: one check per criterion, run sequentially so the
//! reported wall times are meaningful. Prints a PASS/FAIL line for each.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are expected to fail (see the
//! project notes); any other failure makes the binary exit non-zero.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use edl_core::codec::{decode_labels, encode_with_state, overhead_bound_bits, CodecConfig};
use edl_core::experiments::{
    algorithm_dependence_study, mean_edl_trajectory, ordering_study, run_sweep, variance_study,
    Evaluation, LearnerConfig, MdlOrder, SeparableTask, SweepConfig, SweepRow,
};
use edl_core::learners::{gradient, LearnerState, Model, SoftmaxRegressionState};
use edl_core::prequential::{
    continue_training, edl, generalization_audit, regret_vs_comparator, run_prequential,
    run_prequential_recording, test_loss, StoppingRule,
};
use edl_core::stats::{mean, median, rng_from, standard_error};
use edl_core::toymodels::{
    coupon_expected_edl_exact, gen_hypothesis_collapse, linear_format_schedule,
    oracle_coupon_edl, scripted_dataset, scripted_learner, FormatTaskParams, MixtureComponent,
    TableStyle, ToyParams, ToySpec, ToyWorld,
};
use edl_core::{codelength, nats_to_bits, Example, Input, LabelSpace, LabeledDataset};
use rand::Rng;

const KNOWN_UNATTAINABLE: &[u32] = &[2, 10];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn seeds(n: u64) -> Vec<u64> {
    (0..n).collect()
}

fn rows_for(rows: &[SweepRow], n: usize) -> Vec<f64> {
    rows.iter().filter(|r| r.n == n).map(|r| r.report.edl_nats).collect()
}

fn labels_dataset(k: usize, n: usize, seed: u64) -> LabeledDataset {
    let mut rng = rng_from(&[seed, 77]);
    LabeledDataset::new(
        (0..n).map(|_| Example::new(Input::Empty, rng.gen_range(0..k))).collect(),
        LabelSpace::new(k).unwrap(),
    )
    .unwrap()
}

fn world_data(spec: &ToySpec, n: usize, seed: u64) -> (ToyWorld, LabeledDataset) {
    let world = spec.build_salted(seed).unwrap();
    let data = world.sample_train(n, &mut rng_from(&[spec.seed, n as u64, seed, 9]));
    (world, data)
}

fn mixture_spec(seed: u64) -> ToySpec {
    let comps = vec![
        MixtureComponent { weight: 0.5, delta_nats: 2f64.ln(), support_tag: 0 },
        MixtureComponent { weight: 0.3, delta_nats: 4f64.ln(), support_tag: 1 },
        MixtureComponent { weight: 0.2, delta_nats: 8f64.ln(), support_tag: 2 },
    ];
    ToySpec::new(
        ToyParams::DisjointMixture { k: 8, components: comps, support_size: 16, trained_component: None },
        seed,
    )
}

/// A learner of every kind with data it can score.
fn any_learner_case(kind: usize, n: usize, seed: u64) -> (LabeledDataset, LearnerState) {
    match kind {
        0 => (labels_dataset(4, n, seed), LearnerState::uniform(4)),
        1 => (labels_dataset(5, n, seed), LearnerState::kt(5)),
        2 => {
            let spec = ToySpec::new(
                ToyParams::HypothesisCollapse { m: 16, k: 4, input_space_size: 32, tables: TableStyle::Balanced },
                seed,
            );
            let (w, d) = world_data(&spec, n, seed);
            (d, w.initial_learner(edl_core::LearnerKind::Bayesian).unwrap())
        }
        3 => {
            let spec = ToySpec::new(ToyParams::CouponCollector { concepts: 30, k: 6 }, seed);
            let (_, d) = world_data(&spec, n, seed);
            (d, LearnerState::concept_table(6))
        }
        4 => {
            let task = SeparableTask::new(3, 5, 0.3, seed).unwrap();
            (task.sample(n, seed), task.learner(0.3).unwrap())
        }
        5 => {
            let mut rng = rng_from(&[seed, 5]);
            let schedule: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..6.0)).collect();
            (scripted_dataset(n), scripted_learner(schedule, 0.25).unwrap())
        }
        6 => {
            let (w, d) = world_data(&mixture_spec(seed), n, seed);
            (d, w.initial_learner(edl_core::LearnerKind::RuleTable).unwrap())
        }
        _ => {
            let spec = ToySpec::new(ToyParams::FormatLearning { concepts: 20, k: 5 }, seed);
            let (_, d) = world_data(&spec, n.div_ceil(2), seed);
            (d, LearnerState::format_kt(5))
        }
    }
}

fn c1_regret_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for run in 0..100u64 {
        let mut rng = rng_from(&[1, run]);
        let n = rng.gen_range(1..=200);
        let (data, initial) = any_learner_case(run as usize % 8, n, run);
        let batch = if run % 3 == 0 { 4 } else { 1 };
        let pass = run_prequential(&data, &initial, batch).unwrap();
        let rule = if run % 2 == 0 { StoppingRule::fixed_budget(3) } else { StoppingRule::default() };
        let theta = continue_training(&pass.final_state, &data, &rule, run).unwrap();
        let mdl: f64 = pass.trace.step_codelengths.iter().sum();
        let direct: f64 = data
            .examples()
            .iter()
            .map(|e| codelength(&theta.predict(&e.input).unwrap(), e.label).unwrap().nats())
            .sum();
        let regret = regret_vs_comparator(&pass.trace, &theta, &data).unwrap();
        worst = worst.max((mdl - direct - regret).abs());
    }
    outcome(worst < 1e-9, format!("max |MDL - sum l(theta*) - R| = {worst:.3e} nats over 100 runs"))
}

fn c2_random_labels() -> Outcome {
    let spec = ToySpec::new(ToyParams::RandomLabels { k: 4, marginal: None }, 2);
    let kt = run_sweep(&SweepConfig::new(spec.clone(), vec![500], seeds(500), LearnerConfig::Kt)).unwrap();
    let e = rows_for(&kt, 500);
    let (m, se) = (mean(&e), standard_error(&e));
    let kt_ok = m.abs() <= 3.0 * se;
    let uni = run_sweep(&SweepConfig::new(spec, vec![500], seeds(500), LearnerConfig::Uniform)).unwrap();
    let uni_ok = uni.iter().all(|r| r.report.edl_nats == 0.0);
    outcome(
        kt_ok && uni_ok,
        format!(
            "KT mean EDL {m:.4} nats, SE {se:.4} (|mean|/SE = {:.1}) [{}]; uniform EDL exactly 0 on all 500 seeds [{}]",
            m.abs() / se,
            if kt_ok { "ok" } else { "fails" },
            if uni_ok { "ok" } else { "fails" }
        ),
    )
}

fn c3_hypothesis_collapse() -> Outcome {
    let (w, diag) = gen_hypothesis_collapse(4, 4, 64, 3).unwrap();
    let world = ToyWorld::Hypothesis(w.clone());
    let data = LabeledDataset::new(vec![diag], LabelSpace::new(4).unwrap()).unwrap();
    let initial = LearnerState::bayesian(w.table.clone());
    let pass = run_prequential(&data, &initial, 1).unwrap();
    let l_final = world.population_loss(&pass.final_state).unwrap();
    let small_report = edl(&pass.trace, l_final, 1, None).unwrap();
    let drop_bits = nats_to_bits(world.population_loss(&initial).unwrap() - l_final);
    let small_ok = small_report.edl_bits == 2.0 && drop_bits == 2.0;

    let (w, _) = gen_hypothesis_collapse(1024, 2, 64, 5).unwrap();
    let world = ToyWorld::Hypothesis(w.clone());
    let seq: Vec<Example> = w.collapse_inputs.clone().unwrap().iter().map(|&x| w.example(x)).collect();
    let data = LabeledDataset::new(seq, LabelSpace::new(2).unwrap()).unwrap();
    let initial = LearnerState::bayesian(w.table.clone());
    let pass = run_prequential(&data, &initial, 1).unwrap();
    let per_step_bits: Vec<f64> = pass.trace.step_codelengths.iter().map(|&c| nats_to_bits(c)).collect();
    let report = edl(&pass.trace, world.population_loss(&pass.final_state).unwrap(), data.len(), None).unwrap();
    let entropy = |s: &LearnerState| match s.model() {
        Model::Bayesian(b) => b.posterior_entropy(),
        _ => unreachable!(),
    };
    let drop = nats_to_bits(entropy(&initial) - entropy(&pass.final_state));
    let large_ok = per_step_bits.iter().all(|&b| b == 1.0)
        && report.edl_bits_per_example <= 1.0
        && drop == 10.0;
    outcome(
        small_ok && large_ok,
        format!(
            "m=k=4: EDL {} bits, population drop {} bits; m=1024,k=2: {} examples at {} bits each, EDL/n {} bits, posterior entropy drop {} bits",
            small_report.edl_bits,
            drop_bits,
            per_step_bits.len(),
            per_step_bits[0],
            report.edl_bits_per_example,
            drop
        ),
    )
}

fn c4_disjoint_mixture() -> Outcome {
    let mut worst: f64 = 0.0;
    for trial in 0..20u64 {
        let mut rng = rng_from(&[4, trial]);
        let parts = rng.gen_range(1..=8usize);
        let raw: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let head: f64 = weights[1..].iter().sum();
        weights[0] = 1.0 - head;
        let comps: Vec<MixtureComponent> = weights
            .iter()
            .enumerate()
            .map(|(j, &w)| MixtureComponent {
                weight: w,
                delta_nats: (rng.gen_range(1..=8u32) as f64).ln(),
                support_tag: 10 + j as u32,
            })
            .collect();
        let spec = ToySpec::new(
            ToyParams::DisjointMixture { k: 8, components: comps.clone(), support_size: 12, trained_component: None },
            trial,
        );
        let world = spec.build().unwrap();
        let ToyWorld::Mixture(mw) = &world else { unreachable!() };
        let mastered: Vec<usize> = (0..parts).filter(|_| rng.gen_bool(0.6)).collect();
        let mut state = mw.learner().unwrap();
        let before = world.population_loss(&state).unwrap();
        for &j in &mastered {
            state.update_in_place(&mw.example(j, rng.gen_range(0..12))).unwrap();
        }
        let gain = before - world.population_loss(&state).unwrap();
        let expected: f64 = mastered.iter().map(|&j| comps[j].weight * comps[j].delta_nats).sum();
        worst = worst.max((gain - expected).abs());
    }
    outcome(worst < 1e-12, format!("max |improvement - sum pi_j Delta_j| = {worst:.3e} over 20 mixtures"))
}

fn c5_coupon() -> Outcome {
    let concepts = 50usize;
    let k = 4usize;
    let delta = (k as f64).ln();
    let spec = ToySpec::new(ToyParams::CouponCollector { concepts, k }, 5);
    let grid = vec![5, 13, 25, 38, 50, 70, 90, 110, 138, 175, 213, 250];
    let rows = run_sweep(&SweepConfig::new(spec.clone(), grid.clone(), seeds(500), LearnerConfig::ConceptTable)).unwrap();
    let mut worst_z: f64 = 0.0;
    let mut worst_n = 0;
    for &n in &grid {
        let e = rows_for(&rows, n);
        let z = (mean(&e) - oracle_coupon_edl(n as f64, concepts as f64, delta)).abs() / standard_error(&e);
        if z > worst_z {
            worst_z = z;
            worst_n = n;
        }
    }
    let grid_ok = worst_z <= 3.0;

    let curve = mean_edl_trajectory(&spec, &LearnerConfig::ConceptTable, 250, &seeds(500)).unwrap();
    let (peak_idx, _) = curve
        .iter()
        .enumerate()
        .map(|(i, (m, _))| (i, m / (i + 1) as f64))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let peak_n = peak_idx + 1;
    let peak_ok = (75..=105).contains(&peak_n);

    let late = run_sweep(&SweepConfig::new(spec, vec![10 * concepts], seeds(500), LearnerConfig::ConceptTable)).unwrap();
    let late_mean = mean(&rows_for(&late, 10 * concepts));
    let late_rel = (late_mean - concepts as f64 * delta).abs() / (concepts as f64 * delta);
    let late_ok = late_rel <= 0.02;
    outcome(
        grid_ok && peak_ok && late_ok,
        format!(
            "worst |mean - oracle|/SE = {worst_z:.2} at n={worst_n}; EDL/n peak at n={peak_n}; EDL(10K) off K*Delta by {:.3}%",
            100.0 * late_rel
        ),
    )
}

fn c6_format() -> Outcome {
    let p = FormatTaskParams::new(10.0, 100.0, 1.0, 3.0).unwrap();
    let slope = p.format_loss0 / p.n_format + p.capability_loss0 / p.n_capability;
    let mut worst: f64 = 0.0;
    for n in 1..10usize {
        // Regime 1 under the first-epoch approximation MDL ≈ n·L_total.
        let schedule = vec![p.format_loss0 + p.capability_loss0; n];
        let learner = scripted_learner(schedule, p.linear_test_loss(n as f64)).unwrap();
        let data = scripted_dataset(n);
        let pass = run_prequential(&data, &learner, 1).unwrap();
        let l = test_loss(&pass.final_state, &scripted_dataset(1)).unwrap();
        let e = edl(&pass.trace, l, n, None).unwrap().edl_nats;
        worst = worst.max((e - n as f64 * n as f64 * slope).abs());
    }
    for n in [101usize, 150, 400] {
        let learner = scripted_learner(linear_format_schedule(n, &p), 0.0).unwrap();
        let data = scripted_dataset(n);
        let pass = run_prequential(&data, &learner, 1).unwrap();
        let l = test_loss(&pass.final_state, &scripted_dataset(1)).unwrap();
        let e = edl(&pass.trace, l, n, None).unwrap().edl_nats;
        worst = worst.max((e - 155.0).abs());
    }
    let scripted_ok = worst < 1e-9;

    let spec = ToySpec::new(ToyParams::FormatLearning { concepts: 100, k: 16 }, 6);
    let grid = vec![5, 50, 400, 3000];
    let rows = run_sweep(&SweepConfig::new(spec, grid.clone(), seeds(200), LearnerConfig::FormatKt)).unwrap();
    let per: Vec<f64> = grid.iter().map(|&n| mean(&rows_for(&rows, n)) / n as f64).collect();
    let shape_ok = per[0] > per[1] && per[1] < per[2] && per[2] > per[3];
    outcome(
        scripted_ok && shape_ok,
        format!(
            "scripted closed forms max error {worst:.2e} nats; two-component KT mean EDL/n at n={grid:?}: {:?}",
            per.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn c7_codec() -> Outcome {
    use rayon::prelude::*;
    let config = CodecConfig::default();
    let failures: Vec<String> = (0..10_000u64)
        .into_par_iter()
        .filter_map(|trial| {
            let mut rng = rng_from(&[7, trial]);
            let n = rng.gen_range(0..=1000);
            let (data, initial) = any_learner_case(trial as usize % 8, n, trial);
            let (stream, sent) = encode_with_state(&data, &initial, &config).unwrap();
            let (labels, got) = decode_labels(&data.inputs(), &stream, &initial).unwrap();
            if labels != data.labels() || got.to_canonical_bytes() != sent.to_canonical_bytes() {
                return Some(format!("trial {trial}: round trip mismatch"));
            }
            let ideal = nats_to_bits(run_prequential(&data, &initial, 1).unwrap().trace.mdl());
            let gap = stream.payload_bits as f64 - ideal;
            if gap > overhead_bound_bits(data.len(), data.k(), 16) {
                return Some(format!("trial {trial}: gap {gap} bits"));
            }
            None
        })
        .collect();
    let mut ratios = Vec::new();
    for k in 2..=16usize {
        for seed in 0..4u64 {
            for initial in [LearnerState::kt(k), LearnerState::uniform(k)] {
                let data = labels_dataset(k, 1000, 100 * k as u64 + seed);
                let (stream, _) = encode_with_state(&data, &initial, &config).unwrap();
                let ideal = nats_to_bits(run_prequential(&data, &initial, 1).unwrap().trace.mdl());
                ratios.push(stream.payload_bits as f64 / ideal);
            }
        }
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ratio_ok = lo >= 0.99 && hi <= 1.01;
    outcome(
        failures.is_empty() && ratio_ok,
        format!(
            "{} of 10000 fuzz trials failed{}; payload/ideal at n=1000, k=2..16 in [{lo:.5}, {hi:.5}]",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn perturbed_spec() -> ToySpec {
    ToySpec::new(
        ToyParams::HypothesisCollapse { m: 240, k: 4, input_space_size: 4096, tables: TableStyle::Perturbed },
        8,
    )
}

fn matched_pairs() -> Vec<(&'static str, ToySpec, LearnerConfig, usize)> {
    vec![
        ("random labels / kt", ToySpec::new(ToyParams::RandomLabels { k: 4, marginal: None }, 9), LearnerConfig::Kt, 100),
        (
            "skewed labels / kt",
            ToySpec::new(ToyParams::RandomLabels { k: 3, marginal: Some(vec![0.6, 0.3, 0.1]) }, 9),
            LearnerConfig::Kt,
            100,
        ),
        ("random labels / uniform", ToySpec::new(ToyParams::RandomLabels { k: 4, marginal: None }, 9), LearnerConfig::Uniform, 100),
        (
            "hypothesis (balanced) / bayesian",
            ToySpec::new(ToyParams::HypothesisCollapse { m: 64, k: 4, input_space_size: 64, tables: TableStyle::Balanced }, 9),
            LearnerConfig::Bayesian,
            4,
        ),
        ("hypothesis (perturbed) / bayesian", perturbed_spec(), LearnerConfig::Bayesian, 64),
        ("coupon / concept_table", ToySpec::new(ToyParams::CouponCollector { concepts: 50, k: 4 }, 9), LearnerConfig::ConceptTable, 60),
        ("mixture / rule_table", mixture_spec(9), LearnerConfig::RuleTable, 6),
        ("format / format_kt", ToySpec::new(ToyParams::FormatLearning { concepts: 40, k: 8 }, 9), LearnerConfig::FormatKt, 50),
    ]
}

fn c8_sdl() -> Outcome {
    let mut violations = 0;
    let mut runs = 0;
    for (_, spec, learner, n) in matched_pairs() {
        let rows = run_sweep(&SweepConfig::new(spec, vec![n], seeds(50), learner)).unwrap();
        for r in rows {
            runs += 1;
            if r.report.edl_nats > r.report.sdl_nats.unwrap() + 1e-9 {
                violations += 1;
            }
        }
    }
    let grid = vec![64, 256, 1024];
    let rows = run_sweep(&SweepConfig::new(perturbed_spec(), grid.clone(), seeds(50), LearnerConfig::Bayesian)).unwrap();
    let medians: Vec<f64> = grid
        .iter()
        .map(|&n| {
            let gaps: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n)
                .map(|r| (r.report.edl_nats - r.report.sdl_nats.unwrap()).abs() / n as f64)
                .collect();
            median(&gaps)
        })
        .collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    outcome(
        violations == 0 && decreasing,
        format!(
            "{violations} EDL > SDL violations in {runs} runs; median |EDL - SDL|/n at n={grid:?}: {:?}",
            medians.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn c9_nonnegativity_and_audit() -> Outcome {
    let mut worst_z = f64::INFINITY;
    let mut worst_name = "";
    for (name, spec, learner, n) in matched_pairs() {
        let rows = run_sweep(&SweepConfig::new(spec, vec![n], seeds(200), learner)).unwrap();
        let e = rows_for(&rows, n);
        let se = standard_error(&e);
        let z = if se > 0.0 { mean(&e) / se } else if mean(&e) >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        if z < worst_z {
            worst_z = z;
            worst_name = name;
        }
    }
    let nonneg_ok = worst_z >= -3.0;

    let (concepts, n, k) = (10usize, 30usize, 4usize);
    let delta = (k as f64).ln();
    let spec = ToySpec::new(ToyParams::CouponCollector { concepts, k }, 19);
    let mut edls = Vec::new();
    let mut audits = Vec::new();
    for seed in 0..500u64 {
        let (world, data) = world_data(&spec, n, seed);
        let pass = run_prequential_recording(&data, &LearnerState::concept_table(k), 1).unwrap();
        let loss = world.population_loss(&pass.final_state).unwrap();
        edls.push(edl(&pass.trace, loss, n, None).unwrap().edl_nats);
        let audit = generalization_audit(pass.states.as_ref().unwrap(), &pass.final_state, &world).unwrap();
        audits.push(audit.predicted_edl);
    }
    let predicted = coupon_expected_edl_exact(concepts, n, delta);
    let z_audit = (mean(&edls) - predicted).abs() / standard_error(&edls);
    let audit_ok = z_audit <= 3.0;
    outcome(
        nonneg_ok && audit_ok,
        format!(
            "lowest mean/SE over 8 matched pairs: {worst_z:.2} ({worst_name}); coupon K=10 n=30: MC mean EDL {:.4} vs n(Lbar - L*) = {predicted:.4} (z = {z_audit:.2}), realized audit mean {:.4}",
            mean(&edls),
            mean(&audits)
        ),
    )
}

fn c10_variance() -> Outcome {
    let spec = ToySpec::new(ToyParams::RandomLabels { k: 4, marginal: None }, 10);
    let table = variance_study(&SweepConfig::new(spec, vec![250, 500, 1000], seeds(200), LearnerConfig::Kt)).unwrap();
    let ratios: Vec<f64> = table.ratios.iter().map(|r| r.unwrap_or(f64::NAN)).collect();
    let ok = ratios.iter().all(|r| (1.3..=3.0).contains(r));
    outcome(
        ok,
        format!(
            "Var(EDL) at n=250/500/1000: {:?}; ratios {:?}",
            table.rows.iter().map(|r| format!("{:.3}", r.variance)).collect::<Vec<_>>(),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn c11_ordering() -> Outcome {
    let task = SeparableTask::new(3, 5, 0.3, 11).unwrap();
    let data = task.sample(200, 11);
    let perms: Vec<u64> = (1000..1200).collect();
    let sgd = ordering_study(&data, &task.learner(0.5).unwrap(), &perms).unwrap();
    let sgd_ok = sgd.half_difference() < 3.0 * sgd.pooled_se;
    let kt = ordering_study(&labels_dataset(4, 200, 11), &LearnerState::kt(4), &perms).unwrap();
    let kt_ok = kt.spread() == 0.0;
    outcome(
        sgd_ok && kt_ok,
        format!(
            "SGD half-mean gap {:.4} vs 3*pooled SE {:.4}; KT MDL spread across permutations {:.3e} nats",
            sgd.half_difference(),
            3.0 * sgd.pooled_se,
            kt.spread()
        ),
    )
}

fn c12_algorithm_dependence() -> Outcome {
    let task = SeparableTask::new(3, 5, 0.3, 12).unwrap();
    let data = task.sample(300, 12);
    let test = task.sample(2000, 13);
    let eta = 0.5;
    let cmp = algorithm_dependence_study(
        &data,
        &task.learner(eta).unwrap(),
        &task.learner(eta / 10.0).unwrap(),
        &StoppingRule::fixed_budget(5),
        12,
        Evaluation::HeldOut(&test),
    )
    .unwrap();
    outcome(
        cmp.mdl_order == MdlOrder::Less,
        format!(
            "MDL(eta={eta}) = {:.2} nats, MDL(eta/10) = {:.2} nats; EDL {:.2} vs {:.2}",
            cmp.a.mdl_nats, cmp.a_prime.mdl_nats, cmp.a.edl_nats, cmp.a_prime.edl_nats
        ),
    )
}

fn c13_gradient() -> Outcome {
    let mut worst: f64 = 0.0;
    for point in 0..100u64 {
        let mut rng = rng_from(&[13, point]);
        let k = rng.gen_range(2..=6usize);
        let d = rng.gen_range(1..=6usize);
        let mut s = SoftmaxRegressionState::zeros(k, d, 0.1).unwrap();
        s.weights.iter_mut().for_each(|w| *w = rng.gen_range(-2.0..2.0));
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y = rng.gen_range(0..k);
        let ex = Example::new(Input::Features(x.clone()), y);
        let analytic = gradient(&s, &ex).unwrap();
        // Cross-entropy by log-sum-exp, independent of the learner code.
        let loss = |w: &[f64]| {
            let logits: Vec<f64> = w.chunks(d).map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln() - logits[y]
        };
        let h = 1e-5;
        let numeric: Vec<f64> = (0..k * d)
            .map(|i| {
                let mut up = s.weights.clone();
                let mut dn = s.weights.clone();
                up[i] += h;
                dn[i] -= h;
                (loss(&up) - loss(&dn)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
        worst = worst.max(if scale > 1e-8 { diff / scale } else { diff });
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.3e} over 100 random points"))
}

fn main() {
    let criteria: Vec<(u32, &str, u64, fn() -> Outcome)> = vec![
        (1, "regret identity", 10, c1_regret_identity),
        (2, "random labels", 30, c2_random_labels),
        (3, "hypothesis collapse", 1, c3_hypothesis_collapse),
        (4, "disjoint mixture", 5, c4_disjoint_mixture),
        (5, "coupon collector", 120, c5_coupon),
        (6, "format learning", 30, c6_format),
        (7, "codec", 120, c7_codec),
        (8, "SDL relation", 60, c8_sdl),
        (9, "non-negativity and generalization audit", 120, c9_nonnegativity_and_audit),
        (10, "variance scaling", 60, c10_variance),
        (11, "ordering invariance", 60, c11_ordering),
        (12, "algorithm dependence", 30, c12_algorithm_dependence),
        (13, "gradient correctness", 5, c13_gradient),
    ];
    let mut unexpected = Vec::new();
    let mut results = BTreeMap::new();
    for (id, title, budget, check) in criteria {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = out.pass && in_time;
        println!(
            "criterion {id:>2} {}: {title}: {} [{:.2}s of {budget}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
        let expected_fail = KNOWN_UNATTAINABLE.contains(&id);
        if !pass && !expected_fail {
            unexpected.push(id);
        }
        if pass && expected_fail {
            println!("criterion {id:>2} note: listed as unattainable but passed");
        }
        results.insert(id, pass);
    }
    let passed = results.values().filter(|p| **p).count();
    println!(
        "acceptance: {passed}/{} passed; failing: {:?}; documented as unattainable: {KNOWN_UNATTAINABLE:?}",
        results.len(),
        results.iter().filter(|(_, p)| !**p).map(|(id, _)| *id).collect::<Vec<_>>()
    );
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
