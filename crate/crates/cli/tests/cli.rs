use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn edl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edl")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SWEEP: &str = r#"{
    "spec": {"seed": 2, "kind": "coupon_collector", "concepts": 10, "k": 3},
    "n_grid": [5, 10, 20],
    "seeds": [0, 1, 2, 3],
    "learner": {"kind": "concept_table"},
    "outputs": {"stem": "coupon"}
}"#;

#[test]
fn sweep_output_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sweep.json", SWEEP);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = edl(&["--threads", threads, "sweep", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["coupon.csv", "coupon_summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let csv = fs::read_to_string(a.join("coupon.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "n,seed,mdl_nats,test_loss_nats,edl_nats,edl_bits_per_example,edl_bits_per_token,oracle_edl_nats,wall_time_ms"
    );
    assert!(csv.lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.json", r#"{"spec": {"seed": 1, "kind": "coupon_collector", "concepts": 4, "k": 2}, "n_grid": [3, 2], "seeds": [0], "learner": {"kind": "kt"}}"#);
    assert_eq!(edl(&["sweep", "--config", &bad]).status.code(), Some(2));
    let mismatch = write(tmp.path(), "mm.json", r#"{"spec": {"seed": 1, "kind": "coupon_collector", "concepts": 4, "k": 2}, "n_grid": [3], "seeds": [0], "learner": {"kind": "bayesian"}}"#);
    assert_eq!(edl(&["sweep", "--config", &mismatch]).status.code(), Some(2));
    assert_eq!(edl(&["sweep", "--config", "/nonexistent/cfg.json"]).status.code(), Some(2));
    let few = write(tmp.path(), "few.json", SWEEP);
    assert_eq!(edl(&["variance", "--config", &few]).status.code(), Some(2));
}

#[test]
fn encode_decode_round_trip_from_files() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = write(tmp.path(), "inputs.json", r#"[{"Token":1},{"Token":2},{"Token":1},{"Token":3},{"Token":2},{"Token":1}]"#);
    let labels = write(tmp.path(), "labels.json", "[0,2,0,1,2,0]");
    let stream = tmp.path().join("labels.edl");
    let s = stream.to_str().unwrap();
    let out = edl(&["encode", "--input", &inputs, "--labels", &labels, "--learner", "concept_table", "--output", s]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(&fs::read(&stream).unwrap()[..4], b"EDL1");
    let out = edl(&["decode", "--input", &inputs, "--learner", "concept_table", "--stream", s]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "[0,2,0,1,2,0]");
    let wrong = edl(&["decode", "--input", &inputs, "--learner", "kt", "--stream", s]);
    assert!(!wrong.status.success());
}

#[test]
fn encode_decode_round_trip_from_toy_record() {
    let tmp = tempfile::tempdir().unwrap();
    let toy = write(
        tmp.path(),
        "toy.json",
        r#"{"spec": {"seed": 5, "kind": "hypothesis_collapse", "m": 16, "k": 4, "input_space_size": 32}, "n": 40}"#,
    );
    let stream = tmp.path().join("toy.edl");
    let s = stream.to_str().unwrap();
    let labels_out = tmp.path().join("decoded.json");
    let out = edl(&["encode", "--config", &toy, "--learner", "bayesian", "--seed", "9", "--freq-bits", "12", "--output", s]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = edl(&["decode", "--config", &toy, "--learner", "bayesian", "--seed", "9", "--stream", s, "--output", labels_out.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let decoded: Vec<usize> = serde_json::from_str(&fs::read_to_string(labels_out).unwrap()).unwrap();
    assert_eq!(decoded.len(), 40);
    let other_seed = edl(&["decode", "--config", &toy, "--learner", "bayesian", "--seed", "10", "--stream", s]);
    assert!(!other_seed.status.success());
}

#[test]
fn study_subcommands_write_json() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let seeds: Vec<String> = (0..100).map(|s| s.to_string()).collect();
    let ordering = write(
        tmp.path(),
        "ordering.json",
        &format!(
            r#"{{"data": {{"source": "toy", "spec": {{"seed": 1, "kind": "random_labels", "k": 3}}, "n": 30, "seed": 0}}, "learner": {{"kind": "kt"}}, "permutation_seeds": [{}]}}"#,
            seeds.join(",")
        ),
    );
    assert!(edl(&["ordering", "--config", &ordering, "--out-dir", dir]).status.success());
    let algdep = write(
        tmp.path(),
        "algdep.json",
        r#"{"data": {"source": "separable", "k": 3, "d": 4, "margin": 0.3, "n": 100, "seed": 4},
            "learner_a": {"kind": "softmax", "learning_rate": 0.5},
            "learner_b": {"kind": "softmax", "learning_rate": 0.05},
            "stopping": {"max_epochs": 3, "patience": 0, "validation_fraction": 0.0}}"#,
    );
    assert!(edl(&["algdep", "--config", &algdep, "--out-dir", dir]).status.success());
    let oracle = write(
        tmp.path(),
        "oracle.json",
        r#"{"spec": {"seed": 1, "kind": "coupon_collector", "concepts": 50, "k": 4}, "learner": {"kind": "concept_table"}, "n_grid": [10, 90, 500]}"#,
    );
    assert!(edl(&["oracle", "--config", &oracle, "--out-dir", dir]).status.success());
    let points: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("study_oracle.json")).unwrap()).unwrap();
    assert_eq!(points.as_array().unwrap().len(), 3);
    let cmp: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("study_algdep.json")).unwrap()).unwrap();
    assert_eq!(cmp["mdl_order"], "less");
    let table: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("study_ordering.json")).unwrap()).unwrap();
    assert_eq!(table["mdl_nats"].as_array().unwrap().len(), 100);
}
