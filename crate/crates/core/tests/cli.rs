use std::process::{Command, Output};

use steerbound::assemblage::{chsh_reference, Assemblage};

fn steerbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steerbound")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bound_curve_last_row_reaches_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let o = steerbound(&["bound-curve", "--beta-min", "2", "--beta-max", "2.8284271", "--points", "200", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("beta,analytic_lower,eq8_upper,trivial_fc"));
    assert_eq!(csv.lines().count(), 201);
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert!((last[1] - 1.0).abs() < 1e-6);
    assert!((last[3] - 0.853553391).abs() < 1e-9);
}

#[test]
fn bound_curve_is_deterministic() {
    let a = steerbound(&["bound-curve", "--points", "17"]);
    let b = steerbound(&["bound-curve", "--points", "17"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn classical_fidelity_of_chsh() {
    let o = steerbound(&["classical-fidelity", "--assemblage", "chsh"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let v: f64 = text.lines().next().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((v - 0.853553).abs() < 1e-6);
    assert!(text.contains("strategy"));
}

#[test]
fn verify_inequality_optimal_passes() {
    let o = steerbound(&["verify-inequality", "--theta-points", "10000", "--s", "optimal"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("worst margin")).unwrap().to_string();
    let margin: f64 = line.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(margin >= -1e-10);
}

#[test]
fn verify_inequality_reports_failures() {
    // s above the optimum with fixed t: the sharp operators go negative
    let o = steerbound(&["verify-inequality", "--theta-points", "200", "--s", "0.9", "--t0-t1-rule", "fixed:0.3,0.3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("failing angles"));
}

#[test]
fn coefficient_search_prints_optimum() {
    let o = steerbound(&["coefficient-search", "--s-points", "128", "--theta-points", "2000"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let s: f64 = text.lines().next().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((s - 0.6035533906).abs() < 1e-2);
}

#[test]
fn realize_then_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sigma.json");
    let o = steerbound(&["realize", "--state", "phi-plus", "--measurements", "Z,X", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let sigma = Assemblage::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for (a, b) in sigma.elements().iter().zip(chsh_reference().elements()) {
        assert!(a.max_abs_diff(b) < 1e-12);
    }
    let v = steerbound(&["validate", "--assemblage", path.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
    let cf = steerbound(&["classical-fidelity", "--assemblage", path.to_str().unwrap()]);
    assert_eq!(cf.status.code(), Some(0));
}

#[test]
fn validate_rejects_signaling_assemblage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = r#"{"outcomes":2,"settings":2,"elements":[
        {"a":0,"x":0,"re":[[0.5,0],[0,0]],"im":[[0,0],[0,0]]},
        {"a":1,"x":0,"re":[[0,0],[0,0.5]],"im":[[0,0],[0,0]]},
        {"a":0,"x":1,"re":[[1,0],[0,0]],"im":[[0,0],[0,0]]},
        {"a":1,"x":1,"re":[[0,0],[0,0]],"im":[[0,0],[0,0]]}]}"#;
    assert!(Assemblage::from_json(text).is_ok());
    std::fs::write(&path, text).unwrap();
    let o = steerbound(&["validate", "--assemblage", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("invalid"));
}

#[test]
fn sandwich_writes_reports_and_honors_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"samples": 2, "beta_targets": [2.5], "channel_family": "dephasing-only", "seesaw_rounds": 1, "rng_seed": 3, "tolerance": 1e-4, "max_evals": 200}"#,
    )
    .unwrap();
    let run = |seed: &str, tag: &str| {
        let json = dir.path().join(format!("{tag}.json"));
        let csv = dir.path().join(format!("{tag}.csv"));
        let o = Command::new(env!("CARGO_BIN_EXE_steerbound"))
            .env("STEERBOUND_SEED", seed)
            .args(["sandwich", "--config", cfg.to_str().unwrap(), "--json-out", json.to_str().unwrap(), "--csv-out", csv.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(matches!(o.status.code(), Some(0) | Some(1)));
        (std::fs::read_to_string(json).unwrap(), std::fs::read_to_string(csv).unwrap())
    };
    let (j1, c1) = run("11", "a");
    let (j2, c2) = run("11", "b");
    assert_eq!(j1, j2);
    assert_eq!(c1, c2);
    assert!(c1.starts_with("beta,numeric_min,analytic_lower,eq8_upper,residual,restarts_used"));
    assert!(j1.contains("\"rng_seed\": 11"));
    let bad = Command::new(env!("CARGO_BIN_EXE_steerbound"))
        .env("STEERBOUND_SEED", "not-a-number")
        .args(["sandwich", "--config", cfg.to_str().unwrap()])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn usage_and_failure_exit_codes() {
    assert_eq!(steerbound(&[]).status.code(), Some(2));
    assert_eq!(steerbound(&["nope"]).status.code(), Some(2));
    assert_eq!(steerbound(&["validate"]).status.code(), Some(2));
    assert_eq!(steerbound(&["bound-curve", "--points", "x"]).status.code(), Some(2));
    assert_eq!(steerbound(&["realize", "--measurements", "Q"]).status.code(), Some(2));
    assert_eq!(steerbound(&["validate", "--assemblage", "/no/such/file.json"]).status.code(), Some(1));
    assert_eq!(steerbound(&["--help"]).status.code(), Some(0));
}
