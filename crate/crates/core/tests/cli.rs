use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "density": {"family": "gaussian"},
  "entropic": {"n_r": 12, "n_ang": 24, "epsilons": [0.1, 0.03, 0.01]},
  "diagnostics": {"pushforward_samples": 500, "monotonicity_pairs": 500,
                  "injectivity_points": 50, "roundtrip_probes": 100},
  "seed": 4
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_centerward"))
        .args(args)
        .current_dir(dir)
        .env_remove("CENTERWARD_THREADS")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn setup(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), config).unwrap();
    dir
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_writes_stamped_artifacts() {
    let dir = setup(SMALL);
    let p = dir.path();
    assert_eq!(code(&run(p, &["solve", "run.json"])), 0);
    for f in ["config.json", "solution.json", "map.json", "solve.log"] {
        assert!(p.join("out").join(f).exists(), "{f}");
    }
    let hash = json(&p.join("out/solution.json"))["config_hash"].clone();
    assert_eq!(hash.as_str().unwrap().len(), 64);
    assert_eq!(json(&p.join("out/map.json"))["config_hash"], hash);

    let c = run(p, &["contours", "run.json", "--radii", "0.6", "0.3"]);
    assert_eq!(code(&c), 0, "{}", stderr(&c));
    let contour = json(&p.join("out/contour_r0.3000.json"));
    assert_eq!(contour["M"], 256);
    assert_eq!(contour["vertices"].as_array().unwrap().len(), 256);
    assert_eq!(json(&p.join("out/nestedness.json"))["pass"], true);
    assert!(json(&p.join("out/k_estimate.json"))["diameters"].is_array());

    let v = run(p, &["verify", "run.json"]);
    let report = json(&p.join("out/report.json"));
    assert_eq!(report["config_hash"], hash);
    assert_eq!(code(&v) == 0, report["pass"] == true);

    assert_eq!(code(&run(p, &["oracle-compare", "run.json"])), 0);
    let csv = std::fs::read_to_string(p.join("out/oracle.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with('#'));
    assert_eq!(
        lines.next().unwrap(),
        "r,oracle,mean_radius,max_deviation,rel_error"
    );
    assert_eq!(lines.count(), 17);
    assert!(!p.join("out/.centerward.lock").exists());
}

#[test]
fn global_flags_override_the_config() {
    let dir = setup(SMALL);
    let p = dir.path();
    let o = run(
        p,
        &[
            "--config",
            "run.json",
            "--out",
            "elsewhere",
            "--seed",
            "9",
            "--threads",
            "1",
            "solve",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&p.join("elsewhere/config.json"))["seed"], 9);
}

#[test]
fn semidiscrete_pipeline() {
    let dir = setup(
        r#"{"density": {"family": "banana"}, "backend": "semidiscrete",
            "seed": 1}"#,
    );
    let p = dir.path();
    assert_eq!(code(&run(p, &["solve", "run.json"])), 0);
    let diagram = json(&p.join("out/diagram.json"));
    assert_eq!(diagram["psi"].as_array().unwrap().len(), 512);
    assert_eq!(code(&run(p, &["verify", "run.json"])), 0);
    let o = run(p, &["verify", "run.json", "--corrupt-psi"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("pushforward"));
}

#[test]
fn csv_target() {
    let dir = setup(
        r#"{"density": {"csv": "pts.csv"}, "backend": "semidiscrete", "semidiscrete": {"atoms": 4}}"#,
    );
    std::fs::write(
        dir.path().join("pts.csv"),
        "y1,y2,weight\n1,0,1\n0,1,1\n-1,0,1\n0,-1,2\n",
    )
    .unwrap();
    // Four atoms are far too coarse for the KS bound; only the plumbing is checked.
    let v = run(dir.path(), &["verify", "run.json", "--inline"]);
    let report = json(&dir.path().join("out/report.json"));
    assert_eq!(code(&v) == 0, report["pass"] == true);
    assert_eq!(report["checks"][2]["name"], "pushforward.max_norm");
    assert_eq!(report["checks"][2]["pass"], true);
    let o = run(dir.path(), &["oracle-compare", "run.json", "--inline"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("oracle requires radial density"));
}

#[test]
fn convergence_failure_exits_3() {
    let dir = setup(
        r#"{"density": {"family": "gaussian"}, "entropic": {"n_r": 8, "n_ang": 16, "max_iter": 1}}"#,
    );
    assert_eq!(code(&run(dir.path(), &["solve", "run.json"])), 3);
    assert!(std::fs::read_to_string(dir.path().join("out/solve.log"))
        .unwrap()
        .contains("failed"));
}

#[test]
fn usage_and_config_errors_exit_1() {
    let dir = setup(SMALL);
    let p = dir.path();
    assert_eq!(code(&run(p, &["--help"])), 0);
    assert_eq!(code(&run(p, &["bogus"])), 1);
    assert_eq!(code(&run(p, &["solve"])), 1);
    assert_eq!(code(&run(p, &["solve", "missing.json"])), 1);

    let o = run(p, &["verify", "run.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("solve"));

    let o = run(
        p,
        &["contours", "run.json", "--inline", "--radii", "0.5", "1.5"],
    );
    assert_eq!(code(&o), 1);

    std::fs::write(
        p.join("bad.json"),
        "{\n  \"density\": {\"family\": \"gaussian\"},\n  \"sed\": 1\n}",
    )
    .unwrap();
    let o = run(p, &["solve", "bad.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bad.json:3"), "{}", stderr(&o));

    std::fs::write(
        p.join("neg.json"),
        "{\n  \"density\": {\"family\": \"gaussian\"},\n  \"entropic\": {\"n_r\": 0}\n}",
    )
    .unwrap();
    let o = run(p, &["solve", "neg.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("entropic.n_r"), "{}", stderr(&o));

    let o = run(p, &["--threads", "0", "solve", "run.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn stale_solution_and_lock_are_rejected() {
    let dir = setup(SMALL);
    let p = dir.path();
    assert_eq!(code(&run(p, &["solve", "run.json"])), 0);
    let o = run(p, &["--seed", "5", "verify", "run.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("different configuration"));

    std::fs::write(p.join("out/.centerward.lock"), "").unwrap();
    let o = run(p, &["verify", "run.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("locked"));
}
