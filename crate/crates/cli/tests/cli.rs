use std::path::Path;
use std::process::{Command, Output};

fn wavefront(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavefront")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exported_problem_files_reparse_identically() {
    let dir = tempfile::tempdir().unwrap();
    for preset in ["ex51", "ex52", "ex52n", "ex53a", "ex53b"] {
        let first = format!("{preset}.json");
        assert_eq!(code(&wavefront(&["export", "--preset", preset, "--out", &first], dir.path())), 0);
        let again = wavefront(&["export", "--problem", &first], dir.path());
        assert_eq!(code(&again), 0);
        assert_eq!(again.stdout, std::fs::read(dir.path().join(&first)).unwrap(), "{preset}");
    }
}

#[test]
fn decimal_and_fraction_spellings_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = r#"{"f":{"pieces":[["0"]]},"g":{"pieces":[["0","1","-1"]]},"D":{"pieces":[["-1/2","1"]]}}"#;
    let b = r#"{"f":{"pieces":[["0.0"]]},"g":{"pieces":[["0","1.0","-1"]]},"d":{"pieces":[["-0.5","10e-1"]]}}"#;
    std::fs::write(dir.path().join("a.json"), a).unwrap();
    std::fs::write(dir.path().join("b.json"), b).unwrap();
    let ea = wavefront(&["export", "--problem", "a.json"], dir.path());
    let eb = wavefront(&["export", "--problem", "b.json"], dir.path());
    assert_eq!(code(&ea), 0);
    assert_eq!(ea.stdout, eb.stdout);
}

#[test]
fn solve_writes_landmarks_and_passes_verification() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&wavefront(&["export", "--preset", "ex51", "--out", "ex51.json"], dir.path())), 0);
    let o = wavefront(&["solve", "--problem", "ex51.json", "--speed", "0", "--out", "prof.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let side = json(&dir.path().join("prof.json"));
    let lm = &side["landmarks"];
    let near = |v: &serde_json::Value, x: f64| (v.as_f64().unwrap() - x).abs() < 1e-4;
    assert!(near(&lm["xi_one"], -5.0 / 32.0));
    assert!(near(&lm["junctions"][0]["xi"], -1.0 / 32.0));
    assert!(near(&lm["xi_zero"], 3.0 / 32.0));
    let csv = std::fs::read_to_string(dir.path().join("prof.csv")).unwrap();
    assert!(csv.starts_with("xi,phi,z,label\n"));
    for label in ["one", "alpha", "zero"] {
        assert_eq!(csv.lines().filter(|l| l.ends_with(&format!(",{label}"))).count(), 1, "{label}");
    }
    let v = wavefront(&["verify", "--profile", "prof.json"], dir.path());
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
    let out: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
    assert!(out["report"]["max_relative"].as_f64().unwrap() < 1e-6);
    assert_eq!(out["report"]["entries"].as_array().unwrap().len(), 20);
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a.csv", "b.csv"] {
        assert_eq!(code(&wavefront(&["solve", "--preset", "ex53b", "--out", out], dir.path())), 0);
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.json"), read("b.json"));
}

#[test]
fn exit_codes_separate_domain_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let below = wavefront(&["solve", "--preset", "ex51", "--speed", "-1"], dir.path());
    assert_eq!(code(&below), 1);
    assert!(String::from_utf8_lossy(&below.stderr).contains("below the critical speed"));

    std::fs::write(dir.path().join("bad.json"), "{\"f\": ").unwrap();
    assert_eq!(code(&wavefront(&["classify", "--problem", "bad.json"], dir.path())), 2);
    assert_eq!(code(&wavefront(&["classify", "--problem", "missing.json"], dir.path())), 2);
    let unknown = r#"{"f":{"pieces":[["0"]]},"g":{"pieces":[["0","1","-1"]]},"D":{"pieces":[["-1/2","1"]]},"speed":1}"#;
    std::fs::write(dir.path().join("unknown.json"), unknown).unwrap();
    assert_eq!(code(&wavefront(&["classify", "--problem", "unknown.json"], dir.path())), 2);
    let bad_number = r#"{"f":{"pieces":[["zero"]]},"g":{"pieces":[["0","1","-1"]]},"D":{"pieces":[["-1/2","1"]]}}"#;
    std::fs::write(dir.path().join("num.json"), bad_number).unwrap();
    assert_eq!(code(&wavefront(&["classify", "--problem", "num.json"], dir.path())), 2);
    // D without a sign change is a domain error, not a parse error
    let positive = r#"{"f":{"pieces":[["0"]]},"g":{"pieces":[["0","1","-1"]]},"D":{"pieces":[["1"]]}}"#;
    std::fs::write(dir.path().join("pos.json"), positive).unwrap();
    assert_eq!(code(&wavefront(&["report", "--problem", "pos.json"], dir.path())), 1);
    assert_eq!(code(&wavefront(&["report"], dir.path())), 2);
}

#[test]
fn threshold_queries() {
    let dir = tempfile::tempdir().unwrap();
    let b = wavefront(&["bounds", "--preset", "ex53a"], dir.path());
    assert_eq!(code(&b), 0);
    let b: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert!((b["c_pl"]["lower"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let o = wavefront(
        &["critical-speed", "--preset", "ex53b", "--threshold", "c-nr", "--dump-trajectory", "t.csv", "--tol-bisection", "1e-7"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["threshold"], "c_nr");
    assert!(v["bisection_width"].as_f64().unwrap() <= 1e-7);
    let t = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(t.starts_with("phi,z,xi,dz\n") && t.lines().count() > 10);

    let c = wavefront(&["classify", "--preset", "ex52n"], dir.path());
    let c: serde_json::Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(c["pattern"], "NP");

    let r = wavefront(&["report", "--preset", "ex52n"], dir.path());
    let r: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(r["composite_name"], "c_np");
    assert!(r["composite"].as_f64().unwrap() > 0.45);
}

#[test]
fn oracle_table_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavefront(&["oracle", "--format", "csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("example,quantity,relation,expected,computed,tolerance,pass"));
    assert!(lines.all(|l| l.ends_with(",true")));
}
