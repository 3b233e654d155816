use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pmm-lab"));
    cmd.env_remove("PMM_LAB_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn emit_family(dir: &Path) -> std::path::PathBuf {
    let out = run(&["validate", "--emit"]);
    assert_eq!(code(&out), 0);
    let path = dir.join("pmm.json");
    fs::write(&path, &out.stdout).unwrap();
    path
}

#[test]
fn validate_default_family_file() {
    let dir = tempfile::tempdir().unwrap();
    let family = emit_family(dir.path());
    let out = run(&["validate", "--family", path_str(&family)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert!(report.get("failures").is_none_or(|f| f.as_array().unwrap().is_empty()));
}

#[test]
fn validate_rejects_positive_empty_rate() {
    let dir = tempfile::tempdir().unwrap();
    let family = emit_family(dir.path());
    let mut table: Value = serde_json::from_str(&fs::read_to_string(&family).unwrap()).unwrap();
    for entry in table["rates"].as_array_mut().unwrap() {
        if entry["window"] == "0000" {
            entry["value"] = 1.0.into();
        }
    }
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&table).unwrap()).unwrap();
    let out = run(&["validate", "--family", path_str(&bad)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn malformed_family_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"radius\": 1}").unwrap();
    assert_eq!(code(&run(&["validate", "--family", path_str(&bad)])), 2);
}

#[test]
fn unknown_flag_exits_two() {
    assert_eq!(code(&run(&["exact", "--ring", "5", "--bogus"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["exact"])), 2);
}

#[test]
fn certificate_for_small_window() {
    let out = run(&["connect", "--certify", "8"]);
    assert_eq!(code(&out), 0);
    let cert = json(&out);
    assert_eq!(cert["passed"], true);
    assert_eq!(cert["counterexamples"], 0);
    assert!(cert["pairs"].as_u64().unwrap() > 0);
}

#[test]
fn other_certificate_suites() {
    for suite in ["particles", "holes", "planner"] {
        let out = run(&["connect", "--certify", "5", "--suite", suite]);
        assert_eq!(code(&out), 0, "suite {suite}");
        assert_eq!(json(&out)["passed"], true);
    }
}

#[test]
fn connect_prints_a_path() {
    let out = run(&["connect", "0110", "0011"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.trim().is_empty());

    let out = run(&["connect", "--bfs", "0110", "0011"]);
    assert_eq!(code(&out), 0);
    let moves = String::from_utf8(out.stdout).unwrap();
    assert_eq!(moves.split_whitespace().count(), 2);
}

#[test]
fn disconnected_pair_fails_the_check() {
    assert_eq!(code(&run(&["connect", "1100", "1001"])), 1);
}

#[test]
fn exact_ring_residuals() {
    let out = run(&["exact", "--ring", "5", "--rho", "0.5"]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    for (name, v) in report["residuals"].as_object().unwrap() {
        assert!(v.as_f64().unwrap() <= 1e-12, "{name} = {v}");
    }
    assert_eq!(report["states"], 32);
}

#[test]
fn exact_several_densities() {
    let out = run(&["exact", "--interval", "6", "--count", "3", "--rho", "0.2,0.7"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out).as_array().unwrap().len(), 2);
}

#[test]
fn classify_eventually_periodic() {
    let out = run(&["classify", "(100)* 11 (100)*", "0110"]);
    assert_eq!(code(&out), 0);
    let rows = json(&out);
    assert_eq!(rows[0]["kind"], "eventually-periodic");
    assert_eq!(rows[0]["frozen"], false);
    assert_eq!(rows[1]["kind"], "finite");
}

fn simulate_into(prefix: &Path, seed: Option<&str>) -> Output {
    let mut args = vec![
        "simulate", "--ring", "40", "--rho", "0.5", "--horizon", "5", "--samples", "4", "--replicas", "3",
        "--out",
    ];
    args.push(path_str(prefix));
    if let Some(s) = seed {
        args.extend(["--seed", s]);
    }
    run(&args)
}

fn with_suffix(prefix: &Path, name: &str) -> std::path::PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(name);
    s.into()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&simulate_into(&a, Some("9"))), 0);
    assert_eq!(code(&simulate_into(&b, Some("9"))), 0);
    let pa = fs::read(with_suffix(&a, "profile.csv")).unwrap();
    let pb = fs::read(with_suffix(&b, "profile.csv")).unwrap();
    assert_eq!(pa, pb);
    assert!(String::from_utf8(pa).unwrap().starts_with("time,site,mean_occupation\n"));

    let c = dir.path().join("c");
    assert_eq!(code(&simulate_into(&c, Some("10"))), 0);
    assert_ne!(fs::read(with_suffix(&c, "profile.csv")).unwrap(), pb);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(with_suffix(&a, "manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("orig");
    let b = dir.path().join("again");
    assert_eq!(code(&simulate_into(&a, Some("3"))), 0);
    let manifest = with_suffix(&a, "manifest.json");
    let out = run(&["replay", path_str(&manifest), "--out", path_str(&b)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["profile.csv", "summary.json"] {
        assert_eq!(fs::read(with_suffix(&a, name)).unwrap(), fs::read(with_suffix(&b, name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("env");
    let b = dir.path().join("flag");
    let out = bin()
        .env("PMM_LAB_SEED", "77")
        .args(["simulate", "--ring", "30", "--rho", "0.4", "--horizon", "3", "--out", path_str(&a)])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(code(&simulate_like(&b, "77")), 0);
    assert_eq!(fs::read(with_suffix(&a, "profile.csv")).unwrap(), fs::read(with_suffix(&b, "profile.csv")).unwrap());

    let replayed = dir.path().join("replayed");
    let out = run(&["replay", path_str(&with_suffix(&a, "manifest.json")), "--out", path_str(&replayed)]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read(with_suffix(&a, "profile.csv")).unwrap(),
        fs::read(with_suffix(&replayed, "profile.csv")).unwrap()
    );
}

fn simulate_like(prefix: &Path, seed: &str) -> Output {
    run(&[
        "simulate", "--ring", "30", "--rho", "0.4", "--horizon", "3", "--seed", seed, "--out", path_str(prefix),
    ])
}

#[test]
fn replay_detects_changed_family() {
    let dir = tempfile::tempdir().unwrap();
    let family = emit_family(dir.path());
    let prefix = dir.path().join("run");
    let out = run(&[
        "simulate", "--family", path_str(&family), "--ring", "12", "--rho", "0.5", "--horizon", "1", "--out",
        path_str(&prefix),
    ]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&family).unwrap().replacen("1.0", "2.0", 1);
    fs::write(&family, text).unwrap();
    assert_eq!(code(&run(&["replay", path_str(&with_suffix(&prefix, "manifest.json"))])), 2);
}

#[test]
fn simulate_from_initial_file() {
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("init.txt");
    fs::write(&init, "0110100110\n").unwrap();
    let out = run(&["simulate", "--init", path_str(&init), "--horizon", "2", "--samples", "2"]);
    assert_eq!(code(&out), 0);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 10);
    let out = run(&["simulate", "--init", path_str(&init), "--ring", "9", "--horizon", "2"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn small_hydro_run() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("h");
    let out = run(&[
        "hydro", "--L", "64", "--replicas", "4", "--blocks", "8", "--cells", "64", "--tmacro", "0.01", "--seed", "1",
        "--out", path_str(&prefix),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let kmc = fs::read_to_string(with_suffix(&prefix, "kmc.csv")).unwrap();
    let pde = fs::read_to_string(with_suffix(&prefix, "pde.csv")).unwrap();
    assert_eq!(kmc.lines().count(), 9);
    assert_eq!(pde.lines().count(), 9);
    let report: Value = serde_json::from_str(&fs::read_to_string(with_suffix(&prefix, "report.json")).unwrap()).unwrap();
    assert!(report["discrepancy"]["l2"].as_f64().unwrap().is_finite());

    let out = run(&[
        "hydro", "--L", "64", "--replicas", "2", "--blocks", "8", "--cells", "64", "--tmacro", "0.01", "--max-l2",
        "0",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn entropy_of_stationary_measures() {
    let out = run(&["entropy", "--ring", "8", "--rho", "0.3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert!(report["h"].as_f64().unwrap().abs() <= 1e-10);

    let out = run(&["entropy", "--ring", "8", "--measure", "uniform-class", "--class-of", "11000000"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert!(report["alpha"].as_array().unwrap().iter().all(|b| b["value"].as_f64().unwrap() <= 1e-10));
}

#[test]
fn entropy_of_file_measure() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("nu.json");
    let raw: Vec<f64> = (0..1u32 << 6).map(|i| 1.0 + (i & 0b111) as f64).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    fs::write(&input, serde_json::to_string(&weights).unwrap()).unwrap();
    let out = run(&["entropy", "--ring", "6", "--measure", "file", "--input", path_str(&input)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert!(report["alpha"].as_array().unwrap().iter().any(|b| b["value"].as_f64().unwrap() > 0.0));

    fs::write(&input, "[1.0, 2.0]").unwrap();
    let out = run(&["entropy", "--ring", "6", "--measure", "file", "--input", path_str(&input)]);
    assert_eq!(code(&out), 2);
}
