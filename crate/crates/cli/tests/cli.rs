use std::fs;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morrey-lab")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn gen_norm_and_dual_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.gfn");
    let f = f.to_str().unwrap();
    assert_eq!(code(&lab(&["--seed", "3", "--out", f, "gen", "indicator", "--n", "16", "--cube", "4,4"])), 0);
    let o = lab(&["norm", "--input", f, "--space", "morrey", "--p0", "3", "--p", "2"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // ‖χ_Q‖ = |Q|^{1/p0} with |Q| = 1/4.
    assert!((v["value"].as_f64().unwrap() - 0.25f64.powf(1.0 / 3.0)).abs() < 1e-12);
    let o = lab(&["dual", "gap", "--input", f, "--p0", "3", "--p", "2"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["relative_gap"].as_f64().unwrap() < 1e-6);
}

#[test]
fn op_writes_a_function_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.csv");
    let m = dir.path().join("m.gfn");
    assert_eq!(code(&lab(&["--out", f.to_str().unwrap(), "gen", "smooth-bump-sum", "--n", "32"])), 0);
    for op in ["maximal", "sharp", "ialpha"] {
        let o = lab(&["--out", m.to_str().unwrap(), "op", op, "--input", f.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{op}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(&fs::read(&m).unwrap()[..4], b"GFN1");
    }
}

#[test]
fn suite_exit_codes_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r.json");
    let o = lab(&["--out", r.to_str().unwrap(), "suite", "maximal", "--set", "sizes=64", "--set", "samples=2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = lab(&["plotdata", "--report", r.to_str().unwrap(), "--series", "annular-decay"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("k,normalized_norm,reference\n"));

    let o = lab(&["suite", "ialpha", "--set", "sizes=64", "--set", "frac-error=1e-12"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("reproduce: morrey-lab suite ialpha"));
}

#[test]
fn usage_and_io_errors_exit_two() {
    assert_eq!(code(&lab(&["frobnicate"])), 2);
    assert_eq!(code(&lab(&["norm", "--input", "/nonexistent.gfn", "--space", "mixed", "--p", "2"])), 2);
    assert_eq!(code(&lab(&["suite", "nope"])), 2);
    assert_eq!(code(&lab(&["suite", "commutator", "--set", "q0=5"])), 2);
    assert_eq!(code(&lab(&["plotdata", "--report", "/nonexistent.json", "--series", "duality-gap"])), 2);
}

#[test]
fn config_file_supplies_flags_and_the_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.kv");
    fs::write(&cfg, "# holder run\nsuite = holder\nsamples = 5\nseed = 11\n").unwrap();
    let a = lab(&["--config", cfg.to_str().unwrap(), "suite"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 11);
    assert_eq!(v["config"]["samples"], 5);
    let b = lab(&["--config", cfg.to_str().unwrap(), "--seed", "12", "suite"]);
    let v: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 12);
}

#[test]
fn same_config_gives_identical_reports() {
    let a = lab(&["suite", "sharp", "--set", "sizes=64", "--set", "samples=2"]);
    let b = lab(&["suite", "sharp", "--set", "sizes=64", "--set", "samples=2"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}
