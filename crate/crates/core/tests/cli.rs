use std::process::Command;

fn symlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symlab"))
}

fn run(args: &[&str]) -> (i32, String) {
    let out = symlab().args(args).env("SYMLAB_THREADS", "1").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

#[test]
fn subspace_reports_dimensions() {
    let (code, out) = run(&["subspace", "--group", "C2-swap", "--unit", "matrix-sigmoid", "--d", "2", "--c", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("dim(E^G)=2"));
    let (_, out) = run(&["subspace", "--group", "trivial", "--unit", "affine-layer", "--d", "2", "--b", "3", "--c", "2"]);
    assert!(out.contains("dim(E^G)=15"));
    let (_, out) = run(&["subspace", "--group", "Cn-circulant", "--n", "3", "--unit", "affine-layer", "--d", "3", "--b", "3", "--c", "3"]);
    assert!(out.contains("dim(E^G)=7"));
}

#[test]
fn subspace_writes_basis_and_rejects_bad_reps() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&["subspace", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(dir.path().join("eg_basis.csv").exists());
    let rep = dir.path().join("bad.json");
    std::fs::write(&rep, r#"{"order":2,"dim":2,"matrices":[[1,0,0,1],[2,0,0,1]],"cayley":[[0,1],[1,0]]}"#).unwrap();
    let (code, _) = run(&["subspace", "--rep", rep.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn invalid_scheme_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run(&["sweep", "--out", dir.path().to_str().unwrap(), "--set", r#"schemes=["bogus"]"#]);
    assert_eq!(code, 2);
    assert!(out.contains("bogus"));
}

#[test]
fn single_cell_sweep_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    std::fs::write(
        &cfg,
        "n_values = [5]\nschemes = [\"vanilla\"]\nrepetitions = 1\nmc_points = 10\n[train]\nhorizon_t = 1.0\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let (code, text) = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let metrics = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("teacher_kind,init_mode,scheme,N,repetition,metric_name,value,epoch"));
    assert!(out_dir.join("summary.json").exists());

    // Re-running from the echoed config reproduces the metrics byte for byte.
    let again = dir.path().join("again");
    let resolved = out_dir.join("config.resolved.json");
    let (code, _) = run(&["sweep", "--config", resolved.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(metrics, std::fs::read_to_string(again.join("metrics.csv")).unwrap());
}

#[test]
fn run_writes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let (code, text) = run(&["run", "--out", out.to_str().unwrap(), "--set", "train.n_particles=10", "--set", "train.horizon_t=1"]);
    assert_eq!(code, 0, "{text}");
    for f in ["config.json", "config.resolved.json", "final.csv", "summary.json", "snapshots/epoch_0.csv", "snapshots/epoch_10.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
}

#[test]
fn diverged_run_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&[
        "run",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "train.alpha=1e12",
        "--set",
        "train.n_particles=5",
        "--set",
        "train.horizon_t=1",
        "--set",
        "teacher.scale=100",
    ]);
    assert_eq!(code, 4);
}

#[test]
fn discover_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let (code, text) = run(&["discover", "--out", out.to_str().unwrap(), "--set", "delta=1", "--set", "train.n_particles=20"]);
    assert_eq!(code, 0, "{text}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("discovery.json")).unwrap()).unwrap();
    assert_eq!(doc["steps"].as_array().unwrap().len(), 1);
    assert!(out.join("basis.csv").exists());

    let cfg = dir.path().join("noteacher.json");
    std::fs::write(&cfg, r#"{"delta": 0.01}"#).unwrap();
    let (code, _) = run(&["discover", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn validate_suite_and_failures() {
    let (code, out) = run(&["validate"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("0 failed"));

    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("bad.json");
    std::fs::write(&rep, r#"{"order":2,"dim":2,"matrices":[[1,0,0,1],[2,0,0,1]],"cayley":[[0,1],[1,0]]}"#).unwrap();
    let (code, out) = run(&["validate", "--rep", rep.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.lines().any(|l| l.starts_with("FAIL") && l.contains("bad.json")));

    let snap = dir.path().join("snap.csv");
    std::fs::write(&snap, "2,4\n1,2,3\n").unwrap();
    let (code, _) = run(&["validate", "--snapshot", snap.to_str().unwrap()]);
    assert_eq!(code, 3);
    let (code, _) = run(&["validate", "--snapshot", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(code, 3);
}

#[test]
fn missing_config_file_is_io_error() {
    let (code, _) = run(&["run", "--config", "/nonexistent/cfg.json", "--out", "/tmp/symlab-unused"]);
    assert_eq!(code, 3);
}
