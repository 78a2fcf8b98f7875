use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sinrgraph(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sinrgraph"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("SINRG_OUT_DIR")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = sinrgraph(&["entropy", "--config", "/nonexistent/run.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/run.toml"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "alpha = 1.0\nlambada = 3\n").unwrap();
    let o = sinrgraph(&["entropy", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambada"), "{}", stderr(&o));
}

#[test]
fn alpha_above_dimension_names_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let o = sinrgraph(&["entropy", "--alpha", "2.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha < d"), "{}", stderr(&o));
}

#[test]
fn bad_flag_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = sinrgraph(&["simulate", "--domain", "sphere"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flag_overrides_file_in_the_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "lambda = 30.0\nseed = 11\n").unwrap();
    let before = fs::read(&cfg).unwrap();
    let out = dir.path().join("out");
    let o = sinrgraph(&["simulate", "--config", cfg.to_str().unwrap(), "--lambda", "20"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = fs::read_to_string(out.join("effective_config.toml")).unwrap();
    assert!(echo.contains("lambda = [20.0]"), "{echo}");
    assert!(echo.contains("seed = 11"), "{echo}");
    assert_eq!(fs::read(&cfg).unwrap(), before);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = sinrgraph(&["simulate", "--lambda", "50", "--seed", "7"], out);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["configuration.csv", "edges.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("configuration.csv")).unwrap();
    assert!(csv.starts_with("# seed=7\n# config_digest="));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    for key in ["seed", "config_digest", "n", "|E|", "mean_degree"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
}

#[test]
fn entropy_reports_nats_and_bits() {
    let dir = tempfile::tempdir().unwrap();
    let o = sinrgraph(&["entropy"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("entropy.json")).unwrap()).unwrap();
    let nats = v["H_nats"].as_f64().unwrap();
    let bits = v["H_bits"].as_f64().unwrap();
    assert!(nats > 0.0 && (bits - nats / std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(v["method"], "quadrature");
    assert!(v.get("error_estimate").is_some());
}

#[test]
fn aep_writes_the_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = sinrgraph(&["aep", "--lambda", "25,50,100", "--replicates", "4", "--domain", "torus"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("aep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "lambda,mean,se,H,gap");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("25.0,"));
}

#[test]
fn rate_reads_measure_files() {
    let dir = tempfile::tempdir().unwrap();
    // 2x2 cubes on the unit torus, one bounded mark interval plus the tail
    let mut omega = String::from("bin_id,spatial_cell,mark_interval,mass\n");
    for b in 0..8 {
        omega.push_str(&format!("{b},{},{},0.125\n", b / 2, b % 2));
    }
    let path = dir.path().join("omega.csv");
    fs::write(&path, &omega).unwrap();
    let o = sinrgraph(
        &["rate", "--domain", "torus", "--n-s", "2", "--n-m", "1", "--omega-file", path.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/rate.json")).unwrap()).unwrap();
    let i1 = v["rate_i1"]["value"].as_f64().unwrap();
    assert!(i1.abs() < 1e-12, "{i1}");
    assert_eq!(fs::read_to_string(&path).unwrap(), omega);
}
