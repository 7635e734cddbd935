use std::process::Command;

const SMALL: &str = "n_tx = 16
n_rx = 16
n_rf_tx = 4
n_rf_rx = 4
n_streams = 4
n_interferers = 2
m_grid = [6]
snr_grid_db = [0.0, 10.0]
bits_grid = [3]
algorithms = [\"es\", \"idbp\", \"tmh\"]
trials = 2
pool_budget = 200
pool_m = 4
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-idbp"))
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("res.csv");
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "3", "--algos", "es,idbp", "--trials", "1", "--workers", "1"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "algorithm,M,K,b,snr_db,trial,mse,rate_bits,energy_eff,objective,leaf_evals,wall_time_ms,seed"
    );
    assert_eq!(lines.count(), 4);
    for ext in ["gp", "priors.txt", "trace.txt", "config.toml"] {
        let p = out.with_extension(ext);
        assert!(std::fs::metadata(&p).unwrap().len() > 0, "{}", p.display());
    }
    let resolved = std::fs::read_to_string(out.with_extension("config.toml")).unwrap();
    assert!(resolved.contains("master_seed = 3"));
    assert!(resolved.contains("trials = 1"));
}

#[test]
fn rerun_from_resolved_config_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let a = dir.path().join("a.csv");
    let st = bin().args(["run", "--no-timing", "--config"]).arg(&cfg).arg("--out").arg(&a).output().unwrap().status;
    assert!(st.success());
    let b = dir.path().join("b.csv");
    let st = bin()
        .args(["run", "--config"])
        .arg(a.with_extension("config.toml"))
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap()
        .status;
    assert!(st.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_problems_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "n_antennas = 4\n").unwrap();
    let cases: Vec<Vec<std::ffi::OsString>> = vec![
        vec!["run".into(), "--config".into(), bad.clone().into()],
        vec!["run".into(), "--config".into(), dir.path().join("missing.toml").into()],
        vec!["verify".into(), "--only".into(), "x".into()],
    ];
    for args in cases {
        let st = bin().args(&args).output().unwrap();
        assert_eq!(st.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&st.stderr).contains("config error"));
    }
    let good = dir.path().join("good.toml");
    std::fs::write(&good, SMALL).unwrap();
    let st = bin().args(["run", "--algos", "es,sa", "--config"]).arg(&good).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let st = bin().args(["run", "--trials", "0", "--config"]).arg(&good).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
}

fn verify(only: &str) -> (i32, Vec<String>) {
    let out = bin().args(["verify", "--only", only]).output().unwrap();
    let lines = String::from_utf8_lossy(&out.stdout).lines().map(str::to_string).collect();
    (out.status.code().unwrap(), lines)
}

#[test]
fn verify_passing_criterion_exits_zero() {
    let (code, lines) = verify("6");
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("[PASS] criterion  6"), "{}", lines[0]);
    assert_eq!(code, 0);
}

#[test]
fn verify_exit_code_follows_the_lines() {
    let (code, lines) = verify("2,3,6");
    assert_eq!(lines.len(), 3);
    let all_pass = lines.iter().all(|l| l.starts_with("[PASS]"));
    assert_eq!(code, if all_pass { 0 } else { 2 });
}
