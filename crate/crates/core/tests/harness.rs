use ris_idbp::acceptance::scaled_config;
use ris_idbp::harness::*;
use ris_idbp::priors::ConditionalPrior;
use ris_idbp::Error;

fn small_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(scaled_config(6));
    spec.snr_grid_db = vec![0.0];
    spec.bits_grid = vec![3];
    spec.algorithms = vec![Algorithm::Es];
    spec.pool_budget = 200;
    spec.pool_m = 4;
    spec.record_timing = false;
    spec
}

fn sample_row(algorithm: Algorithm, snr_db: f64, trial: usize) -> ResultRow {
    ResultRow {
        algorithm,
        m: 12,
        k: 3,
        b: 4,
        snr_db,
        trial,
        mse: 0.123456789012345,
        rate_bits: 12.0,
        energy_eff: 1e-3,
        objective: -0.5,
        leaf_evals: 12,
        wall_time_ms: 0.0,
        seed: 7,
        error: None,
    }
}

#[test]
fn one_point_one_trial_one_row() {
    let rows = run_experiment(&small_spec()).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].error.is_none());
    assert_eq!(rows[0].leaf_evals, 729);
    assert!(rows[0].mse >= 0.0);
}

#[test]
fn row_count_is_the_grid_product() {
    let mut spec = small_spec();
    spec.snr_grid_db = vec![-10.0, 10.0];
    spec.bits_grid = vec![2, 3, 4];
    spec.algorithms = vec![Algorithm::Idbp, Algorithm::Tmh];
    spec.trials = 5;
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 60);
    assert!(rows.iter().all(|r| r.error.is_none() && r.mse >= 0.0));
    let mut sorted = rows.clone();
    sort_rows(&mut sorted);
    assert_eq!(rows, sorted);
}

#[test]
fn repeated_sweep_gives_identical_bytes() {
    let mut spec = small_spec();
    spec.algorithms = vec![Algorithm::Es, Algorithm::Idbp, Algorithm::Ao2];
    spec.trials = 2;
    let a = csv_string(&run_experiment(&spec).unwrap());
    spec.workers = 1;
    let b = csv_string(&run_experiment(&spec).unwrap());
    assert_eq!(a, b);
}

#[test]
fn grid_order_does_not_change_rows() {
    let mut spec = small_spec();
    spec.snr_grid_db = vec![-5.0, 5.0];
    spec.bits_grid = vec![2, 4];
    spec.algorithms = vec![Algorithm::Tmh];
    spec.trials = 2;
    let a = run_experiment(&spec).unwrap();
    spec.snr_grid_db.reverse();
    spec.bits_grid.reverse();
    let b = run_experiment(&spec).unwrap();
    assert_eq!(a, b);
    spec.master_seed = 1;
    let c = run_experiment(&spec).unwrap();
    assert_ne!(a[0].seed, c[0].seed);
}

#[test]
fn csv_layout() {
    assert_eq!(csv_string(&[]), format!("{CSV_HEADER}\n"));
    assert_eq!(
        CSV_HEADER,
        "algorithm,M,K,b,snr_db,trial,mse,rate_bits,energy_eff,objective,leaf_evals,wall_time_ms,seed"
    );
    let one = csv_string(&[sample_row(Algorithm::Idbp, 0.0, 0)]);
    assert_eq!(one.lines().count(), 2);
    let fields: Vec<&str> = one.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields.len(), 13);
    assert_eq!(fields[0], "idbp");
    assert_eq!(fields[6], "1.234567890e-1");
    let mantissa = fields[6].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 10);
}

#[test]
fn csv_rows_are_sorted() {
    let rows = vec![
        sample_row(Algorithm::Tmh, 5.0, 1),
        sample_row(Algorithm::Es, 5.0, 0),
        sample_row(Algorithm::Tmh, -5.0, 0),
        sample_row(Algorithm::Ao1, 0.0, 3),
        sample_row(Algorithm::Tmh, 5.0, 0),
    ];
    let text = csv_string(&rows);
    let keys: Vec<(String, String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[4].to_string(), f[5].to_string())
        })
        .collect();
    let want = [
        ("ao1", "0.000000000e0", "3"),
        ("es", "5.000000000e0", "0"),
        ("tmh", "-5.000000000e0", "0"),
        ("tmh", "5.000000000e0", "0"),
        ("tmh", "5.000000000e0", "1"),
    ];
    for (got, w) in keys.iter().zip(want) {
        assert_eq!((got.0.as_str(), got.1.as_str(), got.2.as_str()), w);
    }
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let rows = vec![sample_row(Algorithm::Es, 0.0, 0), sample_row(Algorithm::Idbp, 0.0, 0)];
    emit_csv(&rows, &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    emit_csv(&rows, &path).unwrap();
    assert_eq!(first, std::fs::read(&path).unwrap());
    assert_eq!(String::from_utf8(first).unwrap(), csv_string(&rows));
}

#[test]
fn plot_has_one_series_per_algorithm() {
    let rows = vec![
        sample_row(Algorithm::Es, 0.0, 0),
        sample_row(Algorithm::Es, 5.0, 0),
        sample_row(Algorithm::Idbp, 0.0, 0),
        sample_row(Algorithm::Idbp, 5.0, 0),
    ];
    let s = plot_script(&rows, "x.png");
    assert_eq!(s.matches("<< EOD").count(), 2);
    let plots: Vec<&str> = s.split("\nplot ").skip(1).collect();
    assert_eq!(plots.len(), 2);
    for p in plots {
        assert_eq!(p.matches("with linespoints").count(), 2);
    }
    assert_eq!(s, plot_script(&rows, "x.png"));
    let means = series_means(&rows);
    assert_eq!(means.len(), 2);
    assert_eq!(means[&("es".to_string(), 12, 4)].len(), 2);
}

#[test]
fn empty_plot_has_no_series() {
    let s = plot_script(&[], "x.png");
    assert!(!s.contains("EOD"));
    assert!(!s.contains("\nplot "));
    assert!(s.contains("set multiplot") && s.contains("unset multiplot"));
}

#[test]
fn failed_rows_are_excluded_from_means_and_reported() {
    let mut bad = sample_row(Algorithm::Es, 0.0, 1);
    bad.error = Some("singular".into());
    let rows = vec![sample_row(Algorithm::Es, 0.0, 0), bad];
    assert_eq!(series_means(&rows)[&("es".to_string(), 12, 4)][0].1, 0.123456789012345);
    let report = error_report(&rows);
    assert_eq!(report, "es,12,4,0,1,singular\n");
}

#[test]
fn sweep_keeps_idbp_priors_and_traces() {
    let mut spec = small_spec();
    spec.algorithms = vec![Algorithm::Es, Algorithm::Idbp];
    spec.trials = 2;
    let out = run_sweep(&spec).unwrap();
    assert_eq!(out.rows.len(), 4);
    assert_eq!(out.artifacts.len(), 2);
    let a = &out.artifacts[0];
    let q = ConditionalPrior::from_text(&a.prior_text).unwrap();
    assert_eq!(q.k(), 3);
    assert_eq!(a.trace_log.lines().count(), 6 + 6 * 5 / 2);
    let priors = priors_text(&out.artifacts);
    assert_eq!(priors.matches("## M=6 b=3").count(), 2);
    let traces = traces_text(&out.artifacts);
    assert!(traces.starts_with("## M=6 b=3 snr_db=0.000000000e0 trial=0 seed="));
}

#[test]
fn resolved_config_reloads_to_the_same_spec() {
    let text = "n_tx = 16\nn_rx = 16\nn_rf_tx = 4\nn_rf_rx = 4\nn_streams = 4\nn_interferers = 2\nm_grid = [6]\nsnr_grid_db = [0.0]\n";
    let mut spec = ConfigFile::parse(text).unwrap().into_spec().unwrap();
    spec.master_seed = 42;
    spec.trials = 3;
    spec.algorithms = vec![Algorithm::Tmh];
    spec.record_timing = false;
    let again = ConfigFile::parse(&resolved_config(text, &spec).unwrap()).unwrap().into_spec().unwrap();
    assert_eq!(again, spec);
    spec.master_seed = u64::MAX;
    assert!(resolved_config(text, &spec).is_err());
}

#[test]
fn config_errors() {
    let err = |t: &str| ConfigFile::parse(t).and_then(|c| c.into_spec()).unwrap_err();
    assert!(matches!(err("n_antennas = 4\n"), Error::InvalidConfig(_)));
    assert!(matches!(
        err("phase_alphabet = [0.0, 1.0]\nphase_alphabet_deg = [0.0, 90.0]\n"),
        Error::InvalidConfig(_)
    ));
    assert!(matches!(err("m_grid = [16]\nalgorithms = [\"es\"]\n"), Error::InvalidConfig(_)));
    assert!(matches!(err("m_grid = []\n"), Error::InvalidConfig(_)));
    assert!(matches!(err("trials = 0\n"), Error::InvalidConfig(_)));
    assert!(matches!(err("algorithms = [\"sa\"]\n"), Error::InvalidConfig(_)));
    assert!(matches!(err("k_best = 4\n"), Error::InvalidConfig(_)));
    assert!(matches!(err("trials = \n"), Error::InvalidConfig(_)));
}

#[test]
fn reference_file_loads() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    let spec = load_spec(&path).unwrap();
    assert_eq!(spec.snr_grid_db.len(), 13);
    assert_eq!(spec.bits_grid, vec![2, 3, 4]);
    assert_eq!(spec.algorithms, Algorithm::ALL.to_vec());
    assert_eq!(spec.base.k(), 3);
    assert!(load_spec(std::path::Path::new("/nonexistent/x.toml")).is_err());
}

#[test]
fn algorithm_lists() {
    assert_eq!(parse_algorithms("es, idbp").unwrap(), vec![Algorithm::Es, Algorithm::Idbp]);
    assert!(parse_algorithms("es,foo").is_err());
    assert_eq!(parse_algorithms("tmh,es,tmh").unwrap(), vec![Algorithm::Es, Algorithm::Tmh]);
    assert!(parse_algorithms("").unwrap().is_empty());
}
