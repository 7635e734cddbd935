//! Seeded Monte Carlo sweeps, CSV output and plot scripts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::baselines::{ao1_init, ao2_init, alternating_opt, exhaustive_search, tmh, DEFAULT_ES_CAP};
use crate::channel::synthesize_channel;
use crate::config::{stable_hash, trial_seed, PowerModel, SystemConfig};
use crate::error::{Error, Result};
use crate::idbp::{idbp_search, SearchConfig, TransitionPolicy};
use crate::metrics::{evaluate_link, GainModel, LeafObjective};
use crate::priors::{estimate_prior, sample_candidate_pool};
use crate::transceiver::{finalize_digital, DesignOptions, FsChoice, TransceiverSet};

/// Exact CSV header.
pub const CSV_HEADER: &str =
    "algorithm,M,K,b,snr_db,trial,mse,rate_bits,energy_eff,objective,leaf_evals,wall_time_ms,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Es,
    Idbp,
    Tmh,
    Ao1,
    Ao2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Es,
        Algorithm::Idbp,
        Algorithm::Tmh,
        Algorithm::Ao1,
        Algorithm::Ao2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Es => "es",
            Algorithm::Idbp => "idbp",
            Algorithm::Tmh => "tmh",
            Algorithm::Ao1 => "ao1",
            Algorithm::Ao2 => "ao2",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Algorithm> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm '{s}'")))
    }
}

/// Parse a comma-separated algorithm list such as `es,idbp,tmh`.
pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    let mut out: Vec<Algorithm> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// A full sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub snr_grid_db: Vec<f64>,
    pub bits_grid: Vec<u32>,
    pub m_grid: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub output_path: Option<PathBuf>,
    pub master_seed: u64,
    pub pool_budget: usize,
    pub pool_m: usize,
    pub search: SearchConfig,
    pub epsilon_floor: f64,
    pub power: PowerModel,
    pub design: DesignOptions,
    pub fs_choice: FsChoice,
    pub ao_eps: f64,
    pub ao_max_rounds: usize,
    /// Zero disables the pool and uses the global rayon pool.
    pub workers: usize,
    /// When false the timing column is written as zero, making runs byte-reproducible.
    pub record_timing: bool,
}

impl ExperimentSpec {
    pub fn new(base: SystemConfig) -> ExperimentSpec {
        ExperimentSpec {
            m_grid: vec![base.n_ris],
            base,
            snr_grid_db: (-6..=6).map(|i| 5.0 * i as f64).collect(),
            bits_grid: vec![2, 3, 4],
            algorithms: Algorithm::ALL.to_vec(),
            trials: 1,
            output_path: None,
            master_seed: 0,
            pool_budget: 2000,
            pool_m: 16,
            search: SearchConfig::default(),
            epsilon_floor: crate::priors::EPSILON_FLOOR,
            power: PowerModel::default(),
            design: DesignOptions::default(),
            fs_choice: FsChoice::Identity,
            ao_eps: 1e-6,
            ao_max_rounds: 20,
            workers: 0,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.snr_grid_db.is_empty() || self.bits_grid.is_empty() || self.m_grid.is_empty() {
            return bad("grids must be nonempty".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.pool_m == 0 || self.pool_budget < self.pool_m {
            return bad("pool budget must be at least pool_m >= 1".into());
        }
        for &m in &self.m_grid {
            for &b in &self.bits_grid {
                self.base.clone().with_ris(m).with_bits(b).validate()?;
            }
            let size = (self.base.k() as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
            if self.algorithms.contains(&Algorithm::Es) && size > DEFAULT_ES_CAP {
                return bad(format!("es requested at M={m} with {size} sequences"));
            }
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("snr values must be finite".into());
        }
        if !(1..=self.base.k()).contains(&self.search.k_best) {
            return bad("k_best must lie in 1..=K".into());
        }
        Ok(())
    }
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub m: usize,
    pub k: usize,
    pub b: u32,
    pub snr_db: f64,
    pub trial: usize,
    pub mse: f64,
    pub rate_bits: f64,
    pub energy_eff: f64,
    pub objective: f64,
    pub leaf_evals: u64,
    pub wall_time_ms: f64,
    pub seed: u64,
    pub error: Option<String>,
}

struct Outcome {
    set: TransceiverSet,
    phases: Vec<usize>,
    leaf_evals: u64,
    idbp: Option<(String, String)>,
}

/// Prior and node trace of one IDBP run.
#[derive(Debug, Clone, PartialEq)]
pub struct IdbpArtifact {
    pub m: usize,
    pub b: u32,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub prior_text: String,
    pub trace_log: String,
}

impl IdbpArtifact {
    fn header(&self) -> String {
        format!(
            "## M={} b={} snr_db={} trial={} seed={}",
            self.m,
            self.b,
            fmt_float(self.snr_db),
            self.trial,
            self.seed
        )
    }
}

/// Rows plus the IDBP side outputs of a sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub artifacts: Vec<IdbpArtifact>,
}

fn run_algorithm(
    algo: Algorithm,
    spec: &ExperimentSpec,
    cfg: &SystemConfig,
    channel: &crate::channel::ChannelRealization,
    base_set: &TransceiverSet,
    leaf: &LeafObjective,
    seed: u64,
) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[seed, algo as u64]));
    let with_phases = |phases: Vec<usize>, leaf_evals: u64| -> Result<Outcome> {
        let (f_s, w_s) = finalize_digital(&base_set.f_s, &phases, &cfg.phase_alphabet)?;
        let set = TransceiverSet {
            f_s,
            w_s,
            ..base_set.clone()
        };
        Ok(Outcome {
            set,
            phases,
            leaf_evals,
            idbp: None,
        })
    };
    match algo {
        Algorithm::Es => {
            let r = exhaustive_search(leaf, cfg.k(), cfg.n_ris, DEFAULT_ES_CAP)?;
            with_phases(r.sequence.phases, r.evaluations)
        }
        Algorithm::Idbp => {
            let pool = sample_candidate_pool(leaf, cfg.k(), cfg.n_ris, spec.pool_budget, spec.pool_m, &mut rng);
            let prior = estimate_prior(&pool, cfg.k(), cfg.n_ris, spec.epsilon_floor)?;
            let scfg = SearchConfig {
                record_trace: true,
                ..spec.search
            };
            let t = idbp_search(cfg.n_ris, &scfg, &prior, TransitionPolicy::Prior, leaf)?;
            let trace = t.trace_log();
            let mut out = with_phases(t.best_sequence.phases, t.leaf_evaluations as u64)?;
            out.idbp = Some((prior.to_text(), trace));
            Ok(out)
        }
        Algorithm::Tmh => {
            let r = tmh(channel, base_set, cfg)?;
            with_phases(r.sequence.phases, 0)
        }
        Algorithm::Ao1 | Algorithm::Ao2 => {
            let init = if algo == Algorithm::Ao1 {
                ao1_init(channel, cfg, spec.design)?
            } else {
                ao2_init(channel, cfg, spec.design, &mut rng)?
            };
            let r = alternating_opt(channel, cfg, init, spec.ao_eps, spec.ao_max_rounds, spec.design)?;
            Ok(Outcome {
                set: r.transceivers,
                phases: r.phases.phases,
                leaf_evals: r.loss_evaluations as u64,
                idbp: None,
            })
        }
    }
}

fn run_trial(spec: &ExperimentSpec, m: usize, b: u32, snr: f64, trial: usize) -> SweepOutput {
    let seed = trial_seed(spec.master_seed, m, b, snr, trial);
    let row = |algo: Algorithm| ResultRow {
        algorithm: algo,
        m,
        k: spec.base.k(),
        b,
        snr_db: snr,
        trial,
        mse: f64::NAN,
        rate_bits: f64::NAN,
        energy_eff: f64::NAN,
        objective: f64::NAN,
        leaf_evals: 0,
        wall_time_ms: 0.0,
        seed,
        error: None,
    };
    let setup = || -> Result<_> {
        let cfg = spec.base.clone().with_ris(m).with_bits(b).with_snr(snr).with_seed(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channel = synthesize_channel(&cfg, &mut rng)?;
        let zero = vec![0; m];
        let (set, _) = TransceiverSet::design(&channel, &cfg, spec.design, spec.fs_choice, &zero)?;
        let leaf = LeafObjective::new(&channel, &set, &cfg)?;
        Ok((cfg, channel, set, leaf))
    };
    let (cfg, channel, set, leaf) = match setup() {
        Ok(v) => v,
        Err(e) => {
            let rows = spec
                .algorithms
                .iter()
                .map(|&a| ResultRow {
                    error: Some(e.to_string()),
                    ..row(a)
                })
                .collect();
            return SweepOutput {
                rows,
                artifacts: Vec::new(),
            };
        }
    };
    let mut out = SweepOutput::default();
    for &algo in &spec.algorithms {
        let t0 = Instant::now();
        let res = run_algorithm(algo, spec, &cfg, &channel, &set, &leaf, seed);
        let elapsed = t0.elapsed().as_secs_f64() * 1e3;
        let mut r = row(algo);
        if spec.record_timing {
            r.wall_time_ms = elapsed;
        }
        match res.and_then(|o| {
            evaluate_link(&channel, &o.set, &cfg, &o.phases, &spec.power, GainModel::Ideal)
                .map(|rep| (o.leaf_evals, o.idbp, rep))
        }) {
            Ok((evals, idbp, rep)) => {
                r.mse = rep.mse;
                r.rate_bits = rep.rate_bits;
                r.energy_eff = rep.energy_eff;
                r.objective = rep.objective;
                r.leaf_evals = evals;
                if let Some((prior_text, trace_log)) = idbp {
                    out.artifacts.push(IdbpArtifact {
                        m,
                        b,
                        snr_db: snr,
                        trial,
                        seed,
                        prior_text,
                        trace_log,
                    });
                }
            }
            Err(e) => r.error = Some(e.to_string()),
        }
        out.rows.push(r);
    }
    out
}

/// Sort key used for output: `(algorithm, M, b, snr_db, trial)`.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.algorithm
            .name()
            .cmp(b.algorithm.name())
            .then(a.m.cmp(&b.m))
            .then(a.b.cmp(&b.b))
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.trial.cmp(&b.trial))
    });
}

/// Run every algorithm on every grid point and trial. Failures are reported
/// in the row's `error` field.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    run_sweep(spec).map(|o| o.rows)
}

/// [`run_experiment`] that also keeps the prior and trace of every IDBP run.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &m in &spec.m_grid {
        for &b in &spec.bits_grid {
            for &snr in &spec.snr_grid_db {
                for t in 0..spec.trials {
                    jobs.push((m, b, snr, t));
                }
            }
        }
    }
    let work = || -> Vec<SweepOutput> {
        jobs.par_iter()
            .map(|&(m, b, snr, t)| run_trial(spec, m, b, snr, t))
            .collect()
    };
    let parts = if spec.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(work)
    } else {
        work()
    };
    let mut out = SweepOutput::default();
    for p in parts {
        out.rows.extend(p.rows);
        out.artifacts.extend(p.artifacts);
    }
    sort_rows(&mut out.rows);
    out.artifacts.sort_by(|x, y| {
        x.m.cmp(&y.m)
            .then(x.b.cmp(&y.b))
            .then(x.snr_db.total_cmp(&y.snr_db))
            .then(x.trial.cmp(&y.trial))
    });
    Ok(out)
}

/// Every prior matrix of a sweep, each under a `## M= b= snr_db= trial= seed=` line.
pub fn priors_text(artifacts: &[IdbpArtifact]) -> String {
    let mut s = String::new();
    for a in artifacts {
        let _ = writeln!(s, "{}", a.header());
        s.push_str(&a.prior_text);
        s.push('\n');
    }
    s
}

/// Every node trace of a sweep (`stage state score` lines) under the same headers.
pub fn traces_text(artifacts: &[IdbpArtifact]) -> String {
    let mut s = String::new();
    for a in artifacts {
        let _ = writeln!(s, "{}", a.header());
        s.push_str(&a.trace_log);
        s.push('\n');
    }
    s
}

/// The experiment file with command-line overrides folded in. Loading it
/// reproduces `spec`.
pub fn resolved_config(original: &str, spec: &ExperimentSpec) -> Result<String> {
    let mut table: toml::Table = toml::from_str(original).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let algos = spec.algorithms.iter().map(|a| toml::Value::from(a.name())).collect::<Vec<_>>();
    table.insert("algorithms".into(), toml::Value::Array(algos));
    table.insert("trials".into(), toml::Value::Integer(spec.trials as i64));
    let seed = i64::try_from(spec.master_seed)
        .map_err(|_| Error::InvalidConfig("master_seed does not fit a TOML integer".into()))?;
    table.insert("master_seed".into(), toml::Value::Integer(seed));
    table.insert("workers".into(), toml::Value::Integer(spec.workers as i64));
    table.insert("record_timing".into(), toml::Value::Boolean(spec.record_timing));
    if let Some(p) = &spec.output_path {
        table.insert("output".into(), toml::Value::from(p.to_string_lossy().into_owned()));
    }
    toml::to_string(&table).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Ten significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.9e}")
}

/// CSV text with the fixed header, rows in output order.
pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &sorted {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.algorithm.name(),
            r.m,
            r.k,
            r.b,
            fmt_float(r.snr_db),
            r.trial,
            fmt_float(r.mse),
            fmt_float(r.rate_bits),
            fmt_float(r.energy_eff),
            fmt_float(r.objective),
            r.leaf_evals,
            fmt_float(r.wall_time_ms),
            r.seed
        );
    }
    s
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(rows))?;
    Ok(())
}

/// Error messages of failed rows, one `algorithm,M,b,snr_db,trial,message` line each.
pub fn error_report(rows: &[ResultRow]) -> String {
    let mut s = String::new();
    for r in rows {
        if let Some(e) = &r.error {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.algorithm.name(), r.m, r.b, r.snr_db, r.trial, e);
        }
    }
    s
}

/// Mean of `mse` and `rate_bits` per `(algorithm, M, b)` series and SNR,
/// skipping failed rows.
pub fn series_means(rows: &[ResultRow]) -> BTreeMap<(String, usize, u32), Vec<(f64, f64, f64)>> {
    let mut acc: BTreeMap<(String, usize, u32), BTreeMap<i64, (f64, f64, f64, usize)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        let e = acc
            .entry((r.algorithm.name().to_string(), r.m, r.b))
            .or_default()
            .entry((r.snr_db * 1e6).round() as i64)
            .or_insert((r.snr_db, 0.0, 0.0, 0));
        e.1 += r.mse;
        e.2 += r.rate_bits;
        e.3 += 1;
    }
    acc.into_iter()
        .map(|(k, pts)| {
            let v = pts
                .into_values()
                .map(|(snr, m, rt, n)| (snr, m / n as f64, rt / n as f64))
                .collect();
            (k, v)
        })
        .collect()
}

/// Self-contained gnuplot script with an MSE panel and a rate panel.
pub fn plot_script(rows: &[ResultRow], image: &str) -> String {
    let series = series_means(rows);
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script: MSE and information rate against SNR");
    let _ = writeln!(s, "set terminal pngcairo size 1400,560");
    let _ = writeln!(s, "set output '{image}'");
    let mut names = Vec::new();
    for (i, ((algo, m, b), pts)) in series.iter().enumerate() {
        let name = format!("$s{i}");
        let _ = writeln!(s, "{name} << EOD");
        for (snr, mse, rate) in pts {
            let _ = writeln!(s, "{} {} {}", fmt_float(*snr), fmt_float(*mse), fmt_float(*rate));
        }
        let _ = writeln!(s, "EOD");
        names.push((name, format!("{algo} M={m} b={b}")));
    }
    let _ = writeln!(s, "set multiplot layout 1,2");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set key outside right");
    let _ = writeln!(s, "set xlabel 'SNR [dB]'");
    for (title, ylabel, col, log) in [("MSE", "tr M(x)", 2, true), ("Information rate", "bits/s/Hz", 3, false)] {
        let _ = writeln!(s, "set title '{title}'");
        let _ = writeln!(s, "set ylabel '{ylabel}'");
        let _ = writeln!(s, "{}", if log { "set logscale y" } else { "unset logscale y" });
        if !names.is_empty() {
            let parts: Vec<String> = names
                .iter()
                .map(|(n, t)| format!("{n} using 1:{col} with linespoints title '{t}'"))
                .collect();
            let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
        }
    }
    let _ = writeln!(s, "unset multiplot");
    s
}

pub fn emit_plot_script(rows: &[ResultRow], path: &Path) -> Result<()> {
    let image = path.with_extension("png");
    let image = image.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "plot.png".into());
    std::fs::write(path, plot_script(rows, &image))?;
    Ok(())
}

/// On-disk experiment description (TOML).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "d48")]
    pub n_tx: usize,
    #[serde(default = "d48")]
    pub n_rx: usize,
    #[serde(default = "d8")]
    pub n_rf_tx: usize,
    #[serde(default = "d8")]
    pub n_rf_rx: usize,
    #[serde(default = "d8")]
    pub n_streams: usize,
    #[serde(default = "d8")]
    pub n_interferers: usize,
    pub phase_alphabet: Option<Vec<f64>>,
    pub phase_alphabet_deg: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub symbol_power: f64,
    pub snr_grid_db: Option<Vec<f64>>,
    pub bits_grid: Option<Vec<u32>>,
    pub m_grid: Option<Vec<usize>>,
    pub algorithms: Option<Vec<String>>,
    pub trials: Option<usize>,
    pub master_seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub pool_budget: Option<usize>,
    pub pool_m: Option<usize>,
    pub k_best: Option<usize>,
    pub epsilon_floor: Option<f64>,
    pub workers: Option<usize>,
    pub record_timing: Option<bool>,
    pub fs_seed: Option<u64>,
    pub p_tx: Option<f64>,
    pub p_rx: Option<f64>,
    pub p_ris: Option<f64>,
    pub adc_energy_per_step: Option<f64>,
    pub sampling_rate: Option<f64>,
    pub ao_eps: Option<f64>,
    pub ao_max_rounds: Option<usize>,
    pub design_max_iters: Option<usize>,
    pub design_tol: Option<f64>,
    pub design_rho: Option<f64>,
}

fn d48() -> usize {
    48
}
fn d8() -> usize {
    8
}
fn one() -> f64 {
    1.0
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn into_spec(self) -> Result<ExperimentSpec> {
        let alphabet = match (self.phase_alphabet, self.phase_alphabet_deg) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "give phase_alphabet or phase_alphabet_deg, not both".into(),
                ))
            }
            (Some(r), None) => r,
            (None, Some(d)) => d.iter().map(|x| x.to_radians()).collect(),
            (None, None) => SystemConfig::reference(12).phase_alphabet,
        };
        let m_grid = self.m_grid.unwrap_or_else(|| vec![12]);
        let first_m = *m_grid.first().ok_or_else(|| Error::InvalidConfig("m_grid is empty".into()))?;
        let base = SystemConfig::new(
            self.n_tx,
            self.n_rx,
            self.n_rf_tx,
            self.n_rf_rx,
            self.n_streams,
            first_m,
            alphabet,
            self.n_interferers,
            4,
            self.symbol_power,
            10.0,
            0,
        )?;
        let mut spec = ExperimentSpec::new(base);
        spec.m_grid = m_grid;
        if let Some(v) = self.snr_grid_db {
            spec.snr_grid_db = v;
        }
        if let Some(v) = self.bits_grid {
            spec.bits_grid = v;
        }
        if let Some(v) = self.algorithms {
            spec.algorithms = parse_algorithms(&v.join(","))?;
        }
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = self.master_seed {
            spec.master_seed = v;
        }
        spec.output_path = self.output;
        if let Some(v) = self.pool_budget {
            spec.pool_budget = v;
        }
        if let Some(v) = self.pool_m {
            spec.pool_m = v;
        }
        if let Some(v) = self.k_best {
            spec.search.k_best = v;
        }
        if let Some(v) = self.epsilon_floor {
            spec.epsilon_floor = v;
        }
        if let Some(v) = self.workers {
            spec.workers = v;
        }
        if let Some(v) = self.record_timing {
            spec.record_timing = v;
        }
        if let Some(v) = self.fs_seed {
            spec.fs_choice = FsChoice::Random(v);
        }
        let p = &mut spec.power;
        p.p_tx = self.p_tx.unwrap_or(p.p_tx);
        p.p_rx = self.p_rx.unwrap_or(p.p_rx);
        p.p_ris = self.p_ris.unwrap_or(p.p_ris);
        p.c_per_step = self.adc_energy_per_step.unwrap_or(p.c_per_step);
        p.f_s = self.sampling_rate.unwrap_or(p.f_s);
        if let Some(v) = self.ao_eps {
            spec.ao_eps = v;
        }
        if let Some(v) = self.ao_max_rounds {
            spec.ao_max_rounds = v;
        }
        if let Some(v) = self.design_max_iters {
            spec.design.max_iters = v;
        }
        if let Some(v) = self.design_tol {
            spec.design.tol = v;
        }
        if let Some(v) = self.design_rho {
            spec.design.rho = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Read and validate an experiment file.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    ConfigFile::parse(&text)?.into_spec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("foo".parse::<Algorithm>().is_err());
        assert_eq!(parse_algorithms("tmh,es,tmh").unwrap(), vec![Algorithm::Es, Algorithm::Tmh]);
    }

    #[test]
    fn ten_digits() {
        assert_eq!(fmt_float(1234.5), "1.234500000e3");
        assert_eq!(fmt_float(-30.0), "-3.000000000e1");
    }

    #[test]
    fn empty_csv_is_header() {
        assert_eq!(csv_string(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ConfigFile::parse("bogus = 3").is_err());
    }
}
