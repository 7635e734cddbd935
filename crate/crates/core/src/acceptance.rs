//! The verification suite: eleven numbered criteria with tolerances and time limits.

use std::fmt;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{ao1_init, ao2_init, alternating_opt};
use crate::channel::synthesize_channel;
use crate::config::{stable_hash, PowerModel, SystemConfig};
use crate::error::Result;
use crate::harness::{run_experiment, Algorithm, ExperimentSpec, ResultRow};
use crate::idbp::{idbp_search, SearchConfig, TransitionPolicy};
use crate::linalg::{c, frob};
use crate::metrics::{
    aqnm_alpha, crlb, crlb_expanded, evaluate_link, gain_matrix, info_rate, info_rate_gain_form,
    monte_carlo_mse, mse_matrix, noise_cov, objective_f, quant_noise_cov, strictly_below, GainModel,
    LeafObjective,
};
use crate::priors::{
    entropy_rate, estimate_prior, is_strongly_typical, sample_candidate_pool,
    weak_typicality_gap, ConditionalPrior,
};
use crate::transceiver::{DesignOptions, FsChoice, TransceiverSet};

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
    pub limit_s: f64,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} {}: {} ({:.1} s of {:.0} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed_s,
            self.limit_s
        )
    }
}

fn timed(
    id: u32,
    title: &'static str,
    limit_s: f64,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionOutcome {
    let t0 = Instant::now();
    let (ok, detail) = match body() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let elapsed_s = t0.elapsed().as_secs_f64();
    let within = elapsed_s <= limit_s;
    CriterionOutcome {
        id,
        title,
        passed: ok && within,
        detail: if within {
            detail
        } else {
            format!("{detail}; time limit exceeded")
        },
        elapsed_s,
        limit_s,
    }
}

struct Link {
    cfg: SystemConfig,
    channel: crate::channel::ChannelRealization,
    set: TransceiverSet,
}

fn link(cfg: SystemConfig, seed: u64, fs: FsChoice, phases: &[usize]) -> Result<Link> {
    let cfg = cfg.with_seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channel = synthesize_channel(&cfg, &mut rng)?;
    let (set, _) = TransceiverSet::design(&channel, &cfg, DesignOptions::default(), fs, phases)?;
    Ok(Link { cfg, channel, set })
}

fn random_phases(rng: &mut ChaCha8Rng, k: usize, m: usize) -> Vec<usize> {
    (0..m).map(|_| rng.random_range(0..k)).collect()
}

/// Unit-gain links over 20 seeds and three resolutions: the MSE matrix equals the bound.
pub fn criterion_1() -> CriterionOutcome {
    timed(1, "CRLB identity at K = I", 10.0, || {
        let mut worst = 0.0f64;
        let mut worst_expanded = 0.0f64;
        for seed in 0..20u64 {
            for b in [2u32, 3, 4] {
                let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[1, seed, b as u64]));
                let snr = rng.random_range(-30.0..30.0);
                let base = SystemConfig::reference(12).with_bits(b).with_snr(snr);
                let phases = random_phases(&mut rng, 3, 12);
                let fs = FsChoice::Random(seed);
                let mut l = link(base, seed, fs, &phases)?;
                let alpha = aqnm_alpha(b)?;
                l.set.w_s /= c(alpha, 0.0);
                let k = gain_matrix(&l.channel, &l.set, &l.cfg, &phases, GainModel::Ideal)?;
                let h = l.channel.effective(&phases, &l.cfg.phase_alphabet)?;
                let dq2 = quant_noise_cov(&l.set.w_a_h, &h, alpha)?;
                let w = l.set.w();
                let wd = l.set.w_d_h();
                let cov = noise_cov(&w, &wd, &dq2, alpha, l.cfg.noise_var)?;
                let m = mse_matrix(&k, &w, &wd, &dq2, alpha, l.cfg.noise_var, 1.0)?;
                let bound = crlb(&k, &cov)?;
                worst = worst.max(frob(&(&m - &bound)) / frob(&m));
                let exp = crlb_expanded(
                    &l.set.f_s,
                    &phases,
                    &l.cfg.phase_alphabet,
                    &l.set.w_a_h,
                    &l.set.w_d_tilde_h,
                    &dq2,
                    alpha,
                    l.cfg.noise_var,
                )?;
                worst_expanded = worst_expanded.max(frob(&(&exp - &bound)) / frob(&bound));
            }
        }
        Ok((
            worst <= 1e-9 && worst_expanded <= 1e-8,
            format!("max relative gap {worst:.2e}, closed form {worst_expanded:.2e}"),
        ))
    })
}

/// Both rate expressions agree on fuzzed instances: a random gain `K` and the
/// noise covariance of a random link.
pub fn criterion_2() -> CriterionOutcome {
    timed(2, "rate formula equivalence", 5.0, || {
        let mut worst = 0.0f64;
        for i in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[2, i]));
            let b = rng.random_range(1..=8u32);
            let snr = rng.random_range(-30.0..30.0);
            let p = rng.random_range(0.1..10.0);
            let mut base = SystemConfig::reference(12).with_bits(b);
            base.symbol_power = p;
            let base = base.with_snr(snr);
            let phases = random_phases(&mut rng, 3, 12);
            let l = link(base, i, FsChoice::Random(i), &phases)?;
            let alpha = aqnm_alpha(b)?;
            let k = crate::linalg::cn_matrix(&mut rng, l.cfg.n_streams, l.cfg.n_streams) * c(alpha, 0.0);
            let h = l.channel.effective(&phases, &l.cfg.phase_alphabet)?;
            let dq2 = quant_noise_cov(&l.set.w_a_h, &h, alpha)?;
            let cov = noise_cov(&l.set.w(), &l.set.w_d_h(), &dq2, alpha, l.cfg.noise_var)?;
            let r7 = info_rate_gain_form(&k, &cov, p)?;
            let r8 = info_rate(&crlb(&k, &cov)?, p, l.cfg.n_streams)?;
            worst = worst.max((r7 - r8).abs() / r7.abs().max(1e-300));
        }
        Ok((worst <= 1e-9, format!("max relative difference {worst:.2e} over 100 instances")))
    })
}

/// Bound, rate and efficiency select the same candidate.
pub fn criterion_3() -> CriterionOutcome {
    timed(3, "argmin bound = argmax rate = argmax efficiency", 30.0, || {
        let mut agree = 0;
        let mut rate_ee = 0;
        for set_id in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[3, set_id]));
            let b = rng.random_range(2..=4u32);
            let snr = 5.0 * rng.random_range(-6..=6) as f64;
            let base = SystemConfig::reference(12).with_bits(b).with_snr(snr);
            let l = link(base, set_id, FsChoice::Identity, &[0; 12])?;
            let mut tr = Vec::new();
            let mut rate = Vec::new();
            let mut ee = Vec::new();
            for _ in 0..20 {
                let phases = random_phases(&mut rng, 3, 12);
                let mut set = l.set.clone();
                let (f_s, w_s) =
                    crate::transceiver::finalize_digital(&set.f_s, &phases, &l.cfg.phase_alphabet)?;
                set.f_s = f_s;
                set.w_s = w_s;
                let rep = evaluate_link(&l.channel, &set, &l.cfg, &phases, &PowerModel::default(), GainModel::Ideal)?;
                tr.push(crate::linalg::trace_re(&rep.crlb_matrix));
                rate.push(rep.rate_bits);
                ee.push(rep.energy_eff);
            }
            let argmin = |v: &[f64]| (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b))).unwrap();
            let argmax = |v: &[f64]| (0..v.len()).min_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b))).unwrap();
            let (i_tr, i_rate, i_ee) = (argmin(&tr), argmax(&rate), argmax(&ee));
            if i_rate == i_ee {
                rate_ee += 1;
            }
            if i_tr == i_rate && i_rate == i_ee {
                agree += 1;
            }
        }
        Ok((
            agree == 50,
            format!("{agree}/50 sets agree on all three; rate and efficiency agree in {rate_ee}/50"),
        ))
    })
}

/// Frozen quantization noise makes the objective phase-invariant.
pub fn criterion_4() -> CriterionOutcome {
    timed(4, "Frobenius conjugation invariance", 10.0, || {
        let l = link(SystemConfig::reference(12), 4, FsChoice::Identity, &[0; 12])?;
        let alpha = aqnm_alpha(l.cfg.adc_bits)?;
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let p0 = random_phases(&mut rng, 3, 12);
        let h0 = l.channel.effective(&p0, &l.cfg.phase_alphabet)?;
        let frozen = quant_noise_cov(&l.set.w_a_h, &h0, alpha)?;
        let mut fixed = Vec::new();
        let mut live = Vec::new();
        for _ in 0..100 {
            let p = random_phases(&mut rng, 3, 12);
            let args = (&l.set.w_d_tilde_h, &l.set.w_a_h, l.cfg.noise_var, alpha);
            fixed.push(objective_f(&p, &l.cfg.phase_alphabet, args.0, args.1, args.2, args.3, &frozen)?);
            let h = l.channel.effective(&p, &l.cfg.phase_alphabet)?;
            let dq2 = quant_noise_cov(&l.set.w_a_h, &h, alpha)?;
            live.push(objective_f(&p, &l.cfg.phase_alphabet, args.0, args.1, args.2, args.3, &dq2)?);
        }
        let spread = |v: &[f64]| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (hi - lo) / lo.abs().max(1e-300)
        };
        let (sf, sl) = (spread(&fixed), spread(&live));
        Ok((
            sf <= 1e-10 && sl > 0.0,
            format!("relative spread frozen {sf:.2e}, recomputed {sl:.2e}"),
        ))
    })
}

/// Reference link scaled to `m` elements, with interferers and streams capped at `m - 2`.
pub fn scaled_config(m: usize) -> SystemConfig {
    let mut cfg = SystemConfig::reference(12);
    let cap = m.saturating_sub(2).max(1);
    cfg.n_ris = m;
    cfg.n_interferers = cfg.n_interferers.min(cap);
    cfg.n_streams = cfg.n_streams.min(cap);
    cfg.n_rf_rx = cfg.n_streams;
    cfg
}

/// Configuration of the six-element oracle study.
pub fn oracle_config() -> SystemConfig {
    scaled_config(6)
}

/// Per-trial outcome of the oracle study: `(within lowest 1%, equals optimum)`.
pub fn oracle_trial(seed: u64) -> Result<(bool, bool)> {
    let cfg = oracle_config();
    let l = link(cfg, stable_hash(&[5, seed]), FsChoice::Identity, &[0; 6])?;
    let leaf = LeafObjective::new(&l.channel, &l.set, &l.cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = sample_candidate_pool(&leaf, 3, 6, 729, 729, &mut rng);
    let pool = &all[..16];
    let prior = estimate_prior(pool, 3, 6, crate::priors::EPSILON_FLOOR)?;
    let t = idbp_search(6, &SearchConfig::default(), &prior, TransitionPolicy::Prior, &leaf)?;
    let values: Vec<f64> = all.iter().map(|s| s.objective_value.unwrap()).collect();
    let cut = values[(0.01 * values.len() as f64).ceil() as usize - 1];
    let reaches = |v: f64| !strictly_below(v, t.best_objective);
    Ok((reaches(cut), reaches(values[0])))
}

/// Near-optimality against the full six-element space.
pub fn criterion_5() -> CriterionOutcome {
    timed(5, "oracle near-optimality (M = 6)", 300.0, || {
        let mut top = 0;
        let mut exact = 0;
        for seed in 0..50u64 {
            let (a, b) = oracle_trial(seed)?;
            top += a as usize;
            exact += b as usize;
        }
        Ok((
            top >= 45 && exact >= 25,
            format!("lowest 1% in {top}/50 (need 45), exact optimum in {exact}/50 (need 25)"),
        ))
    })
}

/// Node, MI and leaf counts of single-pass and 2-best traversals.
pub fn criterion_6() -> CriterionOutcome {
    timed(6, "complexity counts", 60.0, || {
        let mut lines = Vec::new();
        let mut ok = true;
        for m in [6usize, 12] {
            let l = link(scaled_config(m), 6 + m as u64, FsChoice::Identity, &vec![0; m])?;
            let leaf = LeafObjective::new(&l.channel, &l.set, &l.cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
            let pool = sample_candidate_pool(&leaf, 3, m, 2000, 16, &mut rng);
            let prior = estimate_prior(&pool, 3, m, crate::priors::EPSILON_FLOOR)?;
            let single = idbp_search(m, &SearchConfig::single_pass(), &prior, TransitionPolicy::Prior, &leaf)?;
            let two = idbp_search(m, &SearchConfig::default(), &prior, TransitionPolicy::Prior, &leaf)?;
            ok &= single.nodes_expanded == m
                && single.mi_evaluations == 3 * m
                && two.nodes_expanded == m * (m + 1) / 2
                && two.leaf_evaluations == m;
            lines.push(format!(
                "M={m}: single {} nodes {} MI, 2-best {} nodes {} leaves",
                single.nodes_expanded, single.mi_evaluations, two.nodes_expanded, two.leaf_evaluations
            ));
        }
        Ok((ok, lines.join("; ")))
    })
}

/// The sweep behind criteria 7 and 8.
pub fn ordering_spec(trials: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(SystemConfig::reference(12));
    spec.bits_grid = vec![4];
    spec.algorithms = vec![Algorithm::Es, Algorithm::Idbp, Algorithm::Tmh, Algorithm::Ao1];
    spec.trials = trials;
    spec.master_seed = 2024;
    spec
}

fn mean_by(rows: &[ResultRow], algo: Algorithm, snr: f64, field: impl Fn(&ResultRow) -> f64) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.algorithm == algo && r.snr_db == snr)
        .map(field)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Evaluate ordering and runtime from sweep rows; `elapsed_s` is the sweep time.
pub fn ordering_outcomes(rows: &[ResultRow], snrs: &[f64], elapsed_s: f64) -> (CriterionOutcome, CriterionOutcome) {
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    let mut es_ok = 0;
    let mut vs_tmh = 0;
    let mut vs_ao1 = 0;
    for &snr in snrs {
        let m = |a| mean_by(rows, a, snr, |r| r.mse);
        let (es, idbp, tmh, ao1) = (m(Algorithm::Es), m(Algorithm::Idbp), m(Algorithm::Tmh), m(Algorithm::Ao1));
        es_ok += (es <= idbp) as usize;
        vs_tmh += (idbp <= tmh) as usize;
        vs_ao1 += (idbp <= ao1) as usize;
    }
    let n = snrs.len();
    let need = (0.8 * n as f64).ceil() as usize;
    let ok7 = errors == 0 && es_ok == n && vs_tmh >= need && vs_ao1 >= need;
    let c7 = CriterionOutcome {
        id: 7,
        title: "ordering against baselines (M = 12, b = 4)",
        passed: ok7 && elapsed_s <= 1800.0,
        detail: format!(
            "ES <= IDBP at {es_ok}/{n}, IDBP <= TMH at {vs_tmh}/{n}, IDBP <= AO1 at {vs_ao1}/{n} (need {need}), {errors} failed rows"
        ),
        elapsed_s,
        limit_s: 1800.0,
    };
    let wall = |a: Algorithm| rows.iter().filter(|r| r.algorithm == a).map(|r| r.wall_time_ms).sum::<f64>();
    let ratio = wall(Algorithm::Es) / wall(Algorithm::Idbp);
    let c8 = CriterionOutcome {
        id: 8,
        title: "runtime ratio ES / IDBP",
        passed: ratio >= 10.0,
        detail: format!("ratio {ratio:.1} (need 10)"),
        elapsed_s,
        limit_s: 1800.0,
    };
    (c7, c8)
}

/// Criteria 7 and 8 from one sweep of 20 trials per SNR.
pub fn criteria_7_8() -> (CriterionOutcome, CriterionOutcome) {
    let spec = ordering_spec(20);
    let t0 = Instant::now();
    match run_experiment(&spec) {
        Ok(rows) => ordering_outcomes(&rows, &spec.snr_grid_db, t0.elapsed().as_secs_f64()),
        Err(e) => {
            let fail = |id, title| CriterionOutcome {
                id,
                title,
                passed: false,
                detail: format!("error: {e}"),
                elapsed_s: t0.elapsed().as_secs_f64(),
                limit_s: 1800.0,
            };
            (
                fail(7, "ordering against baselines (M = 12, b = 4)"),
                fail(8, "runtime ratio ES / IDBP"),
            )
        }
    }
}

/// A random prior over three states with rows bounded away from the floor.
pub fn random_prior(rng: &mut ChaCha8Rng, uniform_initial: bool) -> Result<ConditionalPrior> {
    let row = |rng: &mut ChaCha8Rng| (0..3).map(|_| rng.random_range(0.5..1.0)).collect::<Vec<f64>>();
    let initial = if uniform_initial { vec![1.0; 3] } else { row(rng) };
    let rows: Vec<Vec<f64>> = (0..3).map(|_| row(rng)).collect();
    ConditionalPrior::new(&initial, &rows, crate::priors::EPSILON_FLOOR)
}

/// Strong typicality implies the weak-typicality bound.
pub fn criterion_9() -> CriterionOutcome {
    timed(9, "typicality implication (M = 200)", 60.0, || {
        let m = 200;
        let delta = 0.2;
        let mut typical = 0;
        let mut counter = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in 0..10 {
            let prior = random_prior(&mut rng, p % 2 == 0)?;
            let h = entropy_rate(&prior, m);
            for _ in 0..100 {
                let s = prior.sample(m, &mut rng);
                if is_strongly_typical(&s, &prior, delta).typical {
                    typical += 1;
                    if weak_typicality_gap(&s, &prior, m) > (delta * h).abs() / m as f64 + 1e-6 {
                        counter += 1;
                    }
                }
            }
        }
        Ok((
            counter == 0,
            format!("{counter} counterexamples among {typical} typical of 1000 sequences"),
        ))
    })
}

/// Analytic MSE against symbol-level simulation.
pub fn criterion_10() -> CriterionOutcome {
    timed(10, "Monte Carlo MSE validation", 120.0, || {
        let points = [(-10.0, 2u32), (0.0, 3), (10.0, 4), (20.0, 2), (30.0, 4)];
        let mut worst = 0.0f64;
        for (i, &(snr, b)) in points.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[10, i as u64]));
            let phases = random_phases(&mut rng, 3, 12);
            let base = SystemConfig::reference(12).with_bits(b).with_snr(snr);
            let l = link(base, 100 + i as u64, FsChoice::Identity, &phases)?;
            let rep = evaluate_link(&l.channel, &l.set, &l.cfg, &phases, &PowerModel::default(), GainModel::Composed)?;
            let mc = monte_carlo_mse(
                &rep.k_eff,
                &l.set.w(),
                &l.set.w_d_h(),
                &rep.dq2,
                rep.alpha,
                l.cfg.noise_var,
                l.cfg.symbol_power,
                100_000,
                &mut rng,
            );
            worst = worst.max((mc - rep.mse).abs() / rep.mse);
        }
        Ok((worst <= 0.02, format!("max relative error {:.3}%", 100.0 * worst)))
    })
}

/// Alternating optimization never increases its loss.
pub fn criterion_11() -> CriterionOutcome {
    timed(11, "AO monotonicity", 120.0, || {
        let mut violations = 0;
        let mut rounds = 0;
        let mut converged = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[11, seed]));
            let snr = 5.0 * rng.random_range(-6..=6) as f64;
            let base = SystemConfig::reference(12).with_snr(snr);
            let l = link(base, seed, FsChoice::Identity, &[0; 12])?;
            for init in [ao1_init(&l.channel, &l.cfg, DesignOptions::default())?, ao2_init(&l.channel, &l.cfg, DesignOptions::default(), &mut rng)?] {
                let r = alternating_opt(&l.channel, &l.cfg, init, 1e-6, 20, DesignOptions::default())?;
                violations += r.mse_history.windows(2).filter(|w| w[1] > w[0]).count();
                rounds += r.rounds;
                converged += r.converged as usize;
            }
        }
        Ok((
            violations == 0,
            format!("{violations} increases over {rounds} rounds, {converged}/40 runs converged"),
        ))
    })
}

/// Run the selected criteria (all when `only` is empty) in order.
pub fn run_selected(only: &[u32]) -> Vec<CriterionOutcome> {
    let want = |i: u32| only.is_empty() || only.contains(&i);
    let mut out = Vec::new();
    let singles: [(u32, fn() -> CriterionOutcome); 6] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
    ];
    for (i, f) in singles {
        if want(i) {
            out.push(f());
        }
    }
    if want(7) || want(8) {
        let (a, b) = criteria_7_8();
        if want(7) {
            out.push(a);
        }
        if want(8) {
            out.push(b);
        }
    }
    let rest: [(u32, fn() -> CriterionOutcome); 3] = [(9, criterion_9), (10, criterion_10), (11, criterion_11)];
    for (i, f) in rest {
        if want(i) {
            out.push(f());
        }
    }
    out
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_line_format() {
        let o = CriterionOutcome {
            id: 4,
            title: "demo",
            passed: false,
            detail: "x".into(),
            elapsed_s: 1.26,
            limit_s: 10.0,
        };
        assert_eq!(o.to_string(), "[FAIL] criterion  4 demo: x (1.3 s of 10 s)");
    }

    #[test]
    fn time_limit_turns_pass_into_fail() {
        let o = timed(1, "slow", -1.0, || Ok((true, "ok".into())));
        assert!(!o.passed);
        assert!(o.detail.ends_with("time limit exceeded"));
        let e = timed(2, "err", 10.0, || Err(crate::Error::Singular));
        assert!(!e.passed && e.detail.starts_with("error:"));
    }

    #[test]
    fn scaled_configs_validate() {
        for m in [4, 6, 8, 12, 16] {
            scaled_config(m).validate().unwrap();
        }
        assert_eq!(scaled_config(16).n_interferers, 8);
    }
}
