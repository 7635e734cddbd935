//! Exhaustive search, the trace-maximization heuristic and alternating optimization.

use rand::Rng;
use rayon::prelude::*;

use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{c, cis, CMat, CVec};
use crate::metrics::{aqnm_alpha, decode_index, strictly_below, Objective};
use crate::priors::PhaseSequence;
use crate::transceiver::{
    design_hybrid_combiner, design_hybrid_precoder, finalize_digital, DesignOptions, TransceiverSet,
};

/// Largest space the exhaustive search accepts by default.
pub const DEFAULT_ES_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EsResult {
    pub sequence: PhaseSequence,
    pub objective: f64,
    pub evaluations: u64,
}

/// Evaluate all `K^M` sequences; the lexicographically first minimizer wins,
/// with near ties decided as in [`Objective::scan`].
pub fn exhaustive_search<O: Objective + ?Sized>(
    leaf_objective: &O,
    k: usize,
    m: usize,
    progress_cap: u128,
) -> Result<EsResult> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidConfig("empty search space".into()));
    }
    let size = (k as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if size > progress_cap || size > u64::MAX as u128 {
        return Err(Error::SpaceTooLarge {
            size,
            cap: progress_cap,
        });
    }
    let n = size as u64;
    let chunk = 4096u64;
    let chunks = n.div_ceil(chunk);
    let (value, index) = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk;
            leaf_objective.scan(k, m, lo, (lo + chunk).min(n))
        })
        .reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| {
                let tied = !strictly_below(b.0, a.0) && !strictly_below(a.0, b.0);
                if strictly_below(b.0, a.0) || (tied && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    let mut seq = vec![0usize; m];
    decode_index(index, k, &mut seq);
    Ok(EsResult {
        sequence: PhaseSequence::scored(seq, value),
        objective: value,
        evaluations: n,
    })
}

/// `Z = (R F F^H R^H)^T o (P^H W^H W P)`, so that `v^H Z v = ||W P diag(v) R F||_F^2`.
pub fn coupling_matrix(channel: &ChannelRealization, set: &TransceiverSet) -> CMat {
    let rf = &channel.r_mat * set.f();
    let a = (&rf * rf.adjoint()).transpose();
    let wp = set.w() * &channel.p_mat;
    let b = wp.adjoint() * wp;
    a.component_mul(&b)
}

/// Principal eigenvector of a Hermitian PSD matrix by power iteration from the
/// first basis vector that `z` does not annihilate. The result is normalized
/// with its first nonzero entry real and positive.
pub fn principal_eigenvector(z: &CMat, max_steps: usize, tol: f64) -> Result<(CVec, f64)> {
    let n = z.nrows();
    if n == 0 || z.ncols() != n {
        return Err(Error::DimensionMismatch("square matrix required".into()));
    }
    let scale = z.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        let mut e = CVec::zeros(n);
        e[0] = c(1.0, 0.0);
        return Ok((e, 0.0));
    }
    let mut v = CVec::zeros(n);
    let start = (0..n).find(|&i| z.column(i).norm() > 1e-12 * scale).unwrap_or(0);
    v[start] = c(1.0, 0.0);
    for _ in 0..max_steps {
        let w = z * &v;
        let lambda = v.dotc(&w).re;
        let resid = (&w - &v * c(lambda, 0.0)).norm();
        if resid <= tol * scale {
            return Ok((fix_phase(v), lambda));
        }
        let nw = w.norm();
        if nw == 0.0 {
            return Err(Error::EigFailure);
        }
        v = w / c(nw, 0.0);
    }
    Err(Error::EigFailure)
}

fn fix_phase(v: CVec) -> CVec {
    match v.iter().find(|z| z.norm() > 1e-12) {
        Some(first) => {
            let rot = cis(-first.arg());
            v * rot
        }
        None => v,
    }
}

/// Nearest alphabet entry on the circle for each angle; lowest index on ties.
pub fn quantize_angles(angles: &[f64], alphabet: &[f64]) -> Vec<usize> {
    let two_pi = 2.0 * std::f64::consts::PI;
    angles
        .iter()
        .map(|&a| {
            let mut best = 0;
            let mut dist = f64::INFINITY;
            for (i, &p) in alphabet.iter().enumerate() {
                let d = (a - p).rem_euclid(two_pi);
                let d = d.min(two_pi - d);
                if d < dist - 1e-15 {
                    dist = d;
                    best = i;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmhResult {
    pub sequence: PhaseSequence,
    pub eigenvalue: f64,
}

/// Eigenvector heuristic for the coupling matrix of an arbitrary `Z`.
pub fn tmh_from_coupling(z: &CMat, alphabet: &[f64]) -> Result<TmhResult> {
    let (v, lambda) = principal_eigenvector(z, 10_000, 1e-10)?;
    let angles: Vec<f64> = v.iter().map(|x| x.arg()).collect();
    Ok(TmhResult {
        sequence: PhaseSequence::new(quantize_angles(&angles, alphabet)),
        eigenvalue: lambda,
    })
}

/// Trace-maximization heuristic on a designed link.
pub fn tmh(channel: &ChannelRealization, set: &TransceiverSet, cfg: &SystemConfig) -> Result<TmhResult> {
    tmh_from_coupling(&coupling_matrix(channel, set), &cfg.phase_alphabet)
}

/// `v^H Z v` for the phasor vector of `phases`.
pub fn trace_form(z: &CMat, phases: &[usize], phasors: &[num_complex::Complex64]) -> f64 {
    let v = CVec::from_iterator(phases.len(), phases.iter().map(|&p| phasors[p]));
    v.dotc(&(z * &v)).re
}

/// Exhaustive maximization of the trace form.
pub fn tmh_exhaustive(
    channel: &ChannelRealization,
    set: &TransceiverSet,
    cfg: &SystemConfig,
    cap: u128,
) -> Result<EsResult> {
    let z = coupling_matrix(channel, set);
    let phasors: Vec<_> = cfg.phase_alphabet.iter().map(|&t| cis(t)).collect();
    let obj = |s: &[usize]| -trace_form(&z, s, &phasors);
    exhaustive_search(&obj, cfg.k(), cfg.n_ris, cap)
}

/// `tr M(x)` of the composed chain, with `D_q^2` taken at the current phases.
pub fn ao_loss(
    channel: &ChannelRealization,
    set: &TransceiverSet,
    cfg: &SystemConfig,
    phases: &[usize],
) -> Result<f64> {
    let alpha = aqnm_alpha(cfg.adc_bits)?;
    let m = cfg.n_ris;
    let phasors: Vec<_> = cfg.phase_alphabet.iter().map(|&t| cis(t)).collect();
    let d: Vec<_> = phases.iter().map(|&p| phasors[p]).collect();
    let w = set.w();
    let wd = set.w_d_h();
    let wp = &w * &channel.p_mat;
    let rf = &channel.r_mat * set.f();
    let ap = &set.w_a_h * &channel.p_mat;
    let n = w.nrows();
    let mut k_eff = CMat::zeros(n, n);
    for i in 0..m {
        k_eff += wp.column(i) * rf.row(i) * (d[i] * alpha);
    }
    let e = k_eff - CMat::identity(n, n);
    let bias: f64 = e.iter().map(|z| z.norm_sqr()).sum::<f64>() * cfg.symbol_power;
    let noise: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>() * alpha * alpha * cfg.noise_var;
    let s = alpha * (1.0 - alpha);
    let mut a_phi = ap.clone();
    for i in 0..m {
        let di = d[i];
        a_phi.column_mut(i).iter_mut().for_each(|z| *z *= di);
    }
    let h_rows = a_phi * &channel.r_mat;
    let mut quant = 0.0;
    for kq in 0..h_rows.nrows() {
        let dq = s * (h_rows.row(kq).iter().map(|z| z.norm_sqr()).sum::<f64>() + 1.0);
        quant += dq * wd.column(kq).iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok(bias + noise + quant)
}

/// Starting point of alternating optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct AoInit {
    pub transceivers: TransceiverSet,
    pub phases: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoResult {
    pub transceivers: TransceiverSet,
    pub phases: PhaseSequence,
    /// Loss at the start and after every round.
    pub mse_history: Vec<f64>,
    pub converged: bool,
    pub rounds: usize,
    pub loss_evaluations: usize,
}

/// Nearest alphabet entry to zero radians for every element.
pub fn zero_phases(cfg: &SystemConfig) -> Vec<usize> {
    vec![quantize_angles(&[0.0], &cfg.phase_alphabet)[0]; cfg.n_ris]
}

/// Zero phases with the standard hybrid design.
pub fn ao1_init(channel: &ChannelRealization, cfg: &SystemConfig, opts: DesignOptions) -> Result<AoInit> {
    let phases = zero_phases(cfg);
    let (set, _) = TransceiverSet::design(channel, cfg, opts, Default::default(), &phases)?;
    Ok(AoInit {
        transceivers: set,
        phases,
    })
}

/// Random phases with random constant-modulus analog blocks.
pub fn ao2_init<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    cfg: &SystemConfig,
    opts: DesignOptions,
    rng: &mut R,
) -> Result<AoInit> {
    use rand::RngExt;
    let phases: Vec<usize> = (0..cfg.n_ris).map(|_| rng.random_range(0..cfg.k())).collect();
    let set = TransceiverSet::random_analog(channel, cfg, Default::default(), &phases, opts.rho, rng)?;
    Ok(AoInit {
        transceivers: set,
        phases,
    })
}

/// Block-cyclic minimization of `tr M(x)`: precoder, combiner, a greedy sweep
/// over the RIS elements, then the final digital pair. A block update is kept
/// only if the loss does not grow.
pub fn alternating_opt(
    channel: &ChannelRealization,
    cfg: &SystemConfig,
    init: AoInit,
    eps_t: f64,
    max_rounds: usize,
    opts: DesignOptions,
) -> Result<AoResult> {
    if !(eps_t > 0.0) {
        return Err(Error::InvalidConfig("eps_t must be positive".into()));
    }
    let mut set = init.transceivers;
    let mut phases = init.phases;
    let mut evals = 1;
    let mut loss = ao_loss(channel, &set, cfg, &phases)?;
    let mut history = vec![loss];
    let pre = design_hybrid_precoder(&channel.r_mat, cfg, opts)?;
    let comb = design_hybrid_combiner(&channel.p_mat, cfg, opts)?;
    let mut converged = false;
    let mut rounds = 0;

    let try_set = |cand: TransceiverSet, set: &mut TransceiverSet, loss: &mut f64, phases: &[usize], evals: &mut usize| -> Result<()> {
        let l = ao_loss(channel, &cand, cfg, phases)?;
        *evals += 1;
        if l <= *loss {
            *set = cand;
            *loss = l;
        }
        Ok(())
    };

    while rounds < max_rounds {
        rounds += 1;
        let start = loss;

        let mut cand = set.clone();
        cand.f_a = pre.analog.clone();
        cand.f_d_tilde = pre.digital.clone();
        try_set(cand, &mut set, &mut loss, &phases, &mut evals)?;

        let mut cand = set.clone();
        cand.w_a_h = comb.analog.clone();
        cand.w_d_tilde_h = comb.digital.clone();
        try_set(cand, &mut set, &mut loss, &phases, &mut evals)?;

        for i in 0..cfg.n_ris {
            let current = phases[i];
            let mut best = (loss, current);
            for s in 0..cfg.k() {
                if s == current {
                    continue;
                }
                phases[i] = s;
                let l = ao_loss(channel, &set, cfg, &phases)?;
                evals += 1;
                if l < best.0 {
                    best = (l, s);
                }
            }
            phases[i] = best.1;
            loss = best.0;
        }

        let (f_s, w_s) = finalize_digital(&set.f_s, &phases, &cfg.phase_alphabet)?;
        let mut cand = set.clone();
        cand.f_s = f_s;
        cand.w_s = w_s;
        try_set(cand, &mut set, &mut loss, &phases, &mut evals)?;

        history.push(loss);
        if start - loss <= eps_t {
            converged = true;
            break;
        }
    }
    Ok(AoResult {
        transceivers: set,
        phases: PhaseSequence::scored(phases, loss),
        mse_history: history,
        converged,
        rounds,
        loss_evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_space() {
        let f = |s: &[usize]| ((s[0] as f64) - 1.0).powi(2) + s[1] as f64;
        let r = exhaustive_search(&f, 2, 2, 100).unwrap();
        assert_eq!(r.evaluations, 4);
        assert_eq!(r.sequence.phases, vec![1, 0]);
    }

    #[test]
    fn constant_objective_first_sequence() {
        let f = |_: &[usize]| 3.0;
        let r = exhaustive_search(&f, 3, 7, 1 << 20).unwrap();
        assert_eq!(r.sequence.phases, vec![0; 7]);
    }

    #[test]
    fn refuses_huge_space() {
        let f = |_: &[usize]| 0.0;
        assert!(matches!(
            exhaustive_search(&f, 3, 40, DEFAULT_ES_CAP),
            Err(Error::SpaceTooLarge { .. })
        ));
    }

    #[test]
    fn identity_coupling() {
        let alphabet = [0.5, 0.1, 3.0];
        let r = tmh_from_coupling(&CMat::identity(4, 4), &alphabet).unwrap();
        assert_eq!(r.sequence.phases, vec![1; 4]);
    }

    #[test]
    fn quantization_wraps() {
        let a = [0.1, 6.2];
        assert_eq!(quantize_angles(&[-0.05, 0.09, 3.0], &a), vec![1, 0, 0]);
    }
}
