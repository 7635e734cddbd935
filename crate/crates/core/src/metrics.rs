//! Quantizer model, MSE and CRLB matrices, the RIS objective, rate and energy efficiency.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{phase_matrix, ChannelRealization};
use crate::config::{PowerModel, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{
    c, cis, cn, frob2, inverse, log2_abs_det, real_diag, trace_re, CMat, CVec,
};
use crate::transceiver::TransceiverSet;

/// Anything that scores a phase sequence; lower is better.
pub trait Objective: Sync {
    fn eval(&self, phases: &[usize]) -> f64;

    /// Smallest value over the base-`k` indices `lo..hi` of length-`m` sequences,
    /// with NaN ranked last and ties going to the lower index. Values within a
    /// relative [`TIE_RTOL`] of each other count as tied.
    fn scan(&self, k: usize, m: usize, lo: u64, hi: u64) -> (f64, u64) {
        let mut seq = vec![0usize; m];
        let mut best = (f64::INFINITY, u64::MAX);
        for idx in lo..hi {
            decode_index(idx, k, &mut seq);
            let v = nan_last(self.eval(&seq));
            if best.1 == u64::MAX || strictly_below(v, best.0) {
                best = (v, idx);
            }
        }
        best
    }
}

/// Write the base-`k` digits of `idx` into `out`, most significant first.
pub fn decode_index(mut idx: u64, k: usize, out: &mut [usize]) {
    for pos in (0..out.len()).rev() {
        out[pos] = (idx % k as u64) as usize;
        idx /= k as u64;
    }
}

/// Relative gap below which two objective values are treated as equal.
pub const TIE_RTOL: f64 = 1e-12;

/// `a < b` by more than the tie tolerance.
pub fn strictly_below(a: f64, b: f64) -> bool {
    if !b.is_finite() {
        return a < b;
    }
    a < b - TIE_RTOL * b.abs()
}

fn nan_last(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

impl<F> Objective for F
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    fn eval(&self, phases: &[usize]) -> f64 {
        self(phases)
    }
}

/// AQNM gain `1 - (pi sqrt3 / 2) 2^{-2b}`.
pub fn aqnm_alpha(b: u32) -> Result<f64> {
    if b < 1 {
        return Err(Error::InvalidBits(b));
    }
    Ok(1.0 - PI * 3f64.sqrt() / 2.0 * 2f64.powi(-2 * b as i32))
}

/// Gain and noise covariance of the linearized quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantModel {
    pub adc_bits: u32,
    pub alpha: f64,
    pub dq2: Vec<f64>,
}

impl QuantModel {
    pub fn new(adc_bits: u32, w_a_h: &CMat, h_eff: &CMat) -> Result<QuantModel> {
        let alpha = aqnm_alpha(adc_bits)?;
        let dq2 = quant_noise_cov(w_a_h, h_eff, alpha)?;
        Ok(QuantModel {
            adc_bits,
            alpha,
            dq2,
        })
    }
}

/// Diagonal of `alpha (1 - alpha) diag(W_A^H H H^H W_A + I)`.
pub fn quant_noise_cov(w_a_h: &CMat, h_eff: &CMat, alpha: f64) -> Result<Vec<f64>> {
    if w_a_h.ncols() != h_eff.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "W_A^H has {} columns, H has {} rows",
            w_a_h.ncols(),
            h_eff.nrows()
        )));
    }
    let a = w_a_h * h_eff;
    let s = alpha * (1.0 - alpha);
    Ok((0..a.nrows())
        .map(|k| s * (a.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>() + 1.0))
        .collect())
}

/// Noise covariance `C = alpha^2 sigma^2 W W^H + W_D^H D_q^2 W_D`.
pub fn noise_cov(w: &CMat, w_d_h: &CMat, dq2: &[f64], alpha: f64, sigma_n2: f64) -> Result<CMat> {
    if w_d_h.ncols() != dq2.len() || w.nrows() != w_d_h.nrows() {
        return Err(Error::DimensionMismatch("noise covariance blocks".into()));
    }
    let ww = w * w.adjoint() * c(alpha * alpha * sigma_n2, 0.0);
    Ok(ww + w_d_h * real_diag(dq2) * w_d_h.adjoint())
}

/// `M(x) = p (K - I)(K - I)^H + alpha^2 sigma^2 W W^H + W_D^H D_q^2 W_D`.
pub fn mse_matrix(
    k_eff: &CMat,
    w: &CMat,
    w_d_h: &CMat,
    dq2: &[f64],
    alpha: f64,
    sigma_n2: f64,
    p: f64,
) -> Result<CMat> {
    let n = k_eff.nrows();
    if k_eff.ncols() != n || w.nrows() != n {
        return Err(Error::DimensionMismatch("K must be N x N and match W".into()));
    }
    let e = k_eff - CMat::identity(n, n);
    let bias = &e * e.adjoint() * c(p, 0.0);
    Ok(bias + noise_cov(w, w_d_h, dq2, alpha, sigma_n2)?)
}

/// `(K^H C^{-1} K)^{-1}`.
pub fn crlb(k_eff: &CMat, noise_cov_c: &CMat) -> Result<CMat> {
    let ci = inverse(noise_cov_c)?;
    inverse(k_eff)?;
    let fisher = k_eff.adjoint() * ci * k_eff;
    let out = inverse(&fisher)?;
    Ok((&out + out.adjoint()) * c(0.5, 0.0))
}

/// Closed form of the bound when the chain gain is `alpha W_S Phi F_S` with
/// `W_S = (1/alpha) F_S^+ Phi^{-1}`:
/// `F_S^+ [sigma^2 Phi^{-1} W~ Phi + alpha^{-2} Phi^{-1} W~_D^H D_q^2 W~_D Phi] F_S^{+H}`,
/// where `W~ = W~_D^H W_A^H W_A W~_D`.
pub fn crlb_expanded(
    f_s: &CMat,
    phases: &[usize],
    alphabet: &[f64],
    w_a_h: &CMat,
    w_d_tilde_h: &CMat,
    dq2: &[f64],
    alpha: f64,
    sigma_n2: f64,
) -> Result<CMat> {
    let phi = phase_matrix(phases, alphabet)?;
    let phi_inv = phi.adjoint();
    let wt = w_d_tilde_h * w_a_h * w_a_h.adjoint() * w_d_tilde_h.adjoint();
    let q = w_d_tilde_h * real_diag(dq2) * w_d_tilde_h.adjoint();
    let inner = (&phi_inv * wt * &phi) * c(sigma_n2, 0.0)
        + (&phi_inv * q * &phi) * c(1.0 / (alpha * alpha), 0.0);
    let fs_pinv = crate::linalg::pinv(f_s, crate::linalg::PINV_TOL).0;
    Ok(&fs_pinv * inner * fs_pinv.adjoint())
}

/// `||Phi^{-1} W~_D^H [sigma^2 W_A^H W_A + alpha^{-2} D_q^2] W~_D Phi||_F^2`.
pub fn objective_f(
    phases: &[usize],
    alphabet: &[f64],
    w_d_tilde_h: &CMat,
    w_a_h: &CMat,
    sigma_n2: f64,
    alpha: f64,
    dq2: &[f64],
) -> Result<f64> {
    if w_d_tilde_h.nrows() != phases.len() || w_d_tilde_h.ncols() != dq2.len() {
        return Err(Error::DimensionMismatch("objective blocks".into()));
    }
    let phi = phase_matrix(phases, alphabet)?;
    let bracket = w_a_h * w_a_h.adjoint() * c(sigma_n2, 0.0)
        + real_diag(dq2) * c(1.0 / (alpha * alpha), 0.0);
    let x = phi.adjoint() * w_d_tilde_h * bracket * w_d_tilde_h.adjoint() * phi;
    Ok(frob2(&x))
}

/// `N log2 p + log2 det(M^{-1} + I/p)`.
pub fn info_rate(mse_mat: &CMat, p: f64, n_streams: usize) -> Result<f64> {
    if mse_mat.nrows() != n_streams || mse_mat.ncols() != n_streams {
        return Err(Error::DimensionMismatch("rate: matrix must be N x N".into()));
    }
    let inv = inverse(mse_mat)?;
    let a = inv + CMat::identity(n_streams, n_streams) * c(1.0 / p, 0.0);
    Ok(n_streams as f64 * p.log2() + log2_abs_det(&a)?)
}

/// `log2 det(p K K^H C^{-1} + I)`.
pub fn info_rate_gain_form(k_eff: &CMat, noise_cov_c: &CMat, p: f64) -> Result<f64> {
    let n = k_eff.nrows();
    let a = k_eff * k_eff.adjoint() * inverse(noise_cov_c)? * c(p, 0.0) + CMat::identity(n, n);
    log2_abs_det(&a)
}

/// Rate divided by total power, `P_T + P_R + P_RIS + 2 N c f_s 2^b`.
pub fn energy_efficiency(rate: f64, power: &PowerModel, b: u32, n_streams: usize) -> Result<f64> {
    let adc = 2.0 * n_streams as f64 * power.c_per_step * power.f_s * 2f64.powi(b as i32);
    let total = power.p_tx + power.p_rx + power.p_ris + adc;
    if power.p_tx < 0.0 || power.p_rx < 0.0 || power.p_ris < 0.0 || !(total > 0.0) {
        return Err(Error::ZeroPower);
    }
    Ok(rate / total)
}

/// Which end-to-end gain a report assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainModel {
    /// Perfect hybrid inversion: `K = alpha W_S Phi F_S`.
    Ideal,
    /// Full product `K = alpha W P Phi R F`.
    Composed,
}

/// Everything reported about one configured link.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub k_eff: CMat,
    pub noise_cov: CMat,
    pub mse_matrix: CMat,
    pub mse: f64,
    pub crlb_matrix: CMat,
    pub rate_bits: f64,
    pub energy_eff: f64,
    pub objective: f64,
    pub alpha: f64,
    pub dq2: Vec<f64>,
}

/// End-to-end gain `K` under the chosen model.
pub fn gain_matrix(
    channel: &ChannelRealization,
    set: &TransceiverSet,
    cfg: &SystemConfig,
    phases: &[usize],
    model: GainModel,
) -> Result<CMat> {
    let alpha = aqnm_alpha(cfg.adc_bits)?;
    let phi = phase_matrix(phases, &cfg.phase_alphabet)?;
    let k = match model {
        GainModel::Ideal => &set.w_s * phi * &set.f_s,
        GainModel::Composed => set.w() * channel.effective(phases, &cfg.phase_alphabet)? * set.f(),
    };
    Ok(k * c(alpha, 0.0))
}

/// Evaluate every metric of the link for the sequence `phases`.
pub fn evaluate_link(
    channel: &ChannelRealization,
    set: &TransceiverSet,
    cfg: &SystemConfig,
    phases: &[usize],
    power: &PowerModel,
    model: GainModel,
) -> Result<MetricReport> {
    let alpha = aqnm_alpha(cfg.adc_bits)?;
    let h = channel.effective(phases, &cfg.phase_alphabet)?;
    let dq2 = quant_noise_cov(&set.w_a_h, &h, alpha)?;
    let w = set.w();
    let w_d_h = set.w_d_h();
    let k_eff = gain_matrix(channel, set, cfg, phases, model)?;
    let cov = noise_cov(&w, &w_d_h, &dq2, alpha, cfg.noise_var)?;
    let m = mse_matrix(&k_eff, &w, &w_d_h, &dq2, alpha, cfg.noise_var, cfg.symbol_power)?;
    let bound = crlb(&k_eff, &cov)?;
    let rate = info_rate(&bound, cfg.symbol_power, cfg.n_streams)?;
    let ee = energy_efficiency(rate, power, cfg.adc_bits, cfg.n_streams)?;
    let objective = objective_f(
        phases,
        &cfg.phase_alphabet,
        &set.w_d_tilde_h,
        &set.w_a_h,
        cfg.noise_var,
        alpha,
        &dq2,
    )?;
    Ok(MetricReport {
        mse: trace_re(&m),
        mse_matrix: m,
        noise_cov: cov,
        crlb_matrix: bound,
        k_eff,
        rate_bits: rate,
        energy_eff: ee,
        objective,
        alpha,
        dq2,
    })
}

/// Sample mean of `||y - x||^2` for `y = K x + alpha W n + W_D^H n_q` with
/// Gaussian symbols of power `p`, receiver noise of variance `sigma^2` and
/// quantization noise of covariance `D_q^2`.
pub fn monte_carlo_mse<R: Rng + ?Sized>(
    k_eff: &CMat,
    w: &CMat,
    w_d_h: &CMat,
    dq2: &[f64],
    alpha: f64,
    sigma_n2: f64,
    p: f64,
    draws: usize,
    rng: &mut R,
) -> f64 {
    let n = k_eff.nrows();
    let e = k_eff - CMat::identity(n, n);
    let aw = w * c(alpha, 0.0);
    let sx = p.sqrt();
    let sn = sigma_n2.sqrt();
    let sq: Vec<f64> = dq2.iter().map(|d| d.sqrt()).collect();
    let mut x = CVec::zeros(n);
    let mut nv = CVec::zeros(w.ncols());
    let mut nq = CVec::zeros(dq2.len());
    let mut acc = 0.0;
    for _ in 0..draws {
        x.iter_mut().for_each(|z| *z = cn(rng) * sx);
        nv.iter_mut().for_each(|z| *z = cn(rng) * sn);
        for (z, s) in nq.iter_mut().zip(&sq) {
            *z = cn(rng) * *s;
        }
        let err = &e * &x + &aw * &nv + w_d_h * &nq;
        acc += err.norm_squared();
    }
    acc / draws as f64
}

/// Fast evaluator of the objective with `D_q^2` recomputed for every sequence.
#[derive(Debug, Clone)]
pub struct LeafObjective {
    k: usize,
    m: usize,
    /// `e^{j(theta_a - theta_b)}` at `a * K + b`.
    rel: Vec<Complex64>,
    /// Per RF row `k`: the diagonal `sum |a_ki|^2 G_ii` and the `M x M` block
    /// `2 a_ki G_ij conj(a_kj)` (zero on the diagonal), where `a = W_A^H P` and `G = R R^H`.
    diag: Vec<f64>,
    pair: Vec<Complex64>,
    alpha: f64,
    c0: f64,
    c1: Vec<f64>,
    c2: Vec<f64>,
}

impl LeafObjective {
    pub fn new(
        channel: &ChannelRealization,
        set: &TransceiverSet,
        cfg: &SystemConfig,
    ) -> Result<LeafObjective> {
        let alpha = aqnm_alpha(cfg.adc_bits)?;
        let m = cfg.n_ris;
        let n_rs = set.w_a_h.nrows();
        if set.w_d_tilde_h.shape() != (m, n_rs) || channel.p_mat.ncols() != m {
            return Err(Error::DimensionMismatch("leaf objective blocks".into()));
        }
        let a = &set.w_a_h * &channel.p_mat;
        let g = &channel.r_mat * channel.r_mat.adjoint();
        let b0 = &set.w_d_tilde_h * &set.w_a_h * set.w_a_h.adjoint() * set.w_d_tilde_h.adjoint()
            * c(cfg.noise_var, 0.0);
        let a2 = alpha * alpha;
        let u = &set.w_d_tilde_h;
        let c0 = frob2(&b0);
        let c1 = (0..n_rs)
            .map(|k| {
                let uk = u.column(k);
                2.0 * (uk.adjoint() * &b0 * uk)[(0, 0)].re / a2
            })
            .collect();
        let mut c2 = vec![0.0; n_rs * n_rs];
        for k in 0..n_rs {
            for l in 0..n_rs {
                let ip: Complex64 = u.column(k).dotc(&u.column(l));
                c2[k * n_rs + l] = ip.norm_sqr() / (a2 * a2);
            }
        }
        let k = cfg.k();
        let mut rel = Vec::with_capacity(k * k);
        for &ta in &cfg.phase_alphabet {
            for &tb in &cfg.phase_alphabet {
                rel.push(cis(ta - tb));
            }
        }
        let mut diag = Vec::with_capacity(n_rs);
        let mut pair = vec![Complex64::new(0.0, 0.0); n_rs * m * m];
        for r in 0..n_rs {
            diag.push((0..m).map(|i| a[(r, i)].norm_sqr() * g[(i, i)].re).sum());
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        pair[(r * m + i) * m + j] = a[(r, i)] * g[(i, j)] * a[(r, j)].conj() * 2.0;
                    }
                }
            }
        }
        Ok(LeafObjective {
            k,
            m,
            rel,
            diag,
            pair,
            alpha,
            c0,
            c1,
            c2,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn quad(&self, r: usize, phases: &[usize]) -> f64 {
        let (m, k) = (self.m, self.k);
        let mut q = self.diag[r];
        for i in 0..m {
            let row = &self.rel[phases[i] * k..(phases[i] + 1) * k];
            let block = &self.pair[(r * m + i) * m..(r * m + i + 1) * m];
            for j in i + 1..m {
                let (h, e) = (block[j], row[phases[j]]);
                q += h.re * e.re - h.im * e.im;
            }
        }
        q
    }

    /// Change of row `r`'s quadratic term when element `i` moves from `old` to `new`.
    fn delta(&self, r: usize, phases: &[usize], i: usize, old: usize, new: usize) -> f64 {
        let (m, k) = (self.m, self.k);
        let block = &self.pair[(r * m + i) * m..(r * m + i + 1) * m];
        let (ro, rn) = (&self.rel[old * k..(old + 1) * k], &self.rel[new * k..(new + 1) * k]);
        let mut d = 0.0;
        for j in 0..m {
            if j == i {
                continue;
            }
            let h = block[j];
            let e = rn[phases[j]] - ro[phases[j]];
            d += h.re * e.re - h.im * e.im;
        }
        d
    }

    fn from_quads(&self, q: &[f64]) -> f64 {
        let s = self.alpha * (1.0 - self.alpha);
        let n = q.len();
        let mut f = self.c0;
        for a in 0..n {
            let da = s * (q[a] + 1.0);
            f += self.c1[a] * da;
            let row = &self.c2[a * n..(a + 1) * n];
            f += da * row.iter().zip(q).map(|(x, qb)| x * s * (qb + 1.0)).sum::<f64>();
        }
        f
    }

    /// Diagonal of `D_q^2` for the sequence.
    pub fn dq2(&self, phases: &[usize]) -> Vec<f64> {
        let s = self.alpha * (1.0 - self.alpha);
        (0..self.diag.len()).map(|r| s * (self.quad(r, phases) + 1.0)).collect()
    }

    /// Objective for a sequence already known to be in the alphabet.
    pub fn value(&self, phases: &[usize]) -> f64 {
        let q: Vec<f64> = (0..self.diag.len()).map(|r| self.quad(r, phases)).collect();
        self.from_quads(&q)
    }

    /// Checked evaluation.
    pub fn try_value(&self, phases: &[usize]) -> Result<f64> {
        if phases.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "{} phases for {} elements",
                phases.len(),
                self.m
            )));
        }
        if let Some(&bad) = phases.iter().find(|&&p| p >= self.k) {
            return Err(Error::AlphabetViolation { index: bad, k: self.k });
        }
        Ok(self.value(phases))
    }
}

impl Objective for LeafObjective {
    fn eval(&self, phases: &[usize]) -> f64 {
        self.value(phases)
    }

    fn scan(&self, k: usize, m: usize, lo: u64, hi: u64) -> (f64, u64) {
        let mut best = (f64::INFINITY, u64::MAX);
        if lo >= hi {
            return best;
        }
        let mut seq = vec![0usize; m];
        decode_index(lo, k, &mut seq);
        let rows = self.diag.len();
        let mut q: Vec<f64> = (0..rows).map(|r| self.quad(r, &seq)).collect();
        for idx in lo..hi {
            if idx > lo {
                let mut pos = m;
                loop {
                    pos -= 1;
                    let old = seq[pos];
                    let new = if old + 1 == k { 0 } else { old + 1 };
                    for (r, qr) in q.iter_mut().enumerate() {
                        *qr += self.delta(r, &seq, pos, old, new);
                    }
                    seq[pos] = new;
                    if new != 0 || pos == 0 {
                        break;
                    }
                }
            }
            let v = nan_last(self.from_quads(&q));
            if best.1 == u64::MAX || strictly_below(v, best.0) {
                best = (v, idx);
            }
        }
        best
    }
}
