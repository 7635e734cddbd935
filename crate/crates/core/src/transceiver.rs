//! Hybrid analog/digital precoder and combiner design.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{phase_matrix, ChannelRealization};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{
    c, cis, cn_matrix, frob, frob2, orthonormal_columns, phase_project, pinv, CMat, PINV_TOL,
};

/// All six precoding and combining blocks of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverSet {
    /// `N_t x N_rt`, constant modulus `1/sqrt(N_t)`.
    pub f_a: CMat,
    /// `N_rt x M`.
    pub f_d_tilde: CMat,
    /// `M x N`, orthonormal columns.
    pub f_s: CMat,
    /// `N_rs x N_r`, constant modulus `1/sqrt(N_r)`.
    pub w_a_h: CMat,
    /// `M x N_rs`.
    pub w_d_tilde_h: CMat,
    /// `N x M`.
    pub w_s: CMat,
}

/// Result of one analog/digital factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridDesign {
    pub analog: CMat,
    pub digital: CMat,
    /// Fit residual `||T - A D||_F` of the best iterate, before power normalization.
    pub residual: f64,
    /// Residual after the initialization and after every accepted iteration.
    pub history: Vec<f64>,
}

/// How `F_S` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FsChoice {
    /// First `N` columns of `I_M`.
    #[default]
    Identity,
    /// Orthonormalized complex Gaussian matrix drawn from the given seed.
    Random(u64),
}

/// Iteration controls for the alternating factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Relative Tikhonov weight of the inverse being approximated.
    pub rho: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            max_iters: 50,
            tol: 1e-6,
            rho: 1e-4,
        }
    }
}

/// `X` with `mat X = I`. Fails unless `mat` has full row rank at `tol`.
pub fn right_inverse(mat: &CMat, tol: f64) -> Result<CMat> {
    let (inv, rank) = pinv(mat, tol);
    if rank < mat.nrows() {
        return Err(Error::RankDeficient {
            rank,
            required: mat.nrows(),
        });
    }
    Ok(inv)
}

/// `X` with `X mat = I`. Fails unless `mat` has full column rank at `tol`.
pub fn left_inverse(mat: &CMat, tol: f64) -> Result<CMat> {
    let (inv, rank) = pinv(mat, tol);
    if rank < mat.ncols() {
        return Err(Error::RankDeficient {
            rank,
            required: mat.ncols(),
        });
    }
    Ok(inv)
}

/// Regularized inverse used as the design target. For `mat` of shape `r x c`
/// this is `mat^H (mat mat^H + lambda I)^{-1}` (equal to
/// `(mat^H mat + lambda I)^{-1} mat^H`) with `lambda = rho sigma_max^2`.
/// `rho = 0` gives the pseudo-inverse. Only an all-zero matrix is rejected.
pub fn design_target(mat: &CMat, rho: f64) -> Result<CMat> {
    let svd = mat.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::RankDeficient {
            rank: 0,
            required: mat.nrows().min(mat.ncols()),
        });
    }
    let lambda = rho * smax * smax;
    let mut out = CMat::zeros(mat.ncols(), mat.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= PINV_TOL * smax {
            continue;
        }
        let g = s / (s * s + lambda);
        for i in 0..mat.ncols() {
            let vik = v_t[(k, i)].conj() * g;
            for j in 0..mat.nrows() {
                out[(i, j)] += vik * u[(j, k)].conj();
            }
        }
    }
    Ok(out)
}

fn least_squares(analog: &CMat, target: &CMat) -> CMat {
    pinv(analog, PINV_TOL).0 * target
}

fn initial_analog(target: &CMat, n_rf: usize) -> CMat {
    let n_ant = target.nrows();
    let scale = 1.0 / (n_ant as f64).sqrt();
    let svd = target.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    CMat::from_fn(n_ant, n_rf, |i, j| {
        if j < order.len() {
            let z = u[(i, order[j])];
            if z.norm() > 0.0 {
                cis(z.arg()) * scale
            } else {
                c(scale, 0.0)
            }
        } else {
            cis(-2.0 * PI * (i * j) as f64 / n_ant as f64) * scale
        }
    })
}

/// Approximate `target` (`n_ant x M`) by `A D` with `A` constant modulus.
pub fn hybrid_factorization(target: &CMat, n_rf: usize, opts: DesignOptions) -> HybridDesign {
    let n_ant = target.nrows();
    let scale = 1.0 / (n_ant as f64).sqrt();
    let mut analog = initial_analog(target, n_rf);
    let mut digital = least_squares(&analog, target);
    let mut residual = frob(&(target - &analog * &digital));
    let mut history = vec![residual];
    for _ in 0..opts.max_iters {
        let unconstrained = target * pinv(&digital, PINV_TOL).0;
        let cand_a = phase_project(&unconstrained, scale);
        let cand_d = least_squares(&cand_a, target);
        let cand_r = frob(&(target - &cand_a * &cand_d));
        if !(cand_r <= residual) {
            break;
        }
        let gain = residual - cand_r;
        analog = cand_a;
        digital = cand_d;
        let prev = residual;
        residual = cand_r;
        history.push(residual);
        if prev == 0.0 || gain / prev < opts.tol {
            break;
        }
    }
    HybridDesign {
        analog,
        digital,
        residual,
        history,
    }
}

fn normalize_power(analog: &CMat, digital: &mut CMat, n_streams: usize) {
    let p = frob2(&(analog * &*digital));
    if p > 0.0 {
        *digital *= c((n_streams as f64 / p).sqrt(), 0.0);
    }
}

/// `(F_A, F~_D)` approximating the inverse of `R` with `||F_A F~_D||_F^2 = N`.
pub fn design_hybrid_precoder(
    r_mat: &CMat,
    cfg: &SystemConfig,
    opts: DesignOptions,
) -> Result<HybridDesign> {
    let target = design_target(r_mat, opts.rho)?;
    let mut d = hybrid_factorization(&target, cfg.n_rf_tx, opts);
    normalize_power(&d.analog, &mut d.digital, cfg.n_streams);
    Ok(d)
}

/// `(W_A^H, W~_D^H)` approximating the inverse of `P` with `||W~_D^H W_A^H||_F^2 = N`.
/// The returned `analog` is `W_A^H` and `digital` is `W~_D^H`.
pub fn design_hybrid_combiner(
    p_mat: &CMat,
    cfg: &SystemConfig,
    opts: DesignOptions,
) -> Result<HybridDesign> {
    let target = design_target(p_mat, opts.rho)?.adjoint();
    let d = hybrid_factorization(&target, cfg.n_rf_rx, opts);
    let w_a_h = d.analog.adjoint();
    let mut w_d_tilde_h = d.digital.adjoint();
    let p = frob2(&(&w_d_tilde_h * &w_a_h));
    if p > 0.0 {
        w_d_tilde_h *= c((cfg.n_streams as f64 / p).sqrt(), 0.0);
    }
    Ok(HybridDesign {
        analog: w_a_h,
        digital: w_d_tilde_h,
        residual: d.residual,
        history: d.history,
    })
}

/// `F_S` per the chosen policy.
pub fn fs_matrix(m: usize, n: usize, choice: FsChoice) -> CMat {
    match choice {
        FsChoice::Identity => CMat::identity(m, n),
        FsChoice::Random(seed) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            orthonormal_columns(&cn_matrix(&mut rng, m, n))
        }
    }
}

/// `(F_S, W_S)` with `W_S = F_S^H conj(Phi)`, so that `W_S Phi F_S = I_N`.
pub fn finalize_digital(f_s_choice: &CMat, phases: &[usize], alphabet: &[f64]) -> Result<(CMat, CMat)> {
    let (m, n) = f_s_choice.shape();
    if phases.len() != m || n > m {
        return Err(Error::DimensionMismatch(format!(
            "F_S is {m}x{n} but {} phases given",
            phases.len()
        )));
    }
    let gram = f_s_choice.adjoint() * f_s_choice;
    if frob(&(gram - CMat::identity(n, n))) > 1e-9 {
        return Err(Error::DimensionMismatch("F_S columns are not orthonormal".into()));
    }
    let phi = phase_matrix(phases, alphabet)?;
    let w_s = f_s_choice.adjoint() * phi.adjoint();
    Ok((f_s_choice.clone(), w_s))
}

/// Diagnostics of a designed link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignQuality {
    pub precoder_residual: f64,
    pub combiner_residual: f64,
    /// `||R F_A F~_D - I_M||_F`
    pub precoder_inversion_error: f64,
    /// `||W~_D^H W_A^H P - I_M||_F`
    pub combiner_inversion_error: f64,
}

impl TransceiverSet {
    /// Standard design: hybrid blocks from the channel, `F_S` per `fs`, and
    /// `W_S` matched to `phases`.
    pub fn design(
        channel: &ChannelRealization,
        cfg: &SystemConfig,
        opts: DesignOptions,
        fs: FsChoice,
        phases: &[usize],
    ) -> Result<(TransceiverSet, DesignQuality)> {
        let pre = design_hybrid_precoder(&channel.r_mat, cfg, opts)?;
        let comb = design_hybrid_combiner(&channel.p_mat, cfg, opts)?;
        let (f_s, w_s) = finalize_digital(
            &fs_matrix(cfg.n_ris, cfg.n_streams, fs),
            phases,
            &cfg.phase_alphabet,
        )?;
        let set = TransceiverSet {
            f_a: pre.analog,
            f_d_tilde: pre.digital,
            f_s,
            w_a_h: comb.analog,
            w_d_tilde_h: comb.digital,
            w_s,
        };
        let q = DesignQuality {
            precoder_residual: pre.residual,
            combiner_residual: comb.residual,
            precoder_inversion_error: set.precoder_inversion_error(channel),
            combiner_inversion_error: set.combiner_inversion_error(channel),
        };
        Ok((set, q))
    }

    /// Random constant-modulus analog blocks with least-squares digital blocks.
    pub fn random_analog<R: Rng + ?Sized>(
        channel: &ChannelRealization,
        cfg: &SystemConfig,
        fs: FsChoice,
        phases: &[usize],
        rho: f64,
        rng: &mut R,
    ) -> Result<TransceiverSet> {
        let t_pre = design_target(&channel.r_mat, rho)?;
        let t_comb = design_target(&channel.p_mat, rho)?.adjoint();
        let f_a = phase_project(&cn_matrix(rng, cfg.n_tx, cfg.n_rf_tx), 1.0 / (cfg.n_tx as f64).sqrt());
        let mut f_d_tilde = least_squares(&f_a, &t_pre);
        normalize_power(&f_a, &mut f_d_tilde, cfg.n_streams);
        let w_a = phase_project(&cn_matrix(rng, cfg.n_rx, cfg.n_rf_rx), 1.0 / (cfg.n_rx as f64).sqrt());
        let mut w_d = least_squares(&w_a, &t_comb);
        normalize_power(&w_a, &mut w_d, cfg.n_streams);
        let (f_s, w_s) = finalize_digital(
            &fs_matrix(cfg.n_ris, cfg.n_streams, fs),
            phases,
            &cfg.phase_alphabet,
        )?;
        Ok(TransceiverSet {
            f_a,
            f_d_tilde,
            f_s,
            w_a_h: w_a.adjoint(),
            w_d_tilde_h: w_d.adjoint(),
            w_s,
        })
    }

    pub fn precoder_inversion_error(&self, channel: &ChannelRealization) -> f64 {
        let m = channel.r_mat.nrows();
        frob(&(&channel.r_mat * &self.f_a * &self.f_d_tilde - CMat::identity(m, m)))
    }

    pub fn combiner_inversion_error(&self, channel: &ChannelRealization) -> f64 {
        let m = channel.p_mat.ncols();
        frob(&(&self.w_d_tilde_h * &self.w_a_h * &channel.p_mat - CMat::identity(m, m)))
    }

    /// Full digital precoder `F~_D F_S`.
    pub fn f_d(&self) -> CMat {
        &self.f_d_tilde * &self.f_s
    }

    /// Full digital combiner `W_S W~_D^H`.
    pub fn w_d_h(&self) -> CMat {
        &self.w_s * &self.w_d_tilde_h
    }

    /// Overall combiner `W = W_D^H W_A^H`, `N x N_r`.
    pub fn w(&self) -> CMat {
        self.w_d_h() * &self.w_a_h
    }

    /// Overall precoder `F = F_A F~_D F_S`, `N_t x N`.
    pub fn f(&self) -> CMat {
        &self.f_a * self.f_d()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::synthesize_channel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partial_identity_inverse() {
        let a = CMat::identity(3, 5);
        let x = right_inverse(&a, 1e-12).unwrap();
        assert!(frob(&(x - CMat::identity(5, 3))) < 1e-14);
        let y = left_inverse(&CMat::identity(5, 3), 1e-12).unwrap();
        assert!(frob(&(y - CMat::identity(3, 5))) < 1e-14);
    }

    #[test]
    fn zero_row_is_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = cn_matrix(&mut rng, 4, 16);
        for j in 0..16 {
            a[(2, j)] = c(0.0, 0.0);
        }
        assert_eq!(
            right_inverse(&a, 1e-12),
            Err(Error::RankDeficient { rank: 3, required: 4 })
        );
    }

    #[test]
    fn zero_iterations_return_initialization() {
        let cfg = SystemConfig::reference(12);
        let ch = synthesize_channel(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let opts = DesignOptions {
            max_iters: 0,
            ..DesignOptions::default()
        };
        let d = design_hybrid_precoder(&ch.r_mat, &cfg, opts).unwrap();
        assert_eq!(d.history.len(), 1);
        assert!(d.residual.is_finite());
    }

    #[test]
    fn designed_blocks_satisfy_constraints() {
        let cfg = SystemConfig::reference(12);
        let ch = synthesize_channel(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let (t, _) =
            TransceiverSet::design(&ch, &cfg, DesignOptions::default(), FsChoice::Identity, &[0; 12])
                .unwrap();
        let sa = 1.0 / 48f64.sqrt();
        assert!(t.f_a.iter().all(|z| (z.norm() - sa).abs() < 1e-9));
        assert!(t.w_a_h.iter().all(|z| (z.norm() - sa).abs() < 1e-9));
        assert!((frob2(&(&t.f_a * &t.f_d_tilde)) - 8.0).abs() < 1e-6);
        assert!((frob2(&(&t.w_d_tilde_h * &t.w_a_h)) - 8.0).abs() < 1e-6);
    }

    #[test]
    fn identity_fs_with_zero_phases() {
        let fs = CMat::identity(4, 2);
        let (_, ws) = finalize_digital(&fs, &[0; 4], &[0.0, 1.0]).unwrap();
        assert!(frob(&(ws - CMat::identity(2, 4))) < 1e-15);
    }
}
