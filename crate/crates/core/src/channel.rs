//! Synthetic multipath channels with the factorization `H(Phi) = P Phi R`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::{Rng, RngExt};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{cis, cn, CMat, CVec};

/// Power of the direct, non-reflected interference path relative to the others (-10 dB).
pub const DIRECT_PATH_POWER: f64 = 0.1;

/// One realization of the RIS-assisted link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// RIS to receiver, `N_r x M`.
    pub p_mat: CMat,
    /// Transmitter to RIS, `M x N_t`.
    pub r_mat: CMat,
    /// Composite gain of each path (receive-side gain times transmit-side gain).
    pub path_gains: Vec<Complex64>,
    /// Angles of arrival at the receiver.
    pub aoa: Vec<f64>,
    /// Angles of departure at the transmitter.
    pub aod: Vec<f64>,
}

/// Half-wavelength ULA response `(1/sqrt n) [e^{j pi k sin(angle)}]`.
pub fn steering_vector(angle: f64, n_elements: usize) -> CVec {
    let s = angle.sin();
    let norm = 1.0 / (n_elements as f64).sqrt();
    CVec::from_fn(n_elements, |k, _| cis(PI * k as f64 * s) * norm)
}

fn angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-FRAC_PI_2..FRAC_PI_2)
}

/// Draw a channel with `beta + 2` paths: the desired reflection, `beta`
/// interfering reflections and one weak direct path.
pub fn synthesize_channel<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    let gamma = cfg.n_paths();
    let m = cfg.n_ris;
    let mut p_mat = CMat::zeros(cfg.n_rx, m);
    let mut r_mat = CMat::zeros(m, cfg.n_tx);
    let mut path_gains = Vec::with_capacity(gamma);
    let mut aoa = Vec::with_capacity(gamma);
    let mut aod = Vec::with_capacity(gamma);
    for i in 0..gamma {
        let amp = if i + 1 == gamma {
            DIRECT_PATH_POWER.powf(0.25)
        } else {
            1.0
        };
        let phi_r = angle(rng);
        let omega = angle(rng);
        let g = cn(rng) * amp;
        let psi = angle(rng);
        let theta = angle(rng);
        let h = cn(rng) * amp;

        let a_rx = steering_vector(phi_r, cfg.n_rx);
        let a_ris_out = steering_vector(omega, m);
        p_mat += (a_rx * a_ris_out.adjoint()) * g;

        let a_ris_in = steering_vector(psi, m);
        let a_tx = steering_vector(theta, cfg.n_tx);
        r_mat += (a_ris_in * a_tx.adjoint()) * h;

        path_gains.push(g * h);
        aoa.push(phi_r);
        aod.push(theta);
    }
    Ok(ChannelRealization {
        p_mat,
        r_mat,
        path_gains,
        aoa,
        aod,
    })
}

/// Diagonal RIS response for a sequence of alphabet indices.
pub fn phase_matrix(phases: &[usize], alphabet: &[f64]) -> Result<CMat> {
    let mut d = Vec::with_capacity(phases.len());
    for &p in phases {
        let theta = *alphabet.get(p).ok_or(Error::AlphabetViolation {
            index: p,
            k: alphabet.len(),
        })?;
        d.push(cis(theta));
    }
    Ok(CMat::from_diagonal(&CVec::from_vec(d)))
}

impl ChannelRealization {
    /// Effective channel `P Phi R`.
    pub fn effective(&self, phases: &[usize], alphabet: &[f64]) -> Result<CMat> {
        if phases.len() != self.p_mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} phases for {} elements",
                phases.len(),
                self.p_mat.ncols()
            )));
        }
        let phi = phase_matrix(phases, alphabet)?;
        Ok(&self.p_mat * phi * &self.r_mat)
    }
}
