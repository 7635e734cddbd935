//! Link parameters and the seed-splitting rule.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensional and physical parameters of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_rf_tx: usize,
    pub n_rf_rx: usize,
    pub n_streams: usize,
    pub n_ris: usize,
    /// Radian values, stored in `[0, 2pi)`.
    pub phase_alphabet: Vec<f64>,
    pub n_interferers: usize,
    pub adc_bits: u32,
    pub symbol_power: f64,
    pub noise_var: f64,
    pub seed: u64,
    pub snr_db: f64,
}

/// Wrap an angle into `[0, 2pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = x.rem_euclid(two_pi);
    if r >= two_pi {
        0.0
    } else {
        r
    }
}

impl SystemConfig {
    /// The reference link: 48 antennas per side, 8 RF chains and streams,
    /// 8 interferers, three evenly spaced phases and 4-bit ADCs at 10 dB.
    pub fn reference(n_ris: usize) -> SystemConfig {
        let alphabet = [25.0, 73.0, 49.0].iter().map(|k| k * PI / 36.0).collect();
        SystemConfig::new(48, 48, 8, 8, 8, n_ris, alphabet, 8, 4, 1.0, 10.0, 0)
            .expect("reference configuration is valid")
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_tx: usize,
        n_rx: usize,
        n_rf_tx: usize,
        n_rf_rx: usize,
        n_streams: usize,
        n_ris: usize,
        phase_alphabet: Vec<f64>,
        n_interferers: usize,
        adc_bits: u32,
        symbol_power: f64,
        snr_db: f64,
        seed: u64,
    ) -> Result<SystemConfig> {
        let cfg = SystemConfig {
            n_tx,
            n_rx,
            n_rf_tx,
            n_rf_rx,
            n_streams,
            n_ris,
            phase_alphabet: phase_alphabet.into_iter().map(wrap_phase).collect(),
            n_interferers,
            adc_bits,
            symbol_power,
            noise_var: symbol_power / 10f64.powf(snr_db / 10.0),
            seed,
            snr_db,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let counts = [
            self.n_tx,
            self.n_rx,
            self.n_rf_tx,
            self.n_rf_rx,
            self.n_streams,
            self.n_ris,
        ];
        if counts.iter().any(|&n| n == 0) || self.phase_alphabet.is_empty() {
            return bad("all counts must be at least 1");
        }
        if self.n_streams != self.n_rf_rx {
            return bad("n_streams must equal n_rf_rx");
        }
        if self.n_ris < self.n_interferers + 2 {
            return bad("n_ris must be at least n_interferers + 2");
        }
        if self.n_streams > self.n_ris {
            return bad("n_streams must not exceed n_ris");
        }
        if self.adc_bits == 0 {
            return Err(Error::InvalidBits(0));
        }
        if !(self.symbol_power > 0.0) || !(self.noise_var > 0.0) || !self.noise_var.is_finite() {
            return bad("symbol_power and noise_var must be positive");
        }
        if self.phase_alphabet.iter().any(|p| !p.is_finite() || *p < 0.0 || *p >= 2.0 * PI) {
            return bad("phases must lie in [0, 2pi)");
        }
        Ok(())
    }

    /// Alphabet size `K`.
    pub fn k(&self) -> usize {
        self.phase_alphabet.len()
    }

    /// Number of propagation paths, `beta + 2`.
    pub fn n_paths(&self) -> usize {
        self.n_interferers + 2
    }

    pub fn with_snr(mut self, snr_db: f64) -> SystemConfig {
        self.snr_db = snr_db;
        self.noise_var = self.symbol_power / 10f64.powf(snr_db / 10.0);
        self
    }

    pub fn with_bits(mut self, b: u32) -> SystemConfig {
        self.adc_bits = b;
        self
    }

    pub fn with_ris(mut self, m: usize) -> SystemConfig {
        self.n_ris = m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> SystemConfig {
        self.seed = seed;
        self
    }
}

/// Power budget entering the energy-efficiency denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub p_tx: f64,
    pub p_rx: f64,
    pub p_ris: f64,
    /// Joules per conversion step.
    pub c_per_step: f64,
    /// Sampling rate in Hz.
    pub f_s: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel {
            p_tx: 1.0,
            p_rx: 1.0,
            p_ris: 0.0,
            c_per_step: 15.4e-12,
            f_s: 4e8,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a list of words, stable across platforms and releases.
pub fn stable_hash(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Seed of trial `t` at the grid point identified by `(m, b, snr_db)`.
pub fn trial_seed(master: u64, m: usize, b: u32, snr_db: f64, t: usize) -> u64 {
    stable_hash(&[master, m as u64, b as u64, snr_db.to_bits(), t as u64])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_wraps() {
        let cfg = SystemConfig::reference(12);
        assert!((cfg.phase_alphabet[1] - PI / 36.0).abs() < 1e-12);
        assert!(cfg.phase_alphabet.iter().all(|&p| (0.0..2.0 * PI).contains(&p)));
    }

    #[test]
    fn noise_from_snr() {
        let cfg = SystemConfig::reference(12).with_snr(20.0);
        assert!((cfg.noise_var - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rejects_stream_mismatch() {
        let mut cfg = SystemConfig::reference(12);
        cfg.n_streams = 4;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rejects_small_surface() {
        let cfg = SystemConfig::reference(12).with_ris(9);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_is_order_sensitive() {
        assert_ne!(stable_hash(&[1, 2]), stable_hash(&[2, 1]));
        assert_eq!(stable_hash(&[5, 9, 1]), stable_hash(&[5, 9, 1]));
        assert_ne!(trial_seed(1, 12, 4, 0.0, 0), trial_seed(1, 12, 4, 0.0, 1));
    }
}
