//! Discrete phase optimization for a passive RIS in a massive-MIMO link with
//! low-resolution ADCs.
//!
//! The pipeline runs from channel synthesis ([`channel`]) through hybrid
//! transceiver design ([`transceiver`]) and link metrics ([`metrics`]) to the
//! prior-guided tree search ([`idbp`]) and its baselines ([`baselines`]).
//! [`harness`] runs seeded sweeps and [`acceptance`] holds the verification suite.

pub mod acceptance;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod idbp;
pub mod linalg;
pub mod metrics;
pub mod priors;
pub mod transceiver;

pub use config::{PowerModel, SystemConfig};
pub use error::{Error, Result};
