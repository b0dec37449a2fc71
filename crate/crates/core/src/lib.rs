//! Simulation and exact analytics for the process of most recent common
//! ancestors (MRCAs) in a stationary, evolving Kingman coalescent.
//!
//! The crate is organised around four layers:
//!
//! - [`lookdown`]: a finite-level look-down graph generated lazily from a
//!   seed, with extraction of ancestral lineages, coalescent curves,
//!   fixation curves and the MRCA point process `{(E, B)}`.
//! - [`particles`]: the autonomous particle system whose particles are the
//!   fixation curves, simulated exactly as a continuous-time Markov chain.
//! - [`analytics`]: closed-form laws (level of the active fixation curve,
//!   the number `Z` of pending MRCAs, the `K` chain, the stationary particle
//!   law, coalescence times at MRCA changes).
//! - [`mutation`]: substitutions as Poisson marks on gaps between MRCA
//!   living times.
//!
//! [`stats`] and [`verify`] confront the Monte Carlo output with the exact
//! laws.

pub mod analytics;
pub mod error;
pub mod export;
pub mod lookdown;
pub mod mutation;
pub mod particles;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};

/// `n choose 2` as a float rate.
#[inline]
pub fn choose2(n: u64) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}
