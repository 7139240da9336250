//! Simulator of a phase-encoded BB84 quantum key distribution link with
//! physically modeled gated avalanche-photodiode detectors, together with a
//! faked-state eavesdropper that blinds the detectors with bright CW light
//! and remote-controls them with trigger pulses, and the optical power
//! watchdog proposed against it.
//!
//! Module map:
//! - [`optics`]: frames, loss/gain, phase encoding, interference at Bob's
//!   final coupler
//! - [`detector`]: gated APD model, blinding, linear-mode click thresholds
//! - [`protocol`]: BB84 roles, sifting, QBER estimation, reconciliation,
//!   privacy amplification, and the public transcript
//! - [`attack`]: the intercept-resend eavesdropper built on detector control
//! - [`countermeasure`]: optical power meter watchdog at Bob's entrance
//! - [`harness`]: scenarios, deterministic sessions, sweeps, reports

pub mod attack;
pub mod countermeasure;
pub mod detector;
pub mod error;
pub mod harness;
pub mod optics;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
