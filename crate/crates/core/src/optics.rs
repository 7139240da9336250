//! Pulses, loss/gain, phase encoding, and the interferometric split at
//! Bob's final 50/50 coupler.
//!
//! A frame is one time slot of light on the fibre. Quantum-level frames carry
//! only a mean photon number (weak coherent pulse); classical frames carry a
//! CW background power and optionally a bright pulse riding on top of it.
//! The two regimes are mutually exclusive per frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::Basis;

pub const DEFAULT_PULSE_DURATION_NS: f64 = 2.5;

/// One time slot of light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalFrame {
    pub slot_index: u64,
    /// Continuous background power in watts.
    pub cw_power: f64,
    /// Peak power of a pulse superimposed on the background, in watts.
    pub pulse_peak_power: f64,
    pub pulse_duration_ns: f64,
    /// Trigger-pulse delay behind the detector gate, ns. Recorded only; the
    /// lumped click model does not depend on it.
    #[serde(default)]
    pub pulse_delay_ns: f64,
    /// Relative phase in radians (BB84 alphabet {0, pi/2, pi, 3pi/2}).
    pub phase: f64,
    /// Mean photon number for quantum-level signals; 0 for classical frames.
    pub mean_photon_number: f64,
}

impl OpticalFrame {
    /// Weak coherent pulse at the single-photon level.
    pub fn quantum(slot_index: u64, phase: f64, mean_photon_number: f64) -> Self {
        Self {
            slot_index,
            cw_power: 0.0,
            pulse_peak_power: 0.0,
            pulse_duration_ns: DEFAULT_PULSE_DURATION_NS,
            pulse_delay_ns: 0.0,
            phase,
            mean_photon_number,
        }
    }

    /// Bright classical frame: CW background plus an optional trigger pulse.
    pub fn classical(slot_index: u64, cw_power: f64, pulse_peak_power: f64, phase: f64) -> Self {
        Self {
            slot_index,
            cw_power,
            pulse_peak_power,
            pulse_duration_ns: DEFAULT_PULSE_DURATION_NS,
            pulse_delay_ns: 0.0,
            phase,
            mean_photon_number: 0.0,
        }
    }

    /// Empty slot (counts as classical: nothing quantum to detect).
    pub fn vacuum(slot_index: u64) -> Self {
        Self::classical(slot_index, 0.0, 0.0, 0.0)
    }

    pub fn is_quantum_level(&self) -> bool {
        self.cw_power == 0.0 && self.pulse_peak_power == 0.0 && self.mean_photon_number > 0.0
    }

    pub fn is_classical(&self) -> bool {
        !self.is_quantum_level()
    }
}

/// Fibre segment parameters. `gain_db` models Eve's amplifier stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub loss_db: f64,
    #[serde(default)]
    pub gain_db: f64,
}

impl ChannelParams {
    pub fn lossless() -> Self {
        Self { loss_db: 0.0, gain_db: 0.0 }
    }

    pub fn transmittance(&self) -> f64 {
        db_to_linear(-self.loss_db)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Scale all power-like fields by 10^(-loss_db/10). Phase is unchanged.
pub fn attenuate(frame: &OpticalFrame, loss_db: f64) -> Result<OpticalFrame> {
    if loss_db < 0.0 {
        return Err(Error::NegativeLoss(loss_db));
    }
    let t = db_to_linear(-loss_db);
    Ok(OpticalFrame {
        cw_power: frame.cw_power * t,
        pulse_peak_power: frame.pulse_peak_power * t,
        mean_photon_number: frame.mean_photon_number * t,
        ..*frame
    })
}

/// Scale power fields by 10^(+gain_db/10). Only classical frames may be
/// amplified; a quantum-level input signals misuse of Eve's amplifier.
pub fn amplify(frame: &OpticalFrame, gain_db: f64) -> Result<OpticalFrame> {
    if gain_db < 0.0 {
        return Err(Error::NegativeGain(gain_db));
    }
    if frame.is_quantum_level() {
        return Err(Error::AmplifyQuantumFrame(frame.slot_index));
    }
    let g = db_to_linear(gain_db);
    Ok(OpticalFrame {
        cw_power: frame.cw_power * g,
        pulse_peak_power: frame.pulse_peak_power * g,
        ..*frame
    })
}

/// Phase alphabet: (0,Z) -> 0, (1,Z) -> pi, (0,X) -> pi/2, (1,X) -> 3pi/2.
pub fn encode_phase(bit: bool, basis: Basis) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    match (bit, basis) {
        (false, Basis::Z) => 0.0,
        (true, Basis::Z) => PI,
        (false, Basis::X) => FRAC_PI_2,
        (true, Basis::X) => 3.0 * FRAC_PI_2,
    }
}

/// Analyzer phase applied by Bob for a basis choice.
pub fn analyzer_phase(basis: Basis) -> f64 {
    match basis {
        Basis::Z => 0.0,
        Basis::X => std::f64::consts::FRAC_PI_2,
    }
}

/// Power split at the final 50/50 coupler.
///
/// With phase difference `delta_phase` between Bob's analyzer and the
/// incoming light, detector 0 receives P*cos^2(d/2) and detector 1 the
/// remainder, so the outputs always sum to the incident power exactly.
pub fn interfere(incident_power: f64, delta_phase: f64) -> (f64, f64) {
    let c = (delta_phase / 2.0).cos();
    let p0 = incident_power * c * c;
    (p0, incident_power - p0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    // quoted dB figures like 3.0103 are only half-power to ~1e-8 relative
    fn close(a: f64, b: f64) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12), "{a} != {b}");
    }

    #[test]
    fn attenuate_half_power_point() {
        let f = OpticalFrame::classical(0, 1.0e-3, 0.0, 0.0);
        close(attenuate(&f, 3.0103).unwrap().cw_power, 0.5e-3);
    }

    #[test]
    fn attenuate_identity_and_ten_db() {
        let f = OpticalFrame::quantum(0, 0.0, 0.1);
        close(attenuate(&f, 0.0).unwrap().mean_photon_number, 0.1);
        let g = OpticalFrame::classical(0, 0.0, 932e-6, 0.0);
        // 10 dB is exactly a factor 10^-1
        close(attenuate(&g, 10.0).unwrap().pulse_peak_power, 93.2e-6);
    }

    #[test]
    fn attenuate_rejects_negative_loss() {
        let f = OpticalFrame::vacuum(0);
        assert!(matches!(attenuate(&f, -1.0), Err(Error::NegativeLoss(_))));
    }

    #[test]
    fn amplify_examples() {
        let f = OpticalFrame::classical(0, 0.0, 100e-6, 0.0);
        close(amplify(&f, 10.0).unwrap().pulse_peak_power, 1e-3);
        let g = OpticalFrame::classical(0, 0.0, 808e-6, 0.0);
        close(amplify(&g, 0.0).unwrap().pulse_peak_power, 808e-6);
        let h = OpticalFrame::classical(0, 60e-6, 0.0, 0.0);
        close(amplify(&h, 3.0103).unwrap().cw_power, 120e-6);
    }

    #[test]
    fn amplify_rejects_quantum_frames() {
        let f = OpticalFrame::quantum(3, 0.0, 0.1);
        assert!(matches!(amplify(&f, 10.0), Err(Error::AmplifyQuantumFrame(3))));
    }

    #[test]
    fn phase_alphabet() {
        assert_eq!(encode_phase(false, Basis::Z), 0.0);
        assert_eq!(encode_phase(true, Basis::Z), PI);
        assert_eq!(encode_phase(true, Basis::X), 3.0 * FRAC_PI_2);
        // injective over the 4 pairs
        let mut phases: Vec<f64> = [(false, Basis::Z), (true, Basis::Z), (false, Basis::X), (true, Basis::X)]
            .iter()
            .map(|&(b, ba)| encode_phase(b, ba))
            .collect();
        phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
        phases.dedup();
        assert_eq!(phases.len(), 4);
    }

    #[test]
    fn interfere_matched_and_mismatched() {
        let (p0, p1) = interfere(1.0, 0.0);
        close(p0, 1.0);
        close(p1, 0.0);
        let (p0, p1) = interfere(1.0, FRAC_PI_2);
        close(p0, 0.5);
        close(p1, 0.5);
        let (p0, p1) = interfere(1.0, PI);
        close(p0, 0.0);
        close(p1, 1.0);
    }
}
