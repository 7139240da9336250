//! The faked-state eavesdropper: an intercepting receiver at Alice's side,
//! a resend stage that keeps Bob's detectors blinded and steers them with
//! bright trigger pulses, and a passive listener that replays the public
//! transcript to clone Bob's final key.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{ClickThresholds, GeigerParams};
use crate::error::{Error, Result};
use crate::optics::{encode_phase, OpticalFrame};
use crate::protocol::cascade::replay_round;
use crate::protocol::toeplitz::toeplitz_hash;
use crate::protocol::transcript::{Transcript, TranscriptEvent};
use crate::protocol::{Basis, BasisMode, BobReceiver, BobSlot};

/// Eavesdropper configuration for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// CW blinding power delivered on each of Bob's detector lines, watts.
    pub cw_power: f64,
    /// Trigger pulse peak power at Bob; if absent, the midpoint of the
    /// feasible window is chosen automatically.
    #[serde(default)]
    pub trigger_peak_power: Option<f64>,
    #[serde(default = "default_basis_mode")]
    pub bob_basis_mode: BasisMode,
    /// Target click rate per slot for Bob; if absent it is computed from
    /// the attack-free expectation of the scenario.
    #[serde(default)]
    pub rate_match_target: Option<f64>,
    #[serde(default)]
    pub rate_match: bool,
    /// Probability per slot of injecting a fake dark count.
    #[serde(default)]
    pub dark_count_emulation_rate: f64,
    /// Detector quality of Eve's intercepting receiver; defaults to ideal.
    #[serde(default = "GeigerParams::ideal")]
    pub eve_geiger: GeigerParams,
    /// Trigger pulse delay behind Bob's gate, ns.
    #[serde(default = "default_pulse_delay")]
    pub pulse_delay_ns: f64,
}

fn default_basis_mode() -> BasisMode {
    BasisMode::Active
}

fn default_pulse_delay() -> f64 {
    2.5
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            cw_power: 1.08e-3,
            trigger_peak_power: None,
            bob_basis_mode: BasisMode::Active,
            rate_match_target: None,
            rate_match: false,
            dark_count_emulation_rate: 0.0,
            eve_geiger: GeigerParams::ideal(),
            pulse_delay_ns: 2.5,
        }
    }
}

/// Eve's per-slot detection record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveRecord {
    pub slot_index: u64,
    pub basis: Basis,
    pub bit: bool,
    pub forwarded: bool,
}

/// Outcome of the attack-feasibility condition
/// max_i P_always,i < 2 * min_i P_never,i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub max_always: f64,
    pub twice_min_never: f64,
    /// Open trigger-power interval (max P_always, 2 min P_never) when
    /// feasible.
    pub interval: Option<(f64, f64)>,
}

impl FeasibilityReport {
    fn fmt_uw(watts: f64) -> String {
        let uw = watts * 1e6;
        if (uw - uw.round()).abs() < 1e-6 {
            format!("{}", uw.round() as i64)
        } else {
            format!("{uw:.1}")
        }
    }
}

impl std::fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.interval {
            Some((lo, hi)) => write!(
                f,
                "feasible, interval ({}, {}) µW",
                Self::fmt_uw(lo),
                Self::fmt_uw(hi)
            ),
            None => write!(
                f,
                "infeasible: max P_always = {} µW >= 2*min P_never = {} µW",
                Self::fmt_uw(self.max_always),
                Self::fmt_uw(self.twice_min_never)
            ),
        }
    }
}

/// Check whether the detectors' click thresholds permit perfect control.
pub fn feasible(thresholds: &[ClickThresholds]) -> FeasibilityReport {
    let max_always = thresholds.iter().map(|t| t.p_always).fold(f64::MIN, f64::max);
    let twice_min_never = 2.0 * thresholds.iter().map(|t| t.p_never).fold(f64::MAX, f64::min);
    let ok = max_always < twice_min_never;
    FeasibilityReport {
        feasible: ok,
        max_always,
        twice_min_never,
        interval: ok.then_some((max_always, twice_min_never)),
    }
}

/// Trigger peak power sitting in the middle of the feasible window.
///
/// Active basis choice: midpoint of (max P_always, 2 min P_never). Passive
/// basis choice doubles both ends, since the matched analyzer only receives
/// half the pulse; the conjugate-basis detectors then see a quarter, and
/// the same feasibility condition keeps them silent.
pub fn choose_trigger_power(thresholds: &[ClickThresholds], mode: BasisMode) -> Result<f64> {
    let report = feasible(thresholds);
    let (lo, hi) = report.interval.ok_or(Error::Infeasible {
        max_always_uw: report.max_always * 1e6,
        twice_min_never_uw: report.twice_min_never * 1e6,
    })?;
    let mid = 0.5 * (lo + hi);
    Ok(match mode {
        BasisMode::Active => mid,
        BasisMode::Passive => 2.0 * mid,
    })
}

/// Eve's copy of Bob, placed right at Alice's output.
#[derive(Debug, Clone)]
pub struct EveTap {
    pub receiver: BobReceiver,
}

impl EveTap {
    /// Ideal intercepting receiver (unit efficiency, no dark counts).
    pub fn new(geiger: GeigerParams) -> Self {
        let mut d0 = crate::detector::DetectorModel::ideal("eve-det0");
        let mut d1 = crate::detector::DetectorModel::ideal("eve-det1");
        d0.geiger = geiger;
        d1.geiger = geiger;
        Self { receiver: BobReceiver::active(d0, d1) }
    }

    /// Measure one of Alice's quantum frames in a random basis.
    pub fn intercept<R: Rng + ?Sized>(
        &self,
        frame: &OpticalFrame,
        basis_rng: &mut R,
        noise_rng: &mut R,
    ) -> Result<EveRecord> {
        if frame.is_classical() {
            return Err(Error::InterceptClassicalFrame(frame.slot_index));
        }
        let slot: BobSlot = self.receiver.measure(frame, basis_rng, noise_rng);
        Ok(EveRecord {
            slot_index: frame.slot_index,
            basis: slot.basis,
            bit: slot.resolved_bit.unwrap_or(false),
            forwarded: slot.resolved_bit.is_some(),
        })
    }
}

/// Build the classical frame Eve sends for one slot: blinding CW always,
/// plus a phase-encoded trigger pulse when she has a detection to forward.
pub fn eve_resend(record: &EveRecord, cw_power: f64, trigger_power: f64, pulse_delay_ns: f64) -> OpticalFrame {
    let mut frame = if record.forwarded {
        OpticalFrame::classical(
            record.slot_index,
            cw_power,
            trigger_power,
            encode_phase(record.bit, record.basis),
        )
    } else {
        // no detection this slot: keep the blinding alive, send no pulse
        OpticalFrame::classical(record.slot_index, cw_power, 0.0, 0.0)
    };
    frame.pulse_delay_ns = pulse_delay_ns;
    frame
}

/// Forwarding suppression probability s solving
/// (1 - s) * eve_click_rate / 2 = expected_bob_rate, so Bob's observed
/// click rate matches the attack-free expectation. The factor 1/2 is the
/// basis-mismatch loss of the control pulses.
pub fn match_rate(eve_click_rate: f64, expected_bob_rate: f64) -> Result<f64> {
    if eve_click_rate / 2.0 < expected_bob_rate {
        return Err(Error::RateStarved { eve_rate: eve_click_rate, expected_rate: expected_bob_rate });
    }
    if eve_click_rate <= 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - 2.0 * expected_bob_rate / eve_click_rate)
}

/// Fake dark count: with the given per-slot rate, a forwarded record with
/// uniformly random bit and basis.
pub fn emulate_dark_count<R: Rng + ?Sized>(
    rate: f64,
    slot_index: u64,
    rng: &mut R,
) -> Option<EveRecord> {
    if rate > 0.0 && rng.random::<f64>() < rate {
        Some(EveRecord {
            slot_index,
            basis: Basis::random(rng),
            bit: rng.random(),
            forwarded: true,
        })
    } else {
        None
    }
}

/// Apply the recorded public post-processing to Eve's copy of the raw key:
/// sift indices, sample removals, parity corrections, and the final hash.
/// `eve_raw` must be aligned with Bob's detection report (one bit per
/// reported slot, same order).
pub fn replay_transcript(eve_raw: &[bool], transcript: &Transcript) -> Result<Vec<bool>> {
    if transcript.is_empty() {
        return Err(Error::TruncatedTranscript("empty transcript"));
    }
    let mut detected: Option<&[u64]> = None;
    let mut key: Option<Vec<bool>> = None;
    let mut final_key: Option<Vec<bool>> = None;
    for event in transcript.events() {
        match event {
            TranscriptEvent::DetectionReport { slots } => detected = Some(slots),
            TranscriptEvent::BasisAnnouncement { .. } => {}
            TranscriptEvent::SiftResult { kept_slots } => {
                let slots = detected.ok_or(Error::TruncatedTranscript("detection report"))?;
                if eve_raw.len() != slots.len() {
                    return Err(Error::SlotCountMismatch { alice: slots.len(), bob: eve_raw.len() });
                }
                let kept: std::collections::HashSet<u64> = kept_slots.iter().copied().collect();
                key = Some(
                    slots
                        .iter()
                        .zip(eve_raw)
                        .filter(|(s, _)| kept.contains(s))
                        .map(|(_, &b)| b)
                        .collect(),
                );
            }
            TranscriptEvent::QberSample { indices, .. } => {
                let key = key.as_mut().ok_or(Error::TruncatedTranscript("sift result"))?;
                for &i in indices.iter().rev() {
                    if i < key.len() {
                        key.remove(i);
                    }
                }
            }
            TranscriptEvent::ParityRound(round) => {
                let key = key.as_mut().ok_or(Error::TruncatedTranscript("sift result"))?;
                replay_round(key, round)?;
            }
            TranscriptEvent::VerificationTag { .. } => {}
            TranscriptEvent::PaSeed { seed, out_len } => {
                let key = key.as_ref().ok_or(Error::TruncatedTranscript("sift result"))?;
                final_key = Some(toeplitz_hash(key, seed, *out_len)?);
            }
        }
    }
    final_key.ok_or(Error::TruncatedTranscript("privacy amplification seed"))
}
