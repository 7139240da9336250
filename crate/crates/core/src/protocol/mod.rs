//! BB84 roles and classical post-processing: preparation, measurement,
//! sifting, QBER estimation, error correction and privacy amplification,
//! all speaking over a replayable public transcript.

pub mod cascade;
pub mod toeplitz;
pub mod transcript;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{detect_frame, ClickCause, ClickOutcome, DetectorModel, Incident};
use crate::error::{Error, Result};
use crate::optics::{analyzer_phase, encode_phase, interfere, OpticalFrame};

pub use cascade::{error_correct, EcResult};
pub use toeplitz::toeplitz_hash;
pub use transcript::{ParityRound, Transcript, TranscriptEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            Basis::X
        } else {
            Basis::Z
        }
    }

    pub fn conjugate(self) -> Self {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMode {
    Active,
    Passive,
}

/// Alice's record for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliceSlot {
    pub slot_index: u64,
    pub bit: bool,
    pub basis: Basis,
}

/// Bob's record for one slot, in the basis he announced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BobSlot {
    pub slot_index: u64,
    pub basis: Basis,
    pub clicked0: bool,
    pub clicked1: bool,
    pub cause0: ClickCause,
    pub cause1: ClickCause,
    pub resolved_bit: Option<bool>,
    pub double_click: bool,
}

/// Uniform random bit and basis, and the weak coherent frame carrying them.
pub fn alice_prepare<R: Rng + ?Sized>(
    slot_index: u64,
    mu: f64,
    bit_rng: &mut R,
    basis_rng: &mut R,
) -> (OpticalFrame, AliceSlot) {
    let bit = bit_rng.random::<bool>();
    let basis = Basis::random(basis_rng);
    let frame = OpticalFrame::quantum(slot_index, encode_phase(bit, basis), mu);
    (frame, AliceSlot { slot_index, bit, basis })
}

/// Bob's receiver: interferometer analyzer(s) plus gated detector pair(s).
///
/// Active basis choice uses a single detector pair whose analyzer phase is
/// switched per slot; passive choice splits the light 50/50 onto a fixed Z
/// and a fixed X analyzer, each with its own pair.
#[derive(Debug, Clone)]
pub struct BobReceiver {
    pub mode: BasisMode,
    pub pair_z: (DetectorModel, DetectorModel),
    pub pair_x: Option<(DetectorModel, DetectorModel)>,
}

impl BobReceiver {
    pub fn active(det0: DetectorModel, det1: DetectorModel) -> Self {
        Self { mode: BasisMode::Active, pair_z: (det0, det1), pair_x: None }
    }

    pub fn passive(det0: DetectorModel, det1: DetectorModel) -> Self {
        let pair_x = Some((det0.clone(), det1.clone()));
        Self { mode: BasisMode::Passive, pair_z: (det0, det1), pair_x }
    }

    pub fn detectors(&self) -> Vec<&DetectorModel> {
        let mut v = vec![&self.pair_z.0, &self.pair_z.1];
        if let Some((a, b)) = &self.pair_x {
            v.push(a);
            v.push(b);
        }
        v
    }

    fn detect_pair<R: Rng + ?Sized>(
        frame: &OpticalFrame,
        pair: &(DetectorModel, DetectorModel),
        basis: Basis,
        share: f64,
        rng: &mut R,
    ) -> (ClickOutcome, ClickOutcome) {
        let delta = analyzer_phase(basis) - frame.phase;
        let (w0, w1) = interfere(share, delta);
        let inc0 = Incident {
            cw_power: frame.cw_power,
            pulse_peak_power: frame.pulse_peak_power * w0,
            mean_photon_number: frame.mean_photon_number * w0,
        };
        let inc1 = Incident {
            cw_power: frame.cw_power,
            pulse_peak_power: frame.pulse_peak_power * w1,
            mean_photon_number: frame.mean_photon_number * w1,
        };
        detect_frame((&inc0, &inc1), (&pair.0, &pair.1), true, rng)
    }

    /// Measure one frame. `basis_rng` drives the basis choice (active mode)
    /// or tie-breaking announcements; `noise_rng` drives detector noise and
    /// the double-click policy.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        frame: &OpticalFrame,
        basis_rng: &mut R,
        noise_rng: &mut R,
    ) -> BobSlot {
        match self.mode {
            BasisMode::Active => {
                let basis = Basis::random(basis_rng);
                let (c0, c1) = Self::detect_pair(frame, &self.pair_z, basis, 1.0, noise_rng);
                Self::resolve(frame.slot_index, basis, c0, c1, noise_rng)
            }
            BasisMode::Passive => {
                let pair_x = self.pair_x.as_ref().expect("passive receiver has an X pair");
                let (z0, z1) = Self::detect_pair(frame, &self.pair_z, Basis::Z, 0.5, noise_rng);
                let (x0, x1) = Self::detect_pair(frame, pair_x, Basis::X, 0.5, noise_rng);
                Self::resolve_passive(frame.slot_index, [z0, z1, x0, x1], basis_rng, noise_rng)
            }
        }
    }

    /// Double clicks resolve to a uniformly random bit (squashing policy).
    fn resolve<R: Rng + ?Sized>(
        slot_index: u64,
        basis: Basis,
        c0: ClickOutcome,
        c1: ClickOutcome,
        noise_rng: &mut R,
    ) -> BobSlot {
        let (resolved_bit, double_click) = match (c0.clicked, c1.clicked) {
            (false, false) => (None, false),
            (true, false) => (Some(false), false),
            (false, true) => (Some(true), false),
            (true, true) => (Some(noise_rng.random::<bool>()), true),
        };
        BobSlot {
            slot_index,
            basis,
            clicked0: c0.clicked,
            clicked1: c1.clicked,
            cause0: c0.cause,
            cause1: c1.cause,
            resolved_bit,
            double_click,
        }
    }

    /// Reduce the four passive-analyzer outcomes to one record. Multiple
    /// clicks across detectors pick a uniformly random one of the clicking
    /// detectors and count as a double click.
    fn resolve_passive<R: Rng + ?Sized>(
        slot_index: u64,
        outcomes: [ClickOutcome; 4],
        basis_rng: &mut R,
        noise_rng: &mut R,
    ) -> BobSlot {
        // detector layout: [Z0, Z1, X0, X1]
        let clicking: Vec<usize> = (0..4).filter(|&i| outcomes[i].clicked).collect();
        let (basis, resolved_bit, double_click) = match clicking.len() {
            0 => (Basis::random(basis_rng), None, false),
            1 => {
                let d = clicking[0];
                (if d < 2 { Basis::Z } else { Basis::X }, Some(d % 2 == 1), false)
            }
            _ => {
                let d = clicking[noise_rng.random_range(0..clicking.len())];
                (if d < 2 { Basis::Z } else { Basis::X }, Some(d % 2 == 1), true)
            }
        };
        let (i0, i1) = match basis {
            Basis::Z => (0, 1),
            Basis::X => (2, 3),
        };
        BobSlot {
            slot_index,
            basis,
            clicked0: outcomes[i0].clicked,
            clicked1: outcomes[i1].clicked,
            cause0: outcomes[i0].cause,
            cause1: outcomes[i1].cause,
            resolved_bit,
            double_click,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiftOutcome {
    pub alice_bits: Vec<bool>,
    pub bob_bits: Vec<bool>,
    /// Slot indices kept, in slot order.
    pub kept_slots: Vec<u64>,
    /// Slot indices where Bob had any resolved click.
    pub detected_slots: Vec<u64>,
}

/// Keep slots where Bob clicked and the bases match; the announcements and
/// the agreed index list go on the transcript.
pub fn sift(
    alice: &[AliceSlot],
    bob: &[BobSlot],
    transcript: &mut Transcript,
) -> Result<SiftOutcome> {
    if alice.len() != bob.len() {
        return Err(Error::SlotCountMismatch { alice: alice.len(), bob: bob.len() });
    }
    let detected: Vec<&BobSlot> = bob.iter().filter(|b| b.resolved_bit.is_some()).collect();
    let detected_slots: Vec<u64> = detected.iter().map(|b| b.slot_index).collect();
    let bases: Vec<Basis> = detected.iter().map(|b| b.basis).collect();
    transcript.push(TranscriptEvent::DetectionReport { slots: detected_slots.clone() });
    transcript.push(TranscriptEvent::BasisAnnouncement { bases });

    let mut out = SiftOutcome { detected_slots, ..Default::default() };
    for b in &detected {
        let a = &alice[b.slot_index as usize];
        debug_assert_eq!(a.slot_index, b.slot_index);
        if a.basis == b.basis {
            out.kept_slots.push(b.slot_index);
            out.alice_bits.push(a.bit);
            out.bob_bits.push(b.resolved_bit.expect("detected slot has a bit"));
        }
    }
    transcript.push(TranscriptEvent::SiftResult { kept_slots: out.kept_slots.clone() });
    Ok(out)
}

/// Disclose a random sample of the sifted keys, return the mismatch
/// fraction, and remove the disclosed positions from both keys.
pub fn estimate_qber<R: Rng + ?Sized>(
    alice_key: &mut Vec<bool>,
    bob_key: &mut Vec<bool>,
    sample_fraction: f64,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<f64> {
    if alice_key.is_empty() || bob_key.is_empty() {
        return Err(Error::EmptySiftedKey);
    }
    if alice_key.len() != bob_key.len() {
        return Err(Error::SlotCountMismatch { alice: alice_key.len(), bob: bob_key.len() });
    }
    let n = alice_key.len();
    let k = ((n as f64 * sample_fraction).round() as usize).clamp(1, n);
    let mut indices: Vec<usize> = sample(rng, n, k).into_iter().collect();
    indices.sort_unstable();
    let alice_bits: Vec<bool> = indices.iter().map(|&i| alice_key[i]).collect();
    let bob_bits: Vec<bool> = indices.iter().map(|&i| bob_key[i]).collect();
    let mismatches = alice_bits.iter().zip(&bob_bits).filter(|(a, b)| a != b).count();
    let qber = mismatches as f64 / k as f64;
    transcript.push(TranscriptEvent::QberSample {
        indices: indices.clone(),
        alice_bits,
        bob_bits,
    });
    for &i in indices.iter().rev() {
        alice_key.remove(i);
        bob_key.remove(i);
    }
    Ok(qber)
}

/// Compress the reconciled key with a Toeplitz hash; seed and length are
/// public and go on the transcript.
pub fn privacy_amplify(
    key: &[bool],
    seed: &[bool],
    out_len: usize,
    transcript: &mut Transcript,
) -> Result<Vec<bool>> {
    let final_key = toeplitz_hash(key, seed, out_len)?;
    transcript.push(TranscriptEvent::PaSeed { seed: seed.to_vec(), out_len });
    Ok(final_key)
}

/// Key evolution through the post-processing stages.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    pub raw: Vec<bool>,
    pub sifted: Vec<bool>,
    pub corrected: Vec<bool>,
    pub final_key: Vec<bool>,
}

impl KeyMaterial {
    /// |final| <= |corrected| <= |sifted| <= |raw|
    pub fn lengths_monotone(&self) -> bool {
        self.final_key.len() <= self.corrected.len()
            && self.corrected.len() <= self.sifted.len()
            && self.sifted.len() <= self.raw.len()
    }
}
