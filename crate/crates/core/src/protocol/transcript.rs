//! The public classical channel as an append-only event log.
//!
//! Everything Alice and Bob say during sifting, error correction and privacy
//! amplification goes through here. The log is deterministic: replaying the
//! recorded decisions against a copy of Bob's raw key reproduces Bob's final
//! key bit for bit, which is exactly what the passive eavesdropper exploits.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::protocol::Basis;

/// One pass of interactive parity reconciliation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityRound {
    pub pass_index: usize,
    /// Seed of the deterministic key permutation used in this pass.
    pub perm_seed: u64,
    pub block_size: usize,
    /// Alice's parity for every block, in block order.
    pub alice_parities: Vec<bool>,
    /// Blocks where Bob's parity disagreed.
    pub bad_blocks: Vec<usize>,
    /// For each bad block, Alice's left-half parities for every node of the
    /// binary partition tree, in depth-first order.
    pub parity_trees: Vec<Vec<bool>>,
}

impl ParityRound {
    /// Number of key bits disclosed in this round.
    pub fn disclosed_bits(&self) -> usize {
        self.alice_parities.len() + self.parity_trees.iter().map(Vec::len).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TranscriptEvent {
    /// Bob: slots in which a detector clicked.
    DetectionReport { slots: Vec<u64> },
    /// Bob: measurement basis for each reported slot, same order.
    BasisAnnouncement { bases: Vec<Basis> },
    /// Alice: reported slots where her basis matched Bob's.
    SiftResult { kept_slots: Vec<u64> },
    /// Both: disclosed sample for error estimation; sampled positions are
    /// removed from the sifted keys afterwards.
    QberSample {
        indices: Vec<usize>,
        alice_bits: Vec<bool>,
        bob_bits: Vec<bool>,
    },
    ParityRound(ParityRound),
    /// Alice: hash of her reconciled key, hex-encoded.
    VerificationTag { tag: String },
    /// Alice: Toeplitz seed and output length for privacy amplification.
    PaSeed { seed: Vec<bool>, out_len: usize },
}

/// Append-only ordered log of public messages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: TranscriptEvent) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Serialize as line-delimited JSON, one event per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for event in &self.events {
            serde_json::to_writer(&mut w, event)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line)?);
        }
        Ok(Self { events })
    }
}
