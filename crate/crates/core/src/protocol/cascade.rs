//! Interactive parity-exchange reconciliation (CASCADE-style).
//!
//! Each pass permutes the key with a disclosed seed, splits it into blocks,
//! and compares block parities. For every mismatched block Alice discloses
//! the left-half parities of the whole binary partition tree, so Bob (and
//! anyone replaying the transcript) can locate and flip one bit without
//! further interaction. A hash tag of Alice's key closes the exchange.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::protocol::transcript::{ParityRound, Transcript, TranscriptEvent};

/// Deterministic permutation of 0..n for a disclosed seed.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

fn parity_of(key: &[bool], seg: &[usize]) -> bool {
    seg.iter().fold(false, |acc, &i| acc ^ key[i])
}

/// Left-half parities of every internal node, depth-first, for one block.
fn build_parity_tree(key: &[bool], seg: &[usize], out: &mut Vec<bool>) {
    if seg.len() <= 1 {
        return;
    }
    let mid = seg.len() / 2;
    out.push(parity_of(key, &seg[..mid]));
    build_parity_tree(key, &seg[..mid], out);
    build_parity_tree(key, &seg[mid..], out);
}

/// Follow the disclosed tree against `key`, returning the key position whose
/// bit disagrees with Alice's. A segment of length L has exactly L-1 internal
/// nodes, which lets the walker skip subtrees it does not descend into.
fn walk_parity_tree(tree: &[bool], key: &[bool], seg: &[usize]) -> Result<usize> {
    if tree.len() != seg.len().saturating_sub(1) {
        return Err(Error::TruncatedTranscript("parity tree"));
    }
    let mut cursor = 0;
    let mut seg = seg;
    while seg.len() > 1 {
        let mid = seg.len() / 2;
        let alice_left = tree[cursor];
        cursor += 1;
        if parity_of(key, &seg[..mid]) != alice_left {
            seg = &seg[..mid];
        } else {
            cursor += mid - 1;
            seg = &seg[mid..];
        }
    }
    Ok(seg[0])
}

/// Short hash of a key for end-of-reconciliation verification, hex-encoded.
pub fn key_tag(key: &[bool]) -> String {
    let mut bytes = vec![0u8; key.len().div_ceil(8)];
    for (i, &bit) in key.iter().enumerate() {
        if bit {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    let digest = Sha256::new().chain_update((key.len() as u64).to_le_bytes()).chain_update(&bytes).finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct EcResult {
    pub corrected: Vec<bool>,
    pub disclosed_bits: usize,
    /// Whether Bob's corrected key matched Alice's verification tag.
    pub verified: bool,
}

/// Reconcile Bob's key against Alice's, appending all public traffic to the
/// transcript. Aborts when the estimated QBER is at or above the threshold.
pub fn error_correct<R: Rng + ?Sized>(
    alice: &[bool],
    bob: &[bool],
    qber: f64,
    abort_threshold: f64,
    schedule: &[usize],
    perm_rng: &mut R,
    transcript: &mut Transcript,
) -> Result<EcResult> {
    if qber >= abort_threshold {
        return Err(Error::QberAbort { qber, threshold: abort_threshold });
    }
    if alice.len() != bob.len() {
        return Err(Error::SlotCountMismatch { alice: alice.len(), bob: bob.len() });
    }
    let n = alice.len();
    let mut corrected = bob.to_vec();
    let mut disclosed = 0;
    for (pass_index, &block_size) in schedule.iter().enumerate() {
        let block_size = block_size.clamp(1, n.max(1));
        let perm_seed: u64 = perm_rng.random();
        let perm = permutation(n, perm_seed);
        let mut alice_parities = Vec::new();
        let mut bad_blocks = Vec::new();
        let mut parity_trees = Vec::new();
        for (block_index, seg) in perm.chunks(block_size).enumerate() {
            let ap = parity_of(alice, seg);
            alice_parities.push(ap);
            if parity_of(&corrected, seg) != ap {
                let mut tree = Vec::new();
                build_parity_tree(alice, seg, &mut tree);
                let pos = walk_parity_tree(&tree, &corrected, seg)?;
                corrected[pos] = !corrected[pos];
                bad_blocks.push(block_index);
                parity_trees.push(tree);
            }
        }
        let round = ParityRound {
            pass_index,
            perm_seed,
            block_size,
            alice_parities,
            bad_blocks,
            parity_trees,
        };
        disclosed += round.disclosed_bits();
        transcript.push(TranscriptEvent::ParityRound(round));
    }
    let tag = key_tag(alice);
    let verified = key_tag(&corrected) == tag;
    transcript.push(TranscriptEvent::VerificationTag { tag });
    Ok(EcResult { corrected, disclosed_bits: disclosed, verified })
}

/// Apply one recorded reconciliation round to a key copy, exactly as Bob
/// would have: compare own parities against Alice's recorded ones and use
/// the recorded parity trees of the flagged blocks.
pub fn replay_round(key: &mut [bool], round: &ParityRound) -> Result<()> {
    let n = key.len();
    let perm = permutation(n, round.perm_seed);
    let blocks: Vec<&[usize]> = perm.chunks(round.block_size.max(1)).collect();
    if blocks.len() != round.alice_parities.len() {
        return Err(Error::TruncatedTranscript("parity round block count"));
    }
    for (block_index, seg) in blocks.iter().enumerate() {
        if parity_of(key, seg) == round.alice_parities[block_index] {
            continue;
        }
        // a tree exists only for blocks Bob flagged; without one the
        // discrepancy cannot be repaired from the transcript
        if let Some(j) = round.bad_blocks.iter().position(|&b| b == block_index) {
            let pos = walk_parity_tree(&round.parity_trees[j], key, seg)?;
            key[pos] = !key[pos];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    /// Independent reference: locate a single flipped bit by recursive
    /// parity comparison directly between the two keys.
    fn reference_locate(alice: &[bool], bob: &[bool], seg: &[usize]) -> usize {
        if seg.len() == 1 {
            return seg[0];
        }
        let mid = seg.len() / 2;
        if parity_of(alice, &seg[..mid]) != parity_of(bob, &seg[..mid]) {
            reference_locate(alice, bob, &seg[..mid])
        } else {
            reference_locate(alice, bob, &seg[mid..])
        }
    }

    #[test]
    fn tree_walk_matches_reference_locator() {
        let mut r = rng();
        for _ in 0..50 {
            let n = 1 + r.random_range(0..64usize);
            let alice: Vec<bool> = (0..n).map(|_| r.random()).collect();
            let mut bob = alice.clone();
            let flip = r.random_range(0..n);
            bob[flip] = !bob[flip];
            let seg: Vec<usize> = (0..n).collect();
            let mut tree = Vec::new();
            build_parity_tree(&alice, &seg, &mut tree);
            let found = walk_parity_tree(&tree, &bob, &seg).unwrap();
            assert_eq!(found, reference_locate(&alice, &bob, &seg));
            assert_eq!(found, flip);
        }
    }

    #[test]
    fn equal_keys_disclose_only_block_parities() {
        let mut r = rng();
        let key: Vec<bool> = (0..256).map(|_| r.random()).collect();
        let mut t = Transcript::new();
        let res = error_correct(&key, &key, 0.0, 0.11, &[16, 32], &mut r, &mut t).unwrap();
        assert_eq!(res.corrected, key);
        assert!(res.verified);
        assert_eq!(res.disclosed_bits, 256 / 16 + 256 / 32);
    }

    #[test]
    fn single_flip_in_1024_bit_key_is_corrected() {
        let mut r = rng();
        let alice: Vec<bool> = (0..1024).map(|_| r.random()).collect();
        let mut bob = alice.clone();
        bob[613] = !bob[613];
        let mut t = Transcript::new();
        let res = error_correct(&alice, &bob, 0.001, 0.11, &[64, 128], &mut r, &mut t).unwrap();
        assert_eq!(res.corrected, alice);
        assert!(res.verified);
    }

    #[test]
    fn high_qber_aborts() {
        let key = vec![false; 64];
        let mut t = Transcript::new();
        let err = error_correct(&key, &key, 0.2, 0.11, &[8], &mut rng(), &mut t);
        assert!(matches!(err, Err(Error::QberAbort { .. })));
    }

    #[test]
    fn replay_reproduces_bob_corrections() {
        let mut r = rng();
        let alice: Vec<bool> = (0..512).map(|_| r.random()).collect();
        let mut bob = alice.clone();
        for i in [3, 200, 501] {
            bob[i] = !bob[i];
        }
        let mut t = Transcript::new();
        let res = error_correct(&alice, &bob, 0.01, 0.11, &[32, 64], &mut r, &mut t).unwrap();
        // Eve starts from Bob's raw key and replays the recorded rounds
        let mut eve = bob.clone();
        for event in t.events() {
            if let TranscriptEvent::ParityRound(round) = event {
                replay_round(&mut eve, round).unwrap();
            }
        }
        assert_eq!(eve, res.corrected);
    }
}
