//! Binary Toeplitz-matrix universal hashing for privacy amplification.

use crate::error::{Error, Result};

/// Seed length required to hash `key_len` bits down to `out_len`.
pub fn seed_len(key_len: usize, out_len: usize) -> usize {
    if out_len == 0 {
        0
    } else {
        key_len + out_len - 1
    }
}

/// Multiply the Toeplitz matrix defined by `seed` with `key` over GF(2).
///
/// Entry (i, j) of the matrix is `seed[n - 1 + i - j]` for an n-bit key, so
/// a seed that is a delta at position n-1 gives the identity on the first
/// `out_len` bits.
pub fn toeplitz_hash(key: &[bool], seed: &[bool], out_len: usize) -> Result<Vec<bool>> {
    if out_len > key.len() {
        return Err(Error::OutputTooLong { out_len, key_len: key.len() });
    }
    if out_len == 0 {
        return Ok(Vec::new());
    }
    let need = seed_len(key.len(), out_len);
    if seed.len() != need {
        return Err(Error::BadSeedLength { got: seed.len(), need });
    }
    let n = key.len();
    let mut out = vec![false; out_len];
    for (i, bit) in out.iter_mut().enumerate() {
        let mut acc = false;
        for (j, &k) in key.iter().enumerate() {
            acc ^= k && seed[n - 1 + i - j];
        }
        *bit = acc;
    }
    Ok(out)
}

/// Seed giving the identity map for keys up to `key_len` bits.
pub fn identity_seed(key_len: usize, out_len: usize) -> Vec<bool> {
    let mut seed = vec![false; seed_len(key_len, out_len)];
    if key_len > 0 && out_len > 0 {
        seed[key_len - 1] = true;
    }
    seed
}
