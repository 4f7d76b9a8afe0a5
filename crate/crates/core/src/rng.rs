//! Seed streams.
//!
//! Every random draw in the crate goes through a [`ChaCha8Rng`] seeded from a
//! `u64`. Sub-streams (per trial, per exemplar) are derived with a SplitMix64
//! finalizer so that parallel and serial schedules see the same numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent child seed from `(root, index)`.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Sequential Fisher–Yates over `0..n`, stopped after `k` swaps.
///
/// Returns the first `k` entries of the partially shuffled index array, in
/// draw order. Position `i` swaps with `i + gen_range(0..n - i)`.
pub fn fisher_yates_prefix<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "prefix longer than population");
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.gen_range(0..n - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}
