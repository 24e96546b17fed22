//! Seeded randomness.
//!
//! All randomness in the crate flows from a `u64` seed through two fixed
//! pieces:
//!
//! * [`derive_seed`] is the SplitMix64 output function applied to
//!   `seed + (stream + 1) · 0x9E3779B97F4A7C15`, i.e. element `stream` of the
//!   SplitMix64 sequence started at `seed`. It turns one user seed into
//!   independent per-purpose seeds (per epoch, per shuffled column, ...).
//! * [`rng_from_seed`] builds a ChaCha8 stream cipher generator (a 64-bit
//!   counter-based generator) via `SeedableRng::seed_from_u64`.
//!
//! Permutations use Fisher–Yates driven by Lemire's unbiased bounded-integer
//! method on raw 64-bit outputs, so they do not depend on how a `rand`
//! release implements `gen_range` or `shuffle`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent child seed number `stream` of `seed`.
#[inline]
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// The crate's generator, seeded deterministically.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform integer in `0..bound` (`bound > 0`), without modulo bias.
pub(crate) fn bounded_u64<R: RngCore>(rng: &mut R, bound: u64) -> u64 {
    let mut m = u128::from(rng.next_u64()) * u128::from(bound);
    if (m as u64) < bound {
        let threshold = bound.wrapping_neg() % bound;
        while (m as u64) < threshold {
            m = u128::from(rng.next_u64()) * u128::from(bound);
        }
    }
    (m >> 64) as u64
}

/// Shuffles `items` in place with Fisher–Yates.
pub fn shuffle_in_place<T, R: RngCore>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = bounded_u64(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Uniformly random permutation of `0..n`, fully determined by `seed`.
pub fn seeded_permutation(n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("permutation length must be at least 1"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    shuffle_in_place(&mut perm, &mut rng_from_seed(seed));
    Ok(perm)
}
