//! Deterministic RNG derivation.
//!
//! Every random draw in the crate flows through a ChaCha8 stream seeded from
//! a user seed mixed with the identifying integers of the thing being
//! sampled (fragment labels, gap position, ...). That keeps results
//! independent of iteration order and identical across runs and platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix an arbitrary list of integers into one 64-bit seed.
pub(crate) fn mix(parts: &[u64]) -> u64 {
    let mut state = 0x6a09_e667_f3bc_c908; // arbitrary nonzero start
    let mut acc = 0u64;
    for &p in parts {
        state ^= p;
        acc ^= splitmix64(&mut state);
    }
    acc
}

/// A ChaCha8 stream keyed by the given integers.
pub(crate) fn rng_from(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}
