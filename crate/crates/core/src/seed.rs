//! Deterministic seed derivation.
//!
//! All randomness in a run flows from one root seed. Every consumer derives
//! its own stream seed by hashing a textual label together with the root, so
//! adding a new randomized component never shifts the stream of an existing
//! one, and two runs with the same root seed are bit-identical.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a child seed from `root` and a stream label.
///
/// FNV-1a over the label bytes, mixed with the root through a splitmix64
/// finalizer. Stable across platforms and releases.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h ^ root.rotate_left(32))
}

/// Seed for the per-step stream: batch composition and negative draws.
pub fn step_seed(root: u64, step: u64) -> u64 {
    derive_seed(root, "step") ^ splitmix64(step.wrapping_add(0x9e37_79b9_7f4a_7c15))
}

/// A deterministic RNG for the given derived seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
