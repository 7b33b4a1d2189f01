//! Deterministic seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream-specific RNG derived from a root seed and a list of keys.
pub fn derive(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let s = keys.iter().fold(mix64(seed), |acc, k| mix64(acc ^ mix64(*k)));
    ChaCha8Rng::seed_from_u64(s)
}
