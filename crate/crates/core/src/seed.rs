//! Stable hashing for seed derivation.
//!
//! `std`'s `DefaultHasher` is not stable across releases, so everything that
//! must be reproducible from a seed goes through these helpers instead.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded FNV-1a over `bytes`, finalized with splitmix64.
pub fn hash_bytes(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ mix64(seed);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    mix64(h)
}

/// Hash a sequence of string parts; parts are length-prefixed so
/// `["ab", "c"]` and `["a", "bc"]` differ.
pub fn hash_parts(seed: u64, parts: &[&str]) -> u64 {
    let mut h = mix64(seed);
    for part in parts {
        h = hash_bytes(h ^ part.len() as u64, part.as_bytes());
    }
    h
}

/// Independent seed for a named sub-computation.
pub fn substream(seed: u64, parts: &[&str]) -> u64 {
    hash_parts(seed, parts)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Map a hash to a uniform value in `[0, 1)`.
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
