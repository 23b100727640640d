//! Deterministic seed derivation and stable hashing.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a value
//! derived here, so a whole run is a pure function of its base seed. Tags
//! keep independent streams (initialization, shuffles, noise draws) from
//! colliding even when they share a base.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a 64-bit hash. Stable across platforms and releases, unlike
/// `DefaultHasher`, which makes it safe to bake into file-format behaviour.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// SplitMix64 finalizer; diffuses structured inputs into well-mixed seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive an independent seed from a base seed and a stream tag.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    splitmix64(base ^ fnv1a64(tag.as_bytes()))
}

/// Derive the seed for one epoch of a stream (shuffle order etc.).
pub fn epoch_seed(stream_seed: u64, epoch: usize) -> u64 {
    splitmix64(stream_seed ^ splitmix64(epoch as u64))
}

/// The crate-standard RNG for a derived seed.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
