//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream addressed by
//! `(master seed, lane, index)`, so parallel and serial runs produce the same
//! numbers no matter how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Independent purposes get distinct lanes so their streams never overlap.
pub mod lane {
    pub const PHASE: u64 = 1;
    pub const AMPLITUDE: u64 = 2;
    pub const SHOTS: u64 = 3;
    pub const REPEAT: u64 = 4;
    pub const INIT: u64 = 5;
}

/// Finalizer from splitmix64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed, used to give each repeat or sweep point its own master seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(mix(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// The stream for `(seed, lane, index)`.
pub fn stream(seed: u64, lane: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, lane));
    rng.set_stream(index);
    rng
}
