//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by `(base seed, purpose, index)` so results never depend on
//! evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream purposes.
pub mod stream {
    pub const SIM_NOISE: u64 = 1;
    pub const SIM_ARTIFACTS: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const INIT: u64 = 10;
    pub const DROPOUT: u64 = 11;
    pub const SHUFFLE: u64 = 12;
    pub const PREDICT: u64 = 13;
    pub const EVAL_DROPOUT: u64 = 14;
}

/// SplitMix64 finaliser.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix(mix(base) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn rng_for(base: u64, purpose: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(base);
    r.set_stream(purpose);
    r
}
