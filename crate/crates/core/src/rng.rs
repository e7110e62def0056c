//! Seed expansion.
//!
//! Every random stream is a `ChaCha8Rng` whose 64-bit seed is derived from
//! the user seed with [`derive_seed`]: the user seed, a stream tag and an
//! index are folded through the SplitMix64 finaliser. Changing one stream
//! (e.g. adding particles) never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used by the samplers and the CLI.
pub mod stream {
    pub const SIMULATE: u64 = 1;
    pub const SEED_BLOCK: u64 = 2;
    pub const PROPOSAL: u64 = 3;
    pub const ACCEPT: u64 = 4;
    pub const REFRESH: u64 = 5;
    pub const BACKWARD: u64 = 6;
    pub const CHAIN: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ index)
}

pub fn rng_for(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, index))
}
