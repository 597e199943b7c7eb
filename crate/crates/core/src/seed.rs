//! Deterministic seeding.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a 64-bit
//! seed. Batches of runs derive one seed per run from a master seed and a run
//! counter, so results never depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th run derived from a master seed.
pub fn run_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(splitmix64(index)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
