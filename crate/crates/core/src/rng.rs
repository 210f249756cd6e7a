//! Seeding conventions.
//!
//! Every random draw in the crate goes through [`ChaCha8Rng`] (rand_chacha 0.9)
//! seeded with `seed_from_u64`, and Gaussian variates come from
//! `rand_distr::StandardNormal` (ziggurat). Both are platform independent, so a
//! seed pins every generated byte.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for replication `index` of an experiment with `base_seed`.
pub fn replication_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add(index as u64)
}

/// splitmix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derived stream seed, e.g. for fold assignment (`stream = 0`) or fold `k`
/// (`stream = k + 1`) of a fit seeded with `seed`.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0xD1B5_4A32_D192_ED03)))
}
