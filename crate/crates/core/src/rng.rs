//! Seeding and substreams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded through
//! [`rng_for`]. Substream seeds are derived from a master seed and a path of
//! integers (for example `[k, restart]`) by folding each component through
//! the SplitMix64 finalizer. ChaCha8 and SplitMix64 are fully specified and
//! platform independent, so a given master seed reproduces the same points,
//! initializations and reference sets everywhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a substream seed from `master` and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &component| {
            splitmix64(acc ^ splitmix64(component.wrapping_add(GOLDEN_GAMMA)))
        })
}

pub fn rng_for(master: u64, path: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Stream tags keep the seeds of unrelated consumers apart.
pub(crate) mod stream {
    pub const RESTART: u64 = 1;
    pub const REFERENCE_DATA: u64 = 2;
    pub const REFERENCE_PROFILE: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
    pub const GENERATOR_CENTERS: u64 = 5;
    pub const GENERATOR_POINTS: u64 = 6;
}
