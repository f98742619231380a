//! Seeded random streams.
//!
//! All randomness flows through [`Rng`] (ChaCha8). Independent substreams are
//! derived from a base seed plus a tag path so that, e.g., sample `i` of a
//! dataset or the Gumbel noise of sample `i` at epoch `e` never depends on how
//! many draws other consumers made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a list of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(seed), |acc, &t| mix(acc ^ mix(t.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

pub fn rng_from(seed: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, tags))
}
