//! Seeded random number generation shared by every sampling step.
//!
//! All randomness flows through [`seeded`], so a run is replayable from its
//! 64-bit seed on any platform. The algorithm identifier is written into run
//! manifests next to the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier recorded in provenance for the generator returned by [`seeded`].
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64";

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed, e.g. one per CV repeat or per stage.
pub fn derive(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
