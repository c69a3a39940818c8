//! Per-purpose random streams derived from one run seed.
//!
//! Every consumer of randomness asks for `substream(seed, purpose, index)`.
//! The purpose selects a ChaCha stream id and the index (scenario number,
//! trial number, ...) is mixed into the key, so components can be
//! regenerated independently of each other and of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Geometry, mobility and file sizes of a scenario.
    Scenario = 1,
    /// Per-slot residual bandwidth of a scenario.
    Bandwidth = 2,
    /// Network weight initialization.
    Init = 3,
    /// Per-slot small-scale fading.
    Fading = 4,
    /// Mini-batch shuffling.
    Shuffle = 5,
    /// Active user counts of test scenarios.
    UserCount = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key for item `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index));
    rng.set_stream(purpose as u64);
    rng
}
