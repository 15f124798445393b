//! Counter-based random streams.
//!
//! Every independent unit of work (a bootstrap replicate, a simulation trial)
//! owns a ChaCha stream addressed by a key derived from the user seed and the
//! unit's coordinates, so results never depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for replicate `index` at scale `scale` under `seed`.
pub(crate) fn stream(seed: u64, scale: usize, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((scale as u64) << 48) ^ index);
    rng
}

/// Derives an independent seed for a sub-experiment (e.g. one simulation
/// trial) using the SplitMix64 finaliser.
pub(crate) fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
