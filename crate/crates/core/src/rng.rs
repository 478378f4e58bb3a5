//! Seeded random streams. Every independent unit of work (a permutation, a
//! trial, a Monte Carlo replicate) draws from its own stream derived from the
//! master seed and the unit index, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn substream(seed: u64, unit: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit);
    rng
}

/// Derives a child seed, for handing a sub-study its own master seed.
pub fn child_seed(seed: u64, unit: u64) -> u64 {
    use rand::Rng;
    substream(seed, unit).random()
}
