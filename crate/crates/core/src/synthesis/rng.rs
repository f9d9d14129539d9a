//! Seeding conventions. A replicate with index `k` of an ensemble with base
//! seed `s` uses seed `s ^ k`; coordinate `i` of a sample draws from ChaCha
//! stream `i + 1` of that seed, so no two (replicate, coordinate) pairs share
//! a stream and the output never depends on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn replicate_seed(base_seed: u64, index: u64) -> u64 {
    base_seed ^ index
}

pub fn coordinate_rng(seed: u64, coordinate: usize) -> ChaCha8Rng {
    substream_rng(seed, 0, coordinate)
}

/// Stream `(tag << 32) + coordinate + 1`; distinct tags give independent
/// families of coordinate streams under the same seed.
pub fn substream_rng(seed: u64, tag: u32, coordinate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag as u64) << 32) + coordinate as u64 + 1);
    rng
}
