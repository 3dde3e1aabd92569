//! Keyed random streams.
//!
//! Every stochastic quantity draws from its own ChaCha stream selected by an
//! integer key, so results do not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn keyed_rng(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Stream key for a matrix entry.
pub fn pair_key(i: usize, j: usize) -> u64 {
    ((i as u64) << 32) | (j as u64 & 0xffff_ffff)
}
