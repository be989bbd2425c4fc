//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 seeded with the user's
//! `u64` seed. Independent sub-streams (one per series, per path, per
//! purpose) are selected with ChaCha's 64-bit stream id, so results do not
//! depend on iteration order or platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
