//! Deterministic RNG streams.
//!
//! Every randomized routine takes a `u64` seed. Independent sub-tasks (trials,
//! rounds, restarts, spike samples) draw from their own ChaCha stream keyed by
//! `(seed, stream)`, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Two-level stream key, e.g. (purpose, index).
pub fn substream(seed: u64, purpose: u32, index: u32) -> Rng {
    stream(seed, ((purpose as u64) << 32) | index as u64)
}
