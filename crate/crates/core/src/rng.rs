//! Seeded random streams.
//!
//! Every random draw in a simulation comes from ChaCha8 (`rand_chacha` 0.3,
//! `ChaCha8Rng`). A generator is keyed by `ChaCha8Rng::seed_from_u64(seed)` and
//! then moved onto one of the fixed [`Stream`] ids with `set_stream`, so the
//! demand sequence, the context sequence and the policy's sampling never share
//! key material. Uniform draws are `rand` 0.8's `Standard` `f64`: the top 53
//! bits of one `u64`, scaled by `2^-53`.
//!
//! Replication `r` of an experiment with base seed `s` uses seed `s + r`
//! (wrapping).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids within one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Demand = 0,
    Context = 1,
    Policy = 2,
    Noise = 3,
    Hardness = 4,
    Instance = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn replication_seed(base: u64, replication: u64) -> u64 {
    base.wrapping_add(replication)
}

/// Uniform draw in `[0, 1)`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen::<f64>()
}
