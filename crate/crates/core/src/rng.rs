//! Seed splitting.
//!
//! A master `u64` seed is expanded into the 256-bit ChaCha key via
//! [`SeedableRng::seed_from_u64`]; every purpose then reads its own ChaCha stream
//! (the 64-bit stream id is the [`Stream`] discriminant). Streams never overlap,
//! so adding draws to one source leaves the sample paths of the others unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Deployment = 1,
    Distance = 2,
    Links = 3,
    CommNoise = 4,
    InitialState = 5,
}

pub fn stream(master_seed: u64, purpose: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(purpose as u64);
    rng
}
