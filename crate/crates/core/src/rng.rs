//! Counter-style random streams: each `(seed, iteration, role)` gets its own
//! ChaCha stream, so a chain replays bit-identically from any checkpoint and
//! concurrent chains never share randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Momentum = 0,
    Accept = 1,
}

pub fn stream(seed: u64, iteration: u64, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration.wrapping_mul(2).wrapping_add(role as u64));
    rng
}
