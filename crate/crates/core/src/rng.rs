//! Deterministic random substreams.
//!
//! Every random draw in the engine comes from a ChaCha8 stream keyed by
//! `(seed, purpose, a, b)`. Distinct keys give statistically independent
//! streams, so per-particle work can be evaluated in any order (or in
//! parallel) and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Prior = 1,
    Time = 2,
    System = 3,
    Channel = 4,
    Resample = 5,
    InversionDraw = 6,
}

pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> Stream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
