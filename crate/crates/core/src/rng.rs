//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! run seed and selected by a stream number, so independent stages (and
//! independent work items inside a stage) never share or depend on the order
//! of each other's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the stages of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Dictionary = 1,
    Coefficients = 2,
    EdgeOrder = 3,
    Pairing = 4,
    AgreementSample = 5,
    Perturbation = 6,
}

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    indexed_rng(seed, stream, 0)
}

/// Generator for the `index`-th work item of a stream.
pub fn indexed_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 56) ^ index);
    rng
}

/// Derives a child seed for the `index`-th work item of a stream.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    use rand::RngCore;
    indexed_rng(seed, stream, index).next_u64()
}
