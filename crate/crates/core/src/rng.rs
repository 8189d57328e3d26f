//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha8 generator keyed by a `u64` seed
//! plus a stream id, so mapping, training and baseline sampling never share
//! state even when they are driven by the same member seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 0,
    Tree = 1,
    Mapping = 2,
    Shuffle = 3,
    Baseline = 4,
    Search = 5,
    Synthetic = 6,
    Subsample = 7,
}

pub fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
