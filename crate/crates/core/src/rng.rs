//! Seed derivation. Every random stream in a run is a ChaCha8 stream keyed by
//! the master seed, with the stream number identifying its consumer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep environment, policy and harness draws disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    Environment = 1,
    Policy = 2,
    Harness = 3,
    Diagnostic = 4,
}

pub fn stream(master_seed: u64, tag: StreamTag, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    // 2^60 replications per tag is plenty.
    rng.set_stream(((tag as u64) << 60) | (index & ((1 << 60) - 1)));
    rng
}
