//! Seed discipline.
//!
//! Every random decision in a run draws from its own ChaCha stream, keyed by
//! the master seed, a purpose tag and an index (usually the device id). Adding
//! devices or purposes never shifts the numbers an existing stream produces,
//! and results do not depend on the order in which devices are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Channel = 1,
    Selection = 2,
    Minibatch = 3,
    Baseline = 4,
    Data = 5,
    ModelInit = 6,
    Forced = 7,
}

/// Derive the stream for `(purpose, index)` under `master`.
pub fn stream(master: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}

/// One stream per device for a given purpose.
pub fn device_streams(master: u64, purpose: Purpose, devices: usize) -> Vec<StreamRng> {
    (0..devices as u64)
        .map(|n| stream(master, purpose, n))
        .collect()
}
