//! Seeded random streams.
//!
//! All simulation in this crate draws from ChaCha8. A run is identified by a
//! master seed; independent pieces of work (replicates, trials, separations)
//! each take their own ChaCha stream, selected by a 64-bit stream id, from the
//! generator keyed by that master seed. ChaCha output is specified bit for bit,
//! so datasets are reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for a (group, index) pair, e.g. (separation slot, replicate).
pub fn stream_id(group: u32, index: u32) -> u64 {
    (u64::from(group) << 32) | u64::from(index)
}
