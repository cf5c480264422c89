//! Replicate random streams.
//!
//! Each replicate draws from its own ChaCha8 stream: the key is expanded from the master
//! seed and the stream id is the replicate index, so streams never overlap and a replicate
//! can be regenerated in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicateRng = ChaCha8Rng;

pub fn replicate_rng(master_seed: u64, replicate: u64) -> ReplicateRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

/// Human-readable label of a derived stream, as recorded in manifests.
pub fn stream_label(master_seed: u64, replicate: u64) -> String {
    format!("chacha8:{master_seed}:{replicate}")
}
