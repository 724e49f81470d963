//! Counter-based random streams.
//!
//! Every Monte-Carlo draw with index `i` under seed `s` uses
//! `ChaCha8Rng::seed_from_u64(s)` with its stream set to `i`, so results do
//! not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Recorded in manifests and CSV headers.
pub const RNG_DESCRIPTION: &str = "chacha8:seed_from_u64(seed),stream=shot_index";

pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derive an independent seed for a sub-task, e.g. a different Hamiltonian draw.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(tag.wrapping_add(1 << 63));
    rng.next_u64()
}
