//! Named random streams derived from a single seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams of one pipeline seed. Each stage draws only from
/// its own stream, so adding draws in one stage never perturbs another.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Clusters = 1,
    Embeddings = 2,
    Sampling = 3,
    Training = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
