//! Seeded, independently addressable random streams.
//!
//! Every source of randomness in the crate draws from a `ChaCha8Rng` stream
//! addressed by `(seed, stream id)`. Distinct stream ids under the same seed
//! never overlap, which is what lets episodes and evaluation trials be
//! generated independently of ordering.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Create the stream `stream_id` of the generator family `seed`.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
