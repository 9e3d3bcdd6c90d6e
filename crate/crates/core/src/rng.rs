//! Reproducible random streams.
//!
//! Every chain, replica or sample batch gets its own ChaCha8 stream selected
//! by index from a single 64-bit seed. ChaCha is counter based, so streams
//! are independent and the assignment does not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
