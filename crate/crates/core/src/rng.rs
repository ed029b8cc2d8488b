//! Reproducible random-number streams.
//!
//! Every stochastic operation in this crate draws from a [`RngStream`]:
//! a (base seed, stream id) pair backed by the counter-based ChaCha8
//! generator. Identical pairs reproduce identical draw sequences across
//! runs and thread schedules, so trajectory-level parallelism never
//! couples draw orders between workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Handle for one deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub base_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        Self {
            base_seed,
            stream_id,
        }
    }

    /// Instantiates the generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
