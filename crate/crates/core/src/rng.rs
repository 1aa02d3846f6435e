//! Reproducible random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator keyed
//! by `(seed, stream)`. Monte Carlo loops give sample `i` its own stream `i`,
//! so results do not depend on how samples are spread over worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The generator type used throughout the crate.
pub type LabRng = ChaCha8Rng;

/// Seed and stream identifying a deterministic generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// The state for stream `stream` under the same seed.
    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> LabRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}
