//! Counter-based reproducible randomness.
//!
//! Every sampled realization ω is generated from its own ChaCha8 sub-stream
//! keyed by `(seed, counter)` on stream `stream_id`. Drawing a batch of size
//! `N` advances the counter by exactly `N`, and a [`SampleHandle`] records the
//! counter range so the same realizations can be regenerated later at a
//! different point without storing them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator for a single realization.
pub type SampleRng = ChaCha8Rng;

fn sub_stream(seed: u64, stream_id: u64, index: u64) -> SampleRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    // domain tag so that (seed, index) keys never collide with plain seeds
    key[16..24].copy_from_slice(b"vssqn-rs");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream_id);
    rng
}

/// A reproducible stream of realizations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            seed,
            stream_id,
            counter: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of realizations drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Reserves the next `batch` realizations and returns a handle to them.
    pub fn take(&mut self, batch: u64) -> SampleHandle {
        let handle = SampleHandle {
            seed: self.seed,
            stream_id: self.stream_id,
            start: self.counter,
            len: batch,
        };
        self.counter += batch;
        handle
    }

    /// A single generator for non-batched use (problem construction, pilots).
    pub fn next_rng(&mut self) -> SampleRng {
        let rng = sub_stream(self.seed, self.stream_id, self.counter);
        self.counter += 1;
        rng
    }

    /// Derives an independent stream, e.g. one per repetition or per worker.
    pub fn fork(&self, stream_id: u64) -> RngStream {
        RngStream::new(self.seed, stream_id)
    }
}

/// Descriptor of a drawn batch; replays the same realizations on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleHandle {
    seed: u64,
    stream_id: u64,
    start: u64,
    len: u64,
}

impl SampleHandle {
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    /// Generator of the `j`-th realization of the batch (0-based).
    pub fn rng(&self, j: u64) -> SampleRng {
        assert!(j < self.len, "sample index {j} out of batch of {}", self.len);
        sub_stream(self.seed, self.stream_id, self.start + j)
    }

    /// Generators for the whole batch in index order.
    pub fn iter(&self) -> impl Iterator<Item = SampleRng> + '_ {
        (0..self.len).map(move |j| self.rng(j))
    }
}
