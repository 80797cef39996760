//! Seeded, counter-based random streams.
//!
//! Every stochastic operation takes a [`SeedStream`]. A stream is a ChaCha20
//! generator keyed by a 64-bit seed and a 64-bit stream id, so independent
//! workers can derive non-overlapping streams from one experiment seed and a
//! release can be replayed from its [`SeedRecord`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Enough information to replay a stream from its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRecord {
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone)]
pub struct SeedStream {
    rng: ChaCha20Rng,
    record: Option<SeedRecord>,
}

impl SeedStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            record: Some(SeedRecord { seed, stream }),
        }
    }

    /// Fresh OS entropy with no record kept. Use this for real releases.
    pub fn production() -> Self {
        Self {
            rng: ChaCha20Rng::from_os_rng(),
            record: None,
        }
    }

    /// A sibling stream under the same seed. Production streams stay unrecorded.
    pub fn derive(&self, stream: u64) -> Self {
        match self.record {
            Some(r) => Self::new(r.seed, stream),
            None => Self::production(),
        }
    }

    pub fn record(&self) -> Option<SeedRecord> {
        self.record
    }

    pub fn replay(record: SeedRecord) -> Self {
        Self::new(record.seed, record.stream)
    }
}

impl RngCore for SeedStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
