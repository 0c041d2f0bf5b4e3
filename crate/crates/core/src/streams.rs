//! Reproducible random streams.
//!
//! Every replica owns four independent ChaCha8 streams selected by
//! `(seed, 4 * replica + lane)`: one drives the backward sketch, two feed
//! forward assignments and one drives the comparison random walk. Forward uniforms are addressed by event
//! index, so a forward pass is a pure function of its record and key.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifies one replica's randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub replica: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replica: u64) -> Self {
        StreamKey { seed, replica }
    }
}

impl From<u64> for StreamKey {
    fn from(seed: u64) -> Self {
        StreamKey { seed, replica: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lane {
    Backward = 0,
    Forward = 1,
    /// Second, independent forward pass used when coupled records differ.
    ForwardTruncated = 2,
    Walk = 3,
}

const LANES: u64 = 4;

/// Maps 64 random bits to the open interval `(0, 1)`: the midpoint of one of
/// `2^52` equal cells (53 bits would let the top cell round up to 1).
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// A source of independent uniforms on `(0, 1)`.
pub trait UniformSource {
    fn uniform(&mut self) -> f64;
}

fn lane_rng(key: StreamKey, lane: Lane) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
    rng.set_stream(key.replica.wrapping_mul(LANES).wrapping_add(lane as u64));
    rng
}

/// Sequential uniforms from one lane.
#[derive(Clone, Debug)]
pub struct LaneStream {
    rng: ChaCha8Rng,
    drawn: u64,
}

impl LaneStream {
    pub fn new(key: StreamKey, lane: Lane) -> Self {
        LaneStream { rng: lane_rng(key, lane), drawn: 0 }
    }

    /// Number of uniforms consumed so far.
    pub fn drawn(&self) -> u64 {
        self.drawn
    }
}

impl UniformSource for LaneStream {
    fn uniform(&mut self) -> f64 {
        self.drawn += 1;
        open_unit(self.rng.next_u64())
    }
}

/// Uniforms addressed by event index `n >= 1`.
#[derive(Clone, Debug)]
pub struct IndexedUniforms {
    rng: ChaCha8Rng,
}

impl IndexedUniforms {
    pub fn new(key: StreamKey, lane: Lane) -> Self {
        IndexedUniforms { rng: lane_rng(key, lane) }
    }

    pub fn at(&mut self, n: u64) -> f64 {
        self.rng.set_word_pos(2 * n as u128);
        open_unit(self.rng.next_u64())
    }
}
