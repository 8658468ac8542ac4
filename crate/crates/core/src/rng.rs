//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed and
//! positioned on a 64-bit stream id, so `(master_seed, stream_id)` fully
//! determines the draw sequence. Stream ids pack a trial index into the high
//! 32 bits and an agent id into the low 32 bits.
//!
//! Uniforms are built from the top 53 bits of `next_u64`, which keeps the
//! sequence independent of any distribution crate's internals.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Agent slot reserved for trial-level draws (seeded tie-breaks).
pub const TRIAL_SLOT: u32 = u32::MAX;

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    /// Stream for `agent_id` (1-based) inside trial `trial_id`.
    pub fn for_agent(master_seed: u64, trial_id: u32, agent_id: u32) -> Self {
        Self::new(master_seed, stream_id(trial_id, agent_id))
    }

    /// Trial-level stream, disjoint from every agent stream.
    pub fn for_trial(master_seed: u64, trial_id: u32) -> Self {
        Self::new(master_seed, stream_id(trial_id, TRIAL_SLOT))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`; one `u64` draw.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform on `(0, 1]`; one `u64` draw. Safe to pass to `ln`.
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Bernoulli(p); always exactly one draw, even for p in {0, 1}.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `0..n` via rejection; `n > 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.inner.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }
}

pub fn stream_id(trial_id: u32, agent_id: u32) -> u64 {
    (u64::from(trial_id) << 32) | u64::from(agent_id)
}
