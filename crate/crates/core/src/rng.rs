//! Counter-based random streams.
//!
//! Every random draw in the crate is addressed by an [`RngStreamKey`]
//! `(seed, iteration, time_index, particle_index, channel)`. The key is hashed
//! into a 64-bit starting counter and the stream emits SplitMix64 outputs of
//! consecutive counter values. Two consequences:
//!
//! - a draw depends only on its key, never on how many draws other particles
//!   made before it, so particle loops may run in any order or on any number
//!   of threads and still produce bit-identical results;
//! - creating a stream costs a handful of integer multiplications, cheap
//!   enough to create several per particle per time step.

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Purpose of a draw. Distinct channels of the same (seed, iteration, time,
/// particle) coordinates are independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    RecruitmentGamma,
    RecruitmentPoisson,
    SurvivalGamma,
    SurvivalBinomial,
    Measurement,
    Perturbation,
    Resampling,
    /// Initial-state draws for models with a random initial condition.
    Initial,
}

impl Channel {
    fn tag(self) -> u64 {
        match self {
            Channel::RecruitmentGamma => 1,
            Channel::RecruitmentPoisson => 2,
            Channel::SurvivalGamma => 3,
            Channel::SurvivalBinomial => 4,
            Channel::Measurement => 5,
            Channel::Perturbation => 6,
            Channel::Resampling => 7,
            Channel::Initial => 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStreamKey {
    pub seed: u64,
    pub iteration: u64,
    pub time_index: u64,
    pub particle_index: u64,
    pub channel: Channel,
}

impl RngStreamKey {
    pub fn new(seed: u64) -> Self {
        RngStreamKey {
            seed,
            iteration: 0,
            time_index: 0,
            particle_index: 0,
            channel: Channel::Measurement,
        }
    }

    pub fn iteration(self, iteration: u64) -> Self {
        RngStreamKey { iteration, ..self }
    }

    pub fn time(self, time_index: u64) -> Self {
        RngStreamKey { time_index, ..self }
    }

    pub fn particle(self, particle_index: u64) -> Self {
        RngStreamKey {
            particle_index,
            ..self
        }
    }

    pub fn channel(self, channel: Channel) -> Self {
        RngStreamKey { channel, ..self }
    }

    fn counter(&self) -> u64 {
        let mut h = mix64(self.seed ^ 0x6a09_e667_f3bc_c908);
        for (field, salt) in [
            (self.iteration, 0xbb67_ae85_84ca_a73b_u64),
            (self.time_index, 0x3c6e_f372_fe94_f82b),
            (self.particle_index, 0xa54f_f53a_5f1d_36f1),
            (self.channel.tag(), 0x510e_527f_ade6_82d1),
        ] {
            h = mix64(h ^ mix64(field.wrapping_add(salt)));
        }
        h
    }

    /// The random stream addressed by this key.
    pub fn stream(&self) -> KeyedStream {
        KeyedStream {
            counter: self.counter(),
        }
    }
}

/// Derive the `index`-th child seed from a master seed (used for replicate
/// filters and optimizer restarts).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ 0x1f83_d9ab_fb41_bd6b).wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)))
}

/// SplitMix64 output sequence starting at a keyed counter.
#[derive(Clone, Debug)]
pub struct KeyedStream {
    counter: u64,
}

impl RngCore for KeyedStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(GOLDEN_GAMMA);
        mix64(self.counter)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}
