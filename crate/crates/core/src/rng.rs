//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, stream, counter)` and computed with ChaCha20:
//!
//! * key: the 32-byte key whose first 8 bytes are `seed` in little-endian order, rest zero;
//! * nonce/stream: `stream`, see [`stream_id`];
//! * the draw is the first `u64` (little-endian, two 32-bit words) of the keystream
//!   starting at word position `2 * counter`.
//!
//! A uniform variate is `(draw >> 11) * 2^-53`. Arrivals use the inverse CDF over the
//! support in its stated order. Streams do not depend on draw order, so results do not
//! depend on how work is split across threads.

use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::instance::{ArrivalModel, MatchingInstance, SystemState};

pub const SIDE_DEMAND: u8 = 0;
pub const SIDE_SUPPLY: u8 = 1;
pub const SIDE_CARRY_DEMAND: u8 = 2;
pub const SIDE_CARRY_SUPPLY: u8 = 3;

/// `replication << 32 | t << 20 | side << 16 | type`.
pub fn stream_id(replication: u64, t: usize, side: u8, ty: usize) -> u64 {
    (replication << 32) | ((t as u64 & 0xfff) << 20) | ((side as u64 & 0xf) << 16) | (ty as u64 & 0xffff)
}

pub fn draw_u64(seed: u64, stream: u64, counter: u64) -> u64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream);
    rng.set_word_pos(2 * counter as u128);
    rng.next_u64()
}

pub fn uniform(seed: u64, stream: u64, counter: u64) -> f64 {
    (draw_u64(seed, stream, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for an independent family of streams.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    mix64(seed ^ mix64(salt))
}

/// Order-sensitive digest of a period and state.
pub fn hash_state(t: usize, state: &SystemState) -> u64 {
    let mut h = mix64(t as u64);
    for v in state.x.iter().chain(&state.y) {
        h = mix64(h ^ *v as u64);
    }
    mix64(h ^ state.x.len() as u64)
}

pub fn draw_arrival(model: &ArrivalModel, seed: u64, replication: u64, t: usize, side: u8, ty: usize) -> u32 {
    if model.support().len() == 1 {
        return model.support()[0];
    }
    model.quantile(uniform(seed, stream_id(replication, t, side, ty), 0))
}

/// Number of `count` leftover units surviving with probability `rate` each. Rates 0 and 1
/// are exact and consume no draws.
pub fn carry(seed: u64, replication: u64, t: usize, side: u8, ty: usize, count: u32, rate: f64) -> u32 {
    if rate <= 0.0 || count == 0 {
        return 0;
    }
    if rate >= 1.0 {
        return count;
    }
    let stream = stream_id(replication, t, side, ty);
    (0..count as u64).filter(|k| uniform(seed, stream, *k) < rate).count() as u32
}

/// Realized arrivals `demand[t][i]`, `supply[t][j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePath {
    pub demand: Vec<Vec<u32>>,
    pub supply: Vec<Vec<u32>>,
}

pub fn sample_path(instance: &MatchingInstance, seed: u64) -> SamplePath {
    sample_path_for(instance, seed, 0)
}

pub fn sample_path_for(instance: &MatchingInstance, seed: u64, replication: u64) -> SamplePath {
    let horizon = instance.horizon();
    SamplePath {
        demand: (0..horizon)
            .map(|t| {
                (0..instance.m())
                    .map(|i| draw_arrival(instance.demand_arrival(t, i), seed, replication, t, SIDE_DEMAND, i))
                    .collect()
            })
            .collect(),
        supply: (0..horizon)
            .map(|t| {
                (0..instance.n())
                    .map(|j| draw_arrival(instance.supply_arrival(t, j), seed, replication, t, SIDE_SUPPLY, j))
                    .collect()
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_addressable() {
        let a = draw_u64(7, stream_id(3, 1, SIDE_SUPPLY, 2), 5);
        let b = draw_u64(7, stream_id(3, 1, SIDE_SUPPLY, 2), 5);
        assert_eq!(a, b);
        assert_ne!(a, draw_u64(7, stream_id(3, 1, SIDE_SUPPLY, 2), 6));
        assert_ne!(a, draw_u64(8, stream_id(3, 1, SIDE_SUPPLY, 2), 5));
        assert_ne!(a, draw_u64(7, stream_id(3, 1, SIDE_DEMAND, 2), 5));
    }

    #[test]
    fn counter_matches_sequential_keystream() {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&42u64.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(9);
        let seq: Vec<u64> = (0..4).map(|_| rng.next_u64()).collect();
        for (k, v) in seq.iter().enumerate() {
            assert_eq!(*v, draw_u64(42, 9, k as u64));
        }
    }

    #[test]
    fn uniform_in_unit_interval() {
        for k in 0..1000 {
            let u = uniform(1, 2, k);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn carry_extremes_are_exact() {
        assert_eq!(carry(1, 0, 0, SIDE_CARRY_DEMAND, 0, 5, 0.0), 0);
        assert_eq!(carry(1, 0, 0, SIDE_CARRY_DEMAND, 0, 5, 1.0), 5);
        assert!(carry(1, 0, 0, SIDE_CARRY_DEMAND, 0, 5, 0.5) <= 5);
    }
}
