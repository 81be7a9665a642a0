//! Deterministic random-stream derivation.
//!
//! One master seed fans out into independent ChaCha streams: one for
//! topology generation, one per replicate for population initialization,
//! and one per (replicate, round) for everything that happens inside a
//! round. Replicates therefore never share state and can run on any number
//! of threads without changing a single draw. The derivation below is part
//! of the output contract: changing it changes every simulated trajectory.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; full-avalanche mix of one word.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash (master seed, domain, a, b) into a 256-bit ChaCha seed.
fn derive(master_seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut h = mix64(master_seed.wrapping_add(GOLDEN));
    for (i, word) in [domain, a, b].into_iter().enumerate() {
        h = mix64(h ^ mix64(word.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 2))));
    }
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        let word = mix64(h.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Stream used to wire a random topology (one per experiment).
pub fn topology_rng(master_seed: u64) -> ChaCha8Rng {
    derive(master_seed, 0, 0, 0)
}

/// Stream used to draw one replicate's initial strategies and reputations.
pub fn init_rng(master_seed: u64, replicate: u32) -> ChaCha8Rng {
    derive(master_seed, 1, u64::from(replicate), 0)
}

/// Stream consumed by round `round` of one replicate: queue draws first,
/// then imitation draws. Rounds are numbered from 1.
pub fn round_rng(master_seed: u64, replicate: u32, round: u32) -> ChaCha8Rng {
    derive(master_seed, 2, u64::from(replicate), u64::from(round))
}
