//! PoW baseline: per-round block time as a geometric number of hash
//! attempts at success probability 2^-difficulty.

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::types::Tick;

/// Simulated hash-puzzle search; returns attempts until success, one
/// attempt per tick.
pub fn pow_baseline_round<R: Rng>(difficulty: u32, rng: &mut R) -> Tick {
    assert!((1..=48).contains(&difficulty), "difficulty out of range");
    let p = 0.5f64.powi(difficulty as i32);
    let mut attempts: Tick = 1;
    while !rng.gen_bool(p) {
        attempts += 1;
    }
    attempts
}

/// Real hashing variant for wall-clock comparisons: counts SHA-256
/// evaluations until one has enough leading zero bits.
pub fn pow_hashing_round<R: Rng>(difficulty: u32, rng: &mut R) -> Tick {
    assert!((1..=48).contains(&difficulty), "difficulty out of range");
    let seed: [u8; 32] = rng.gen();
    let mut attempts: Tick = 1;
    let mut nonce: u64 = 0;
    loop {
        let mut hasher = Sha256::new();
        hasher.update(seed);
        hasher.update(nonce.to_be_bytes());
        let digest = hasher.finalize();
        if leading_zero_bits(&digest) >= difficulty {
            return attempts;
        }
        attempts += 1;
        nonce += 1;
    }
}

fn leading_zero_bits(bytes: &[u8]) -> u32 {
    let mut bits = 0;
    for &b in bytes {
        if b == 0 {
            bits += 8;
        } else {
            bits += b.leading_zeros();
            break;
        }
    }
    bits
}
