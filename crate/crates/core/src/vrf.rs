//! Simulation-grade verifiable random function.
//!
//! `evaluate` maps a (secret key, seed) pair to a 256-bit pseudo-random value
//! plus a proof; `verify` checks both against the holder's public key and the
//! seed. The construction is a keyed hash: the public key doubles as the
//! verification key that peers and the supervision node hold, so anyone with
//! the public key can check an output. A production elliptic-curve VRF can
//! replace this behind the same interface without touching callers.

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Width of keys, values and proofs in bytes.
pub const KEY_LEN: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VrfError {
    #[error("keygen entropy must be non-empty")]
    EmptyEntropy,
    #[error("secret key is malformed (expected {KEY_LEN} bytes)")]
    InvalidKey,
}

/// Secret half of a VRF keypair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey(Vec<u8>);

impl SecretKey {
    /// Wraps raw bytes without validation; `evaluate` rejects bad lengths.
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        SecretKey(bytes)
    }
}

/// Public verification key, the `pk` carried in contribution-list entries.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(Vec<u8>);

impl PublicKey {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        PublicKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub secret_key: SecretKey,
    pub public_key: PublicKey,
}

/// The pseudo-random number `r`: a 256-bit unsigned integer compared in
/// big-endian order, which is what the derived lexicographic `Ord` gives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VrfValue(pub [u8; 32]);

impl VrfValue {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Most significant byte, used by uniformity checks.
    pub fn top_byte(&self) -> u8 {
        self.0[0]
    }
}

/// The proof `pi` accompanying a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VrfProof(pub [u8; 32]);

impl VrfProof {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VrfOutput {
    pub value: VrfValue,
    pub proof: VrfProof,
}

/// Domain-separated hash over length-prefixed parts.
fn tag_hash(tag: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update((tag.len() as u64).to_be_bytes());
    hasher.update(tag);
    for part in parts {
        hasher.update((part.len() as u64).to_be_bytes());
        hasher.update(part);
    }
    hasher.finalize().into()
}

fn derive_public(secret: &[u8]) -> [u8; 32] {
    tag_hash(b"poc.vrf.pk", &[secret])
}

/// Derives a keypair deterministically from caller-supplied entropy.
pub fn keygen(entropy: &[u8]) -> Result<KeyPair, VrfError> {
    if entropy.is_empty() {
        return Err(VrfError::EmptyEntropy);
    }
    let secret = tag_hash(b"poc.vrf.sk", &[entropy]);
    let public = derive_public(&secret);
    Ok(KeyPair {
        secret_key: SecretKey(secret.to_vec()),
        public_key: PublicKey(public.to_vec()),
    })
}

fn eval_with_key(verification_key: &[u8], seed: &[u8]) -> VrfOutput {
    let value = tag_hash(b"poc.vrf.value", &[verification_key, seed]);
    let proof = tag_hash(b"poc.vrf.proof", &[verification_key, seed, &value]);
    VrfOutput {
        value: VrfValue(value),
        proof: VrfProof(proof),
    }
}

/// Evaluates the VRF on a seed. Pure: identical inputs give identical output.
pub fn evaluate(secret_key: &SecretKey, seed: &[u8]) -> Result<VrfOutput, VrfError> {
    if secret_key.0.len() != KEY_LEN {
        return Err(VrfError::InvalidKey);
    }
    let public = derive_public(&secret_key.0);
    Ok(eval_with_key(&public, seed))
}

/// Accepts iff `output` was produced by the secret key matching `public_key`
/// on exactly this seed. Rejection is a return value, never an error.
pub fn verify(public_key: &PublicKey, seed: &[u8], output: &VrfOutput) -> bool {
    if public_key.0.len() != KEY_LEN {
        return false;
    }
    let expected = eval_with_key(&public_key.0, seed);
    expected.value == output.value && expected.proof == output.proof
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn keygen_is_deterministic() {
        let a = keygen(b"entropy-1").unwrap();
        let b = keygen(b"entropy-1").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn keygen_distinct_entropy_gives_distinct_keys() {
        let a = keygen(b"entropy-1").unwrap();
        let b = keygen(b"entropy-2").unwrap();
        assert_ne!(a.public_key, b.public_key);
    }

    #[test]
    fn keygen_rejects_empty_entropy() {
        assert_eq!(keygen(b"").unwrap_err(), VrfError::EmptyEntropy);
    }

    #[test]
    fn evaluate_is_deterministic() {
        let kp = keygen(b"node-0").unwrap();
        let a = evaluate(&kp.secret_key, b"seed").unwrap();
        let b = evaluate(&kp.secret_key, b"seed").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_rejects_malformed_key() {
        let bad = SecretKey::from_bytes(vec![1, 2, 3]);
        assert_eq!(evaluate(&bad, b"seed").unwrap_err(), VrfError::InvalidKey);
    }

    #[test]
    fn distinct_seeds_never_collide_at_desk_scale() {
        let kp = keygen(b"node-0").unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let s1: [u8; 16] = rng.gen();
            let s2: [u8; 16] = rng.gen();
            if s1 == s2 {
                continue;
            }
            let a = evaluate(&kp.secret_key, &s1).unwrap();
            let b = evaluate(&kp.secret_key, &s2).unwrap();
            assert_ne!(a.value, b.value);
        }
    }

    #[test]
    fn values_across_keypairs_are_uniform() {
        // Top-byte chi-square over 10^4 keypairs evaluating the same seed.
        let mut counts = [0u64; 256];
        for i in 0..10_000u32 {
            let kp = keygen(&i.to_be_bytes()).unwrap();
            let out = evaluate(&kp.secret_key, b"shared-seed").unwrap();
            counts[out.value.top_byte() as usize] += 1;
        }
        let result = crate::stats::chi_square_uniform(&counts);
        assert!(
            result.p_value > 0.01,
            "top byte not uniform: chi2={} p={}",
            result.statistic,
            result.p_value
        );
    }

    #[test]
    fn roundtrip_accepts() {
        let kp = keygen(b"node-0").unwrap();
        let out = evaluate(&kp.secret_key, b"seed").unwrap();
        assert!(verify(&kp.public_key, b"seed", &out));
    }

    #[test]
    fn tampered_value_rejects() {
        let kp = keygen(b"node-0").unwrap();
        let mut out = evaluate(&kp.secret_key, b"seed").unwrap();
        out.value.0[31] = out.value.0[31].wrapping_add(1);
        assert!(!verify(&kp.public_key, b"seed", &out));
    }

    #[test]
    fn wrong_seed_rejects() {
        let kp = keygen(b"node-0").unwrap();
        let out = evaluate(&kp.secret_key, b"seed").unwrap();
        assert!(!verify(&kp.public_key, b"other-seed", &out));
    }

    #[test]
    fn foreign_key_rejects() {
        let kp = keygen(b"node-0").unwrap();
        let other = keygen(b"node-1").unwrap();
        let out = evaluate(&kp.secret_key, b"seed").unwrap();
        assert!(!verify(&other.public_key, b"seed", &out));
    }

    proptest! {
        #[test]
        fn prop_roundtrip(entropy in proptest::collection::vec(any::<u8>(), 1..64),
                          seed in proptest::collection::vec(any::<u8>(), 0..64)) {
            let kp = keygen(&entropy).unwrap();
            let out = evaluate(&kp.secret_key, &seed).unwrap();
            prop_assert!(verify(&kp.public_key, &seed, &out));
        }

        #[test]
        fn prop_single_byte_mutation_rejects(
            seed in proptest::collection::vec(any::<u8>(), 1..48),
            which in 0usize..3,
            idx in any::<usize>(),
            flip in 1u8..=255,
        ) {
            let kp = keygen(b"prop-node").unwrap();
            let mut out = evaluate(&kp.secret_key, &seed).unwrap();
            let mut seed = seed;
            let mut pk_bytes = kp.public_key.as_bytes().to_vec();
            match which {
                0 => out.value.0[idx % 32] ^= flip,
                1 => out.proof.0[idx % 32] ^= flip,
                _ => {
                    let i = idx % seed.len();
                    seed[i] ^= flip;
                }
            }
            let _ = &mut pk_bytes;
            prop_assert!(!verify(&kp.public_key, &seed, &out));
        }
    }
}
