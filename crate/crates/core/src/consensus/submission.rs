//! Node-side protocol messages: list submissions and block proposals.

use std::sync::Arc;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::chain::{Block, BlockHash};
use crate::contribution::ContributionList;
use crate::market::Settlement;
use crate::types::{NodeId, Tick};
use crate::vrf::{self, KeyPair, PublicKey};

use super::{ComputingSubmission, ConsensusError, RandomSeed, SelectionStrategy};

fn submission_digest(
    node_id: NodeId,
    list: &ContributionList,
    vrf_out: &vrf::VrfOutput,
    pick_cp: NodeId,
    pick_cs: NodeId,
) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(node_id.0.to_be_bytes());
    hasher.update(list.canonical_serialize().as_bytes());
    hasher.update(vrf_out.value.0);
    hasher.update(vrf_out.proof.0);
    hasher.update(pick_cp.0.to_be_bytes());
    hasher.update(pick_cs.0.to_be_bytes());
    hasher.finalize().into()
}

/// Keyed tag over a message digest, checkable with the sender's public key
/// under the same trust model as the VRF construction.
pub fn sign_submission(public_key: &PublicKey, digest: &[u8; 32]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"poc.submission.sig");
    hasher.update(public_key.as_bytes());
    hasher.update(digest);
    hasher.finalize().into()
}

/// Assembles a submission from already-chosen picks; the VRF output is
/// evaluated on the round's computing seed.
pub fn build_submission(
    node_id: NodeId,
    keypair: &KeyPair,
    seed_cp: &RandomSeed,
    list: Arc<ContributionList>,
    pick_cp: NodeId,
    pick_cs: NodeId,
) -> Result<ComputingSubmission, ConsensusError> {
    let out = vrf::evaluate(&keypair.secret_key, &seed_cp.material())?;
    let digest = submission_digest(node_id, &list, &out, pick_cp, pick_cs);
    let signature = sign_submission(&keypair.public_key, &digest);
    Ok(ComputingSubmission {
        node_id,
        list,
        vrf: out,
        pick_cp,
        pick_cs,
        signature,
    })
}

/// What an honest computing node submits: its own list plus Algorithm-1
/// picks drawn from that list with its local generator.
pub fn honest_submission<R: Rng>(
    node_id: NodeId,
    keypair: &KeyPair,
    seed_cp: &RandomSeed,
    list: Arc<ContributionList>,
    rng: &mut R,
    strategy: SelectionStrategy,
) -> Result<ComputingSubmission, ConsensusError> {
    let (pick_cp, pick_cs) = super::weighted_select(&list, rng, strategy)?;
    build_submission(node_id, keypair, seed_cp, list, pick_cp, pick_cs)
}

/// Checks a submission's VRF proof and signature against the sender's
/// public key and the round's computing seed.
pub fn verify_submission(
    submission: &ComputingSubmission,
    public_key: &PublicKey,
    seed_cp: &RandomSeed,
) -> bool {
    if !vrf::verify(public_key, &seed_cp.material(), &submission.vrf) {
        return false;
    }
    let digest = submission_digest(
        submission.node_id,
        &submission.list,
        &submission.vrf,
        submission.pick_cp,
        submission.pick_cs,
    );
    sign_submission(public_key, &digest) == submission.signature
}

/// Packages transactions into a candidate block carrying the proposer's
/// VRF output on the round's candidate seed.
pub fn build_block_proposal(
    proposer: NodeId,
    keypair: &KeyPair,
    seed_cs: &RandomSeed,
    transactions: Vec<Settlement>,
    parent_hash: BlockHash,
    height: u64,
    timestamp: Tick,
) -> Result<Block, ConsensusError> {
    let out = vrf::evaluate(&keypair.secret_key, &seed_cs.material())?;
    Ok(Block::new(
        height,
        parent_hash,
        transactions,
        proposer,
        &out,
        timestamp,
    ))
}
