//! Participant node state machine: credential tracking, list submission,
//! block proposal and voting, shaped by the node's behavior policy.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand_chacha::ChaCha20Rng;

use crate::chain::{Block, BlockHash};
use crate::consensus::{
    build_block_proposal, honest_submission, CommitteeDispatch, ComputingSubmission,
    RandomSeed, RoundEndBroadcast, SelectionStrategy,
};
use crate::contribution::{ContributionEntry, ContributionList};
use crate::market::{MatchId, Settlement};
use crate::types::{NodeId, Tick};
use crate::vrf::{self, KeyPair, PublicKey};

use super::config::BehaviorPolicy;
use super::network::Message;

#[derive(Debug)]
pub struct SimNode {
    pub id: NodeId,
    pub keypair: KeyPair,
    pub policy: BehaviorPolicy,
    pub rng: ChaCha20Rng,
    /// Generation devices owned by this node, fixed at startup.
    pub devices: u32,
    // Credentials received for the next round.
    computing_grant: Option<(RandomSeed, Arc<ContributionList>)>,
    candidate_grant: Option<RandomSeed>,
    // Credentials in force for the current round.
    active_computing: Option<(RandomSeed, Arc<ContributionList>)>,
    active_candidate: Option<RandomSeed>,
    round_end: Option<RoundEndBroadcast>,
}

impl SimNode {
    pub fn new(
        id: NodeId,
        keypair: KeyPair,
        policy: BehaviorPolicy,
        rng: ChaCha20Rng,
        devices: u32,
    ) -> Self {
        SimNode {
            id,
            keypair,
            policy,
            rng,
            devices,
            computing_grant: None,
            candidate_grant: None,
            active_computing: None,
            active_candidate: None,
            round_end: None,
        }
    }

    /// Applies a delivered protocol message to local state.
    pub fn receive(&mut self, message: &Message) {
        match message {
            Message::Dispatch(CommitteeDispatch::Computing { seed, list }) => {
                self.computing_grant = Some((seed.clone(), list.clone()));
            }
            Message::Dispatch(CommitteeDispatch::Candidate { seed }) => {
                self.candidate_grant = Some(seed.clone());
            }
            Message::RoundEnd(broadcast) => {
                self.round_end = Some(broadcast.clone());
            }
            // Submissions, proposals and votes are handled by the engine.
            _ => {}
        }
    }

    /// Activates whatever credentials arrived during the previous round.
    pub fn begin_round(&mut self) {
        self.active_computing = self.computing_grant.take();
        self.active_candidate = self.candidate_grant.take();
        self.round_end = None;
    }

    pub fn is_computing(&self) -> bool {
        self.active_computing.is_some()
    }

    pub fn is_candidate(&self) -> bool {
        self.active_candidate.is_some()
    }

    /// Builds this node's list submission, if it holds computing
    /// credentials. Honest nodes submit the reference list; forgers and
    /// colluders submit a deterministic inflation of their targets.
    pub fn make_submission(
        &mut self,
        reference_list: &Arc<ContributionList>,
        forge_targets: &BTreeSet<NodeId>,
        strategy: SelectionStrategy,
    ) -> Option<ComputingSubmission> {
        let (seed, _received) = self.active_computing.as_ref()?.clone();
        let list = match self.policy {
            BehaviorPolicy::ListForger | BehaviorPolicy::Colluder { .. } => {
                Arc::new(forge_list(reference_list, forge_targets))
            }
            _ => Arc::clone(reference_list),
        };
        honest_submission(self.id, &self.keypair, &seed, list, &mut self.rng, strategy).ok()
    }

    /// Packages the mempool into a proposed block, if this node holds
    /// candidate credentials. Invalid-block proposers tamper with one
    /// transaction, or fabricate one when the mempool is empty.
    pub fn make_proposal(
        &mut self,
        mempool: &[Settlement],
        parent_hash: BlockHash,
        height: u64,
        timestamp: Tick,
    ) -> Option<Block> {
        let seed = self.active_candidate.as_ref()?.clone();
        let mut transactions = mempool.to_vec();
        if self.policy == BehaviorPolicy::InvalidBlockProposer {
            match transactions.first_mut() {
                Some(tx) => tx.amount_paid += 1,
                None => transactions.push(Settlement {
                    match_id: MatchId(u64::MAX),
                    round_index: 0,
                    buyer: self.id,
                    seller: self.id,
                    energy_contracted: 1,
                    energy_delivered: 1,
                    unit_price: 1,
                    amount_paid: 1,
                    refund: 0,
                }),
            }
        }
        build_block_proposal(
            self.id,
            &self.keypair,
            &seed,
            transactions,
            parent_hash,
            height,
            timestamp,
        )
        .ok()
    }

    /// Verifies the leading block the way an ordinary node would: chain
    /// position, proposer membership and VRF evidence from the round-end
    /// broadcast, and every transaction against the settlements this node
    /// observed on the platform. `None` when the broadcast never arrived.
    pub fn vote_on(
        &self,
        block: &Block,
        parent_hash: BlockHash,
        height: u64,
        expected_txs: &BTreeSet<Vec<u8>>,
        registry: &BTreeMap<NodeId, PublicKey>,
    ) -> Option<bool> {
        let broadcast = self.round_end.as_ref()?;
        let structural = block.compute_hash() == block.hash
            && block.previous_hash == parent_hash
            && block.height == height;
        let member = broadcast.candidates_cs.contains(&block.proposer);
        let vrf_ok = registry
            .get(&block.proposer)
            .map(|pk| vrf::verify(pk, &broadcast.seed_cs.material(), &block.vrf_output()))
            .unwrap_or(false);
        let txs_ok = block
            .transactions
            .iter()
            .all(|tx| expected_txs.contains(&tx.canonical_bytes()));
        Some(structural && member && vrf_ok && txs_ok)
    }
}

/// Deterministic list forgery: inflate the targets' standing so every
/// colluder in a group produces byte-identical output.
fn forge_list(base: &ContributionList, targets: &BTreeSet<NodeId>) -> ContributionList {
    let entries: Vec<ContributionEntry> = base
        .entries()
        .iter()
        .cloned()
        .map(|mut entry| {
            if targets.contains(&entry.node_id) {
                entry.value = entry.value * 10.0 + 100.0;
                entry.ce_value = entry.ce_value * 10.0 + 100.0;
                entry.weight = entry.weight * 10.0 + 1.0;
            }
            entry
        })
        .collect();
    ContributionList::from_entries(entries)
}
