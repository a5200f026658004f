//! The supervision node: seed generation, committee bookkeeping, list
//! validation, dispatch, round-end broadcast and block finalization.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::chain::{Block, Chain};
use crate::contribution::{ContributionLedger, ContributionList};
use crate::market::Settlement;
use crate::types::{NodeId, Tick};
use crate::vrf::{self, KeyPair, PublicKey};

use super::{
    draw_weighted, validate_lists, Audience, CommitteeDispatch, ComputingSubmission,
    ConsensusError, FlagCause, MaliciousFlag, Phase, ProtocolConfig, RandomSeed,
    RoundEndBroadcast, RoundState,
};

/// Result of validating one round's submissions.
#[derive(Clone, Debug)]
pub struct SubmissionOutcome {
    /// True when no list reached agreement and the supervision node fell
    /// back to the previous agreed list and reselected committees itself.
    pub consensus_failed: bool,
}

/// Vote collection result for one candidate block.
#[derive(Clone, Copy, Debug)]
pub struct VoteTally {
    pub approvals: usize,
    pub eligible: usize,
}

impl VoteTally {
    /// Strict majority: more than half of eligible voters approved.
    pub fn majority(&self) -> bool {
        self.approvals * 2 > self.eligible
    }
}

#[derive(Clone, Debug)]
pub struct FinalizeSummary {
    pub appended: Block,
    pub proposer: NodeId,
    /// Leading proposers whose block lost the vote, in rejection order.
    pub rejected_leaders: Vec<NodeId>,
    /// True when every proposal failed and the supervision node appended
    /// an empty block it signed itself.
    pub empty_round: bool,
}

/// Committees staged for the next round during the current one.
#[derive(Clone, Debug)]
struct StagedRound {
    committee_cp: BTreeSet<NodeId>,
    candidates_cs: BTreeSet<NodeId>,
    seed_cp: RandomSeed,
    seed_cs: RandomSeed,
}

#[derive(Clone, Debug)]
pub struct Supervisor {
    config: ProtocolConfig,
    keypair: KeyPair,
    registry: BTreeMap<NodeId, PublicKey>,
    rng: ChaCha20Rng,
    flags: BTreeMap<NodeId, MaliciousFlag>,
    agreed_list: Arc<ContributionList>,
    round: RoundState,
    staged: Option<StagedRound>,
    pub fallback_rounds: u64,
}

impl Supervisor {
    /// Sets up round 0: uniformly sampled disjoint committees over the
    /// registered participants, with at least one node left ordinary.
    pub fn bootstrap(
        registry: BTreeMap<NodeId, PublicKey>,
        initial_list: ContributionList,
        config: ProtocolConfig,
        keypair: KeyPair,
        mut rng: ChaCha20Rng,
    ) -> Result<Self, ConsensusError> {
        if config.committee_cp_size == 0 || config.committee_cs_size == 0 {
            return Err(ConsensusError::Configuration(
                "committee sizes must be positive".into(),
            ));
        }
        if config.threshold_n == 0 {
            return Err(ConsensusError::Configuration(
                "threshold must be at least 1".into(),
            ));
        }
        let needed = config.committee_cp_size + config.committee_cs_size + 1;
        if registry.len() < needed {
            return Err(ConsensusError::Configuration(format!(
                "{} nodes cannot host committees of {} and {} plus an ordinary node",
                registry.len(),
                config.committee_cp_size,
                config.committee_cs_size
            )));
        }
        if registry.contains_key(&NodeId::SUPERVISOR) {
            return Err(ConsensusError::Configuration(
                "supervision node cannot be a participant".into(),
            ));
        }

        let mut pool: Vec<NodeId> = registry.keys().copied().collect();
        let sample = |pool: &mut Vec<NodeId>, k: usize, rng: &mut ChaCha20Rng| {
            let mut set = BTreeSet::new();
            for _ in 0..k {
                let idx = rng.gen_range(0..pool.len());
                set.insert(pool.remove(idx));
            }
            set
        };
        let committee_cp = sample(&mut pool, config.committee_cp_size, &mut rng);
        let candidates_cs = sample(&mut pool, config.committee_cs_size, &mut rng);

        let seed_cp = make_seed(&mut rng, 0, Audience::Cp);
        let seed_cs = make_seed(&mut rng, 0, Audience::Cs);
        let round = RoundState {
            round_index: 0,
            seed_cp,
            seed_cs,
            committee_cp,
            candidates_cs,
            window_period: config.window_period,
            trade_limit: config.trade_limit,
            trade_time: config.trade_time,
            phase: Phase::Computing,
        };
        Ok(Supervisor {
            config,
            keypair,
            registry,
            rng,
            flags: BTreeMap::new(),
            agreed_list: Arc::new(initial_list),
            round,
            staged: None,
            fallback_rounds: 0,
        })
    }

    pub fn round(&self) -> &RoundState {
        &self.round
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn agreed_list(&self) -> &Arc<ContributionList> {
        &self.agreed_list
    }

    pub fn registry(&self) -> &BTreeMap<NodeId, PublicKey> {
        &self.registry
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.keypair.public_key
    }

    pub fn flags(&self) -> impl Iterator<Item = &MaliciousFlag> {
        self.flags.values()
    }

    pub fn flagged_set(&self) -> BTreeSet<NodeId> {
        self.flags.keys().copied().collect()
    }

    pub fn is_flagged(&self, node_id: NodeId) -> bool {
        self.flags.contains_key(&node_id)
    }

    /// Records misbehavior; idempotent, and never cleared afterwards.
    pub fn flag_malicious(&mut self, node_id: NodeId, cause: FlagCause) {
        self.flags.entry(node_id).or_insert(MaliciousFlag {
            node_id,
            round_detected: self.round.round_index,
            cause,
        });
    }

    /// Credentials for the bootstrap (round 0) committees.
    pub fn bootstrap_dispatches(&self) -> Vec<(NodeId, CommitteeDispatch)> {
        let mut out = Vec::new();
        for &node in &self.round.committee_cp {
            out.push((
                node,
                CommitteeDispatch::Computing {
                    seed: self.round.seed_cp.clone(),
                    list: self.agreed_list.clone(),
                },
            ));
        }
        for &node in &self.round.candidates_cs {
            out.push((node, CommitteeDispatch::Candidate {
                seed: self.round.seed_cs.clone(),
            }));
        }
        out
    }

    /// Validates this round's submissions, flags misbehavior, adopts the
    /// agreed list and stages next-round committees from the supporters'
    /// picks, topping up any shortfall by weighted selection.
    ///
    /// On consensus failure the previous agreed list stays current and the
    /// supervision node reselects both committees itself.
    pub fn process_submissions(&mut self, submissions: &[ComputingSubmission]) -> SubmissionOutcome {
        let outcome = validate_lists(
            submissions,
            &self.round.seed_cp,
            &self.registry,
            self.config.threshold_n,
        );
        for node in &outcome.invalid_proof {
            self.flag_malicious(*node, FlagCause::BadProof);
        }
        let mut next_cp = BTreeSet::new();
        let mut next_cs = BTreeSet::new();
        let consensus_failed = match outcome.agreed {
            Some(agreed) => {
                for node in &outcome.divergent {
                    self.flag_malicious(*node, FlagCause::BadList);
                }
                self.agreed_list = agreed.list;
                for (_, pick_cp, pick_cs) in agreed.picks {
                    if pick_cp == pick_cs {
                        continue;
                    }
                    self.try_place(pick_cp, &mut next_cp, &next_cs, self.config.committee_cp_size);
                    self.try_place(pick_cs, &mut next_cs, &next_cp, self.config.committee_cs_size);
                }
                false
            }
            None => {
                self.fallback_rounds += 1;
                true
            }
        };
        self.top_up(&mut next_cp, &mut next_cs);

        let next_round = self.round.round_index + 1;
        let seed_cp = make_seed(&mut self.rng, next_round, Audience::Cp);
        let seed_cs = make_seed(&mut self.rng, next_round, Audience::Cs);
        self.staged = Some(StagedRound {
            committee_cp: next_cp,
            candidates_cs: next_cs,
            seed_cp,
            seed_cs,
        });
        SubmissionOutcome { consensus_failed }
    }

    /// A pick is honored only if it names a positive-weight, unflagged
    /// participant not already placed in either staged committee.
    fn try_place(
        &self,
        node: NodeId,
        target: &mut BTreeSet<NodeId>,
        other: &BTreeSet<NodeId>,
        capacity: usize,
    ) {
        if target.len() >= capacity
            || node.is_supervisor()
            || self.flags.contains_key(&node)
            || target.contains(&node)
            || other.contains(&node)
        {
            return;
        }
        if self.agreed_list.weight_of(node).unwrap_or(0.0) > 0.0 {
            target.insert(node);
        }
    }

    /// Fills both staged committees to size by weighted draws over the
    /// agreed list, excluding flagged nodes and already-placed members.
    /// Committees stay short if eligible candidates run out.
    fn top_up(&mut self, next_cp: &mut BTreeSet<NodeId>, next_cs: &mut BTreeSet<NodeId>) {
        let mut pool: Vec<(NodeId, f64)> = self
            .agreed_list
            .entries()
            .iter()
            .filter(|e| {
                e.weight > 0.0
                    && !self.flags.contains_key(&e.node_id)
                    && !next_cp.contains(&e.node_id)
                    && !next_cs.contains(&e.node_id)
            })
            .map(|e| (e.node_id, e.weight))
            .collect();
        while next_cp.len() < self.config.committee_cp_size {
            match draw_weighted(&mut pool, &mut self.rng, self.config.strategy) {
                Some(node) => {
                    next_cp.insert(node);
                }
                None => break,
            }
        }
        while next_cs.len() < self.config.committee_cs_size {
            match draw_weighted(&mut pool, &mut self.rng, self.config.strategy) {
                Some(node) => {
                    next_cs.insert(node);
                }
                None => break,
            }
        }
    }

    /// Hands the staged committees their credentials and opens trading.
    pub fn dispatch_committee(&mut self) -> Vec<(NodeId, CommitteeDispatch)> {
        let staged = self.staged.as_ref().expect("submissions processed first");
        let mut out = Vec::new();
        for &node in &staged.committee_cp {
            out.push((
                node,
                CommitteeDispatch::Computing {
                    seed: staged.seed_cp.clone(),
                    list: self.agreed_list.clone(),
                },
            ));
        }
        for &node in &staged.candidates_cs {
            out.push((node, CommitteeDispatch::Candidate {
                seed: staged.seed_cs.clone(),
            }));
        }
        self.round.phase = Phase::Trading;
        out
    }

    /// Trading ends at the time limit or once enough trades are accepted.
    pub fn trading_should_end(&self, elapsed: Tick, accepted_trades: usize) -> bool {
        elapsed >= self.round.trade_time || accepted_trades >= self.round.trade_limit
    }

    /// Reveals this round's committees and candidate seed to everyone and
    /// enters the finalization window.
    pub fn broadcast_round_end(&mut self) -> RoundEndBroadcast {
        debug_assert_eq!(self.round.phase, Phase::Trading);
        self.round.phase = Phase::Finalizing;
        RoundEndBroadcast {
            seed_cs: self.round.seed_cs.clone(),
            candidates_cs: self.round.candidates_cs.clone(),
            committee_cp: self.round.committee_cp.clone(),
        }
    }

    /// Discards proposals that fail structural or VRF verification or come
    /// from outside the candidate set (flagging the proposer), then orders
    /// the survivors by VRF value descending.
    pub fn order_proposals(&mut self, proposals: Vec<Block>, chain: &Chain) -> Vec<Block> {
        let mut by_proposer: BTreeMap<NodeId, Block> = BTreeMap::new();
        let mut order: Vec<NodeId> = Vec::new();
        for block in proposals {
            if let std::collections::btree_map::Entry::Vacant(slot) =
                by_proposer.entry(block.proposer)
            {
                order.push(block.proposer);
                slot.insert(block);
            }
        }
        let mut verified = Vec::new();
        for proposer in order {
            let block = by_proposer.remove(&proposer).expect("inserted above");
            let member = self.round.candidates_cs.contains(&proposer);
            let structural = block.compute_hash() == block.hash
                && block.previous_hash == chain.tip().hash
                && block.height == chain.height() + 1;
            let vrf_ok = self
                .registry
                .get(&proposer)
                .map(|pk| vrf::verify(pk, &self.round.seed_cs.material(), &block.vrf_output()))
                .unwrap_or(false);
            if member && structural && vrf_ok {
                verified.push(block);
            } else {
                self.flag_malicious(proposer, FlagCause::BadProof);
            }
        }
        verified.sort_by_key(|b| std::cmp::Reverse(b.vrf_value));
        verified
    }

    /// Window-period finalization: blocks are tried in descending VRF
    /// order; the first to win a strict majority is appended and its
    /// proposer's contribution reset. Rejected leaders are flagged. If
    /// nothing survives, the supervision node appends a signed empty block
    /// so round numbering and seed chaining continue.
    pub fn finalize<V, T>(
        &mut self,
        proposals: Vec<Block>,
        mut vote: V,
        tx_valid: T,
        chain: &mut Chain,
        ledger: &mut ContributionLedger,
        timestamp: Tick,
    ) -> FinalizeSummary
    where
        V: FnMut(&Block) -> VoteTally,
        T: Fn(&Settlement) -> bool + Copy,
    {
        let ordered = self.order_proposals(proposals, chain);
        let mut rejected_leaders = Vec::new();
        for block in ordered {
            let proposer = block.proposer;
            let pk = self.registry.get(&proposer).expect("verified proposer");
            let tally = vote(&block);
            let verified = chain.verify_block(&block, &self.round.seed_cs.material(), pk, tx_valid);
            if tally.majority() && verified {
                chain.append(block.clone()).expect("verified block appends");
                let _ = ledger.reset(proposer);
                self.round.phase = Phase::Done;
                return FinalizeSummary {
                    appended: block,
                    proposer,
                    rejected_leaders,
                    empty_round: false,
                };
            }
            self.flag_malicious(proposer, FlagCause::BadBlock);
            rejected_leaders.push(proposer);
        }

        let out = vrf::evaluate(&self.keypair.secret_key, &self.round.seed_cs.material())
            .expect("supervisor key is well-formed");
        let block = Block::new(
            chain.height() + 1,
            chain.tip().hash,
            Vec::new(),
            NodeId::SUPERVISOR,
            &out,
            timestamp,
        );
        chain.append(block.clone()).expect("empty block appends");
        self.round.phase = Phase::Done;
        FinalizeSummary {
            appended: block,
            proposer: NodeId::SUPERVISOR,
            rejected_leaders,
            empty_round: true,
        }
    }

    /// Installs the staged round, dropping any members flagged since they
    /// were staged and topping the committees back up. Returns credentials
    /// for members added by the top-up, who were never dispatched to.
    pub fn advance_round(&mut self) -> Vec<(NodeId, CommitteeDispatch)> {
        let staged = self.staged.take().expect("round was processed");
        let mut committee_cp = staged.committee_cp;
        let mut candidates_cs = staged.candidates_cs;
        let before_cp = committee_cp.clone();
        let before_cs = candidates_cs.clone();
        committee_cp.retain(|n| !self.flags.contains_key(n));
        candidates_cs.retain(|n| !self.flags.contains_key(n));
        self.round = RoundState {
            round_index: self.round.round_index + 1,
            seed_cp: staged.seed_cp,
            seed_cs: staged.seed_cs,
            committee_cp,
            candidates_cs,
            window_period: self.config.window_period,
            trade_limit: self.config.trade_limit,
            trade_time: self.config.trade_time,
            phase: Phase::Computing,
        };
        let mut next_cp = self.round.committee_cp.clone();
        let mut next_cs = self.round.candidates_cs.clone();
        self.top_up(&mut next_cp, &mut next_cs);
        let mut extra = Vec::new();
        for &node in next_cp.difference(&before_cp) {
            extra.push((
                node,
                CommitteeDispatch::Computing {
                    seed: self.round.seed_cp.clone(),
                    list: self.agreed_list.clone(),
                },
            ));
        }
        for &node in next_cs.difference(&before_cs) {
            extra.push((node, CommitteeDispatch::Candidate {
                seed: self.round.seed_cs.clone(),
            }));
        }
        self.round.committee_cp = next_cp;
        self.round.candidates_cs = next_cs;
        extra
    }
}

fn make_seed(rng: &mut ChaCha20Rng, round_index: u64, audience: Audience) -> RandomSeed {
    let raw: [u8; 32] = rng.gen();
    let mut hasher = Sha256::new();
    hasher.update(b"poc.seed");
    hasher.update(raw);
    hasher.update(round_index.to_be_bytes());
    hasher.update([audience.tag()]);
    RandomSeed {
        round_index,
        audience,
        bytes: hasher.finalize().into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::build_submission;
    use crate::contribution::{ContributionEntry, ContributionParams};
    use rand::SeedableRng;

    fn registry_of(n: u32) -> (Vec<KeyPair>, BTreeMap<NodeId, PublicKey>) {
        let pairs: Vec<KeyPair> = (0..n)
            .map(|i| vrf::keygen(format!("sup{i}").as_bytes()).unwrap())
            .collect();
        let registry = pairs
            .iter()
            .enumerate()
            .map(|(i, kp)| (NodeId(i as u32), kp.public_key.clone()))
            .collect();
        (pairs, registry)
    }

    fn flat_list(registry: &BTreeMap<NodeId, PublicKey>) -> ContributionList {
        let entries = registry
            .iter()
            .map(|(id, pk)| ContributionEntry::new(*id, pk.clone()))
            .collect();
        ContributionList::from_entries(entries)
    }

    fn supervisor_with(n: u32, seed: u64) -> (Vec<KeyPair>, Supervisor) {
        let (pairs, registry) = registry_of(n);
        let list = flat_list(&registry);
        let sup = Supervisor::bootstrap(
            registry,
            list,
            ProtocolConfig::default(),
            vrf::keygen(b"the-supervisor").unwrap(),
            ChaCha20Rng::seed_from_u64(seed),
        )
        .unwrap();
        (pairs, sup)
    }

    #[test]
    fn bootstrap_builds_disjoint_committees() {
        let (_, sup) = supervisor_with(10, 42);
        let round = sup.round();
        assert_eq!(round.committee_cp.len(), 4);
        assert_eq!(round.candidates_cs.len(), 3);
        assert!(round.committee_cp.is_disjoint(&round.candidates_cs));
        assert!(!round.committee_cp.contains(&NodeId::SUPERVISOR));
    }

    #[test]
    fn bootstrap_rejects_too_few_nodes() {
        let (_, registry) = registry_of(8);
        let list = flat_list(&registry);
        let config = ProtocolConfig {
            committee_cp_size: 4,
            committee_cs_size: 4,
            ..ProtocolConfig::default()
        };
        let err = Supervisor::bootstrap(
            registry,
            list,
            config,
            vrf::keygen(b"the-supervisor").unwrap(),
            ChaCha20Rng::seed_from_u64(1),
        );
        assert!(matches!(err, Err(ConsensusError::Configuration(_))));
    }

    #[test]
    fn bootstrap_is_deterministic_per_seed() {
        let (_, a) = supervisor_with(10, 7);
        let (_, b) = supervisor_with(10, 7);
        assert_eq!(a.round().committee_cp, b.round().committee_cp);
        assert_eq!(a.round().candidates_cs, b.round().candidates_cs);
        assert_eq!(a.round().seed_cp, b.round().seed_cp);
    }

    #[test]
    fn seeds_differ_per_audience_and_round() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = make_seed(&mut rng, 0, Audience::Cp);
        let b = make_seed(&mut rng, 0, Audience::Cs);
        let c = make_seed(&mut rng, 1, Audience::Cp);
        assert_ne!(a.bytes, b.bytes);
        assert_ne!(a.bytes, c.bytes);
    }

    #[test]
    fn flagging_is_idempotent_and_permanent() {
        let (_, mut sup) = supervisor_with(10, 42);
        sup.flag_malicious(NodeId(3), FlagCause::BadList);
        sup.flag_malicious(NodeId(3), FlagCause::BadBlock);
        let flags: Vec<&MaliciousFlag> = sup.flags().collect();
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].cause, FlagCause::BadList);
    }

    fn committee_submissions(
        sup: &Supervisor,
        pairs: &[KeyPair],
        forge: impl Fn(NodeId) -> Option<Arc<ContributionList>>,
    ) -> Vec<ComputingSubmission> {
        let members: Vec<NodeId> = sup.round().committee_cp.iter().copied().collect();
        members
            .iter()
            .map(|&id| {
                let list = forge(id).unwrap_or_else(|| Arc::clone(sup.agreed_list()));
                let picks: Vec<NodeId> = sup
                    .agreed_list()
                    .entries()
                    .iter()
                    .map(|e| e.node_id)
                    .take(2)
                    .collect();
                build_submission(
                    id,
                    &pairs[id.0 as usize],
                    &sup.round().seed_cp,
                    list,
                    picks[0],
                    picks[1],
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn unanimous_submissions_fill_committees() {
        let (pairs, mut sup) = supervisor_with(10, 42);
        let submissions = committee_submissions(&sup, &pairs, |_| None);
        let outcome = sup.process_submissions(&submissions);
        assert!(!outcome.consensus_failed);
        let dispatches = sup.dispatch_committee();
        let computing = dispatches
            .iter()
            .filter(|(_, d)| matches!(d, CommitteeDispatch::Computing { .. }))
            .count();
        let candidates = dispatches
            .iter()
            .filter(|(_, d)| matches!(d, CommitteeDispatch::Candidate { .. }))
            .count();
        assert_eq!(computing, 4);
        assert_eq!(candidates, 3);
        assert_eq!(sup.round().phase, Phase::Trading);
    }

    #[test]
    fn forger_is_flagged_and_excluded_from_staging() {
        let (pairs, mut sup) = supervisor_with(10, 42);
        let forger = *sup.round().committee_cp.iter().next().unwrap();
        let submissions = committee_submissions(&sup, &pairs, |id| {
            (id == forger).then(|| {
                let mut entries: Vec<ContributionEntry> =
                    sup.agreed_list().entries().to_vec();
                entries[0].value += 999.0;
                Arc::new(ContributionList::from_entries(entries))
            })
        });
        let outcome = sup.process_submissions(&submissions);
        assert!(!outcome.consensus_failed);
        assert!(sup.is_flagged(forger));
        let dispatches = sup.dispatch_committee();
        assert!(dispatches.iter().all(|(node, _)| *node != forger));
        sup.broadcast_round_end();
        let mut chain = Chain::new();
        let mut ledger = ContributionLedger::new(ContributionParams::default());
        for (id, pk) in sup.registry().clone() {
            ledger.register(id, pk);
        }
        sup.finalize(
            Vec::new(),
            |_| VoteTally {
                approvals: 9,
                eligible: 9,
            },
            |_| true,
            &mut chain,
            &mut ledger,
            100,
        );
        let extra = sup.advance_round();
        assert!(!sup.round().committee_cp.contains(&forger));
        assert!(!sup.round().candidates_cs.contains(&forger));
        // Replacement members picked by the supervisor get credentials.
        for (node, _) in extra {
            assert_ne!(node, forger);
        }
    }

    #[test]
    fn split_submissions_trigger_fallback() {
        let (pairs, mut sup) = supervisor_with(10, 42);
        let members: Vec<NodeId> = sup.round().committee_cp.iter().copied().collect();
        let submissions = committee_submissions(&sup, &pairs, |id| {
            (members.iter().position(|m| *m == id).unwrap() < 2).then(|| {
                let mut entries: Vec<ContributionEntry> =
                    sup.agreed_list().entries().to_vec();
                entries[0].value += 999.0;
                Arc::new(ContributionList::from_entries(entries))
            })
        });
        let outcome = sup.process_submissions(&submissions);
        assert!(outcome.consensus_failed);
        assert_eq!(sup.fallback_rounds, 1);
        // Nobody can be blamed on a split, and committees are still full.
        assert_eq!(sup.flagged_set().len(), 0);
        let dispatches = sup.dispatch_committee();
        assert_eq!(dispatches.len(), 7);
    }

    #[test]
    fn finalize_prefers_largest_vrf_and_falls_back_in_order() {
        let (pairs, mut sup) = supervisor_with(10, 42);
        let submissions = committee_submissions(&sup, &pairs, |_| None);
        sup.process_submissions(&submissions);
        sup.dispatch_committee();
        sup.broadcast_round_end();

        let mut chain = Chain::new();
        let mut ledger = ContributionLedger::new(ContributionParams::default());
        for (id, pk) in sup.registry().clone() {
            ledger.register(id, pk);
        }
        let candidates: Vec<NodeId> = sup.round().candidates_cs.iter().copied().collect();
        // Give every candidate an accumulated value so the reset is visible.
        for &id in &candidates {
            ledger
                .accrue_round(
                    id,
                    &crate::contribution::RoundActivity {
                        generation: crate::contribution::GenerationReport::new(vec![5.0]),
                        ..Default::default()
                    },
                )
                .unwrap();
        }
        let proposals: Vec<Block> = candidates
            .iter()
            .map(|id| {
                crate::consensus::build_block_proposal(
                    *id,
                    &pairs[id.0 as usize],
                    &sup.round().seed_cs,
                    Vec::new(),
                    chain.tip().hash,
                    chain.height() + 1,
                    100,
                )
                .unwrap()
            })
            .collect();
        let mut by_value = proposals.clone();
        by_value.sort_by_key(|b| std::cmp::Reverse(b.vrf_value));
        let leader = by_value[0].proposer;
        let second = by_value[1].proposer;

        // Votes reject the leader's block, approve anything else.
        let summary = sup.finalize(
            proposals,
            |block| VoteTally {
                approvals: if block.proposer == leader { 0 } else { 9 },
                eligible: 9,
            },
            |_| true,
            &mut chain,
            &mut ledger,
            100,
        );
        assert_eq!(summary.proposer, second);
        assert_eq!(summary.rejected_leaders, vec![leader]);
        assert!(sup.is_flagged(leader));
        assert!(!summary.empty_round);
        assert_eq!(chain.height(), 1);
        // The winning proposer's accumulated contribution is reset at
        // finalization, before any further accrual.
        assert_eq!(ledger.entry(second).unwrap().value, 0.0);
        assert_eq!(ledger.entry(leader).unwrap().value, 5.0);
    }

    #[test]
    fn all_rejected_appends_supervisor_empty_block() {
        let (pairs, mut sup) = supervisor_with(10, 42);
        let submissions = committee_submissions(&sup, &pairs, |_| None);
        sup.process_submissions(&submissions);
        sup.dispatch_committee();
        sup.broadcast_round_end();
        let mut chain = Chain::new();
        let mut ledger = ContributionLedger::new(ContributionParams::default());
        for (id, pk) in sup.registry().clone() {
            ledger.register(id, pk);
        }
        let summary = sup.finalize(
            Vec::new(),
            |_| VoteTally {
                approvals: 0,
                eligible: 9,
            },
            |_| true,
            &mut chain,
            &mut ledger,
            100,
        );
        assert!(summary.empty_round);
        assert_eq!(summary.proposer, NodeId::SUPERVISOR);
        assert_eq!(chain.height(), 1);
        // The signed empty block verifies under the supervisor's key.
        assert!(vrf::verify(
            sup.public_key(),
            &sup.round().seed_cs.material(),
            &chain.tip().vrf_output()
        ));
    }

    #[test]
    fn foreign_proposal_is_discarded_and_flagged() {
        let (pairs, mut sup) = supervisor_with(10, 42);
        let submissions = committee_submissions(&sup, &pairs, |_| None);
        sup.process_submissions(&submissions);
        sup.dispatch_committee();
        sup.broadcast_round_end();
        let chain = Chain::new();
        // An ordinary node without the candidate seed guesses a seed.
        let outsider = (0..10u32)
            .map(NodeId)
            .find(|id| sup.round().role_of(*id) == crate::consensus::Role::Ordinary)
            .unwrap();
        let fake_seed = RandomSeed {
            round_index: sup.round().round_index,
            audience: Audience::Cs,
            bytes: [9u8; 32],
        };
        let block = crate::consensus::build_block_proposal(
            outsider,
            &pairs[outsider.0 as usize],
            &fake_seed,
            Vec::new(),
            chain.tip().hash,
            chain.height() + 1,
            100,
        )
        .unwrap();
        let ordered = sup.order_proposals(vec![block], &chain);
        assert!(ordered.is_empty());
        assert!(sup.is_flagged(outsider));
        assert_eq!(
            sup.flags().next().unwrap().cause,
            FlagCause::BadProof
        );
    }
}
