//! Scenario execution: the per-round PoC driver and the PoW baseline loop.
//!
//! One PoC round runs: credential activation, accrual of the previous
//! round's activity, the computing phase (submissions, validation,
//! dispatch), the trading phase (order flow, matching, deliveries,
//! settlement), the round-end broadcast, and the finalization window
//! (proposals, voting, append, contribution reset).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::chain::{Block, BlockHash, Chain};
use crate::consensus::{Supervisor, VoteTally};
use crate::contribution::{
    ConsensusService, ContributionLedger, GenerationReport, OnlineSession, RoundActivity,
};
use crate::market::{
    Energy, Market, MarketPhase, MatchId, Money, OrderSpec, Settlement, Side,
};
use crate::types::{NodeId, Tick};
use crate::vrf::{self, PublicKey};

use super::config::{BehaviorPolicy, ConsensusMode, ScenarioConfig};
use super::metrics::{ElectionCounts, FlagRecord, RoundTrace, SimulationMetrics, WeightPoint};
use super::network::{Message, Network};
use super::node::SimNode;
use super::pow;
use super::SimError;

/// Runs a scenario to completion; fully deterministic given the config.
pub fn run(config: &ScenarioConfig) -> Result<SimulationMetrics, SimError> {
    config.validate()?;
    match config.consensus_mode {
        ConsensusMode::Poc => PocEngine::new(config)?.run(),
        ConsensusMode::Pow => run_pow(config),
    }
}

/// Independent generator per subsystem, derived from the scenario seed.
fn child_rng(master: u64, domain: &str) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"poc.sim.rng");
    hasher.update(master.to_be_bytes());
    hasher.update(domain.as_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

fn run_pow(config: &ScenarioConfig) -> Result<SimulationMetrics, SimError> {
    let mut rng = child_rng(config.rng_seed, "pow");
    let mut block_times = Vec::with_capacity(config.rounds as usize);
    for _ in 0..config.rounds {
        let attempts = if config.pow_real_hashing {
            pow::pow_hashing_round(config.pow_difficulty, &mut rng)
        } else {
            pow::pow_baseline_round(config.pow_difficulty, &mut rng)
        };
        block_times.push(attempts);
    }
    Ok(SimulationMetrics {
        mode: ConsensusMode::Pow,
        rounds_completed: config.rounds,
        node_count: config.node_count,
        elections: BTreeMap::new(),
        traces: Vec::new(),
        weight_series: Vec::new(),
        block_times,
        flags: Vec::new(),
        priority_violations: 0,
        conservation_ok: true,
        chain_audit_ok: true,
        fallback_rounds: 0,
        chain_records: String::new(),
        final_contribution_list: String::new(),
    })
}

struct PocEngine<'a> {
    config: &'a ScenarioConfig,
    participants: Vec<NodeId>,
    nodes: BTreeMap<NodeId, SimNode>,
    registry: BTreeMap<NodeId, PublicKey>,
    colluder_groups: BTreeMap<u32, BTreeSet<NodeId>>,
    supervisor: Supervisor,
    network: Network,
    market: Market,
    ledger: ContributionLedger,
    chain: Chain,
    profile_rng: ChaCha20Rng,
    clock: Tick,
    initial_funds: Money,
    pending_activity: BTreeMap<NodeId, RoundActivity>,
    elections: BTreeMap<u32, ElectionCounts>,
    traces: Vec<RoundTrace>,
    weight_series: Vec<WeightPoint>,
    block_times: Vec<u64>,
    priority_violations: u64,
}

impl<'a> PocEngine<'a> {
    fn new(config: &'a ScenarioConfig) -> Result<Self, SimError> {
        let seed = config.rng_seed;
        let mut profile_rng = child_rng(seed, "profile");
        let participants: Vec<NodeId> = (0..config.node_count).map(NodeId).collect();

        let mut nodes = BTreeMap::new();
        let mut registry = BTreeMap::new();
        let mut colluder_groups: BTreeMap<u32, BTreeSet<NodeId>> = BTreeMap::new();
        let mut ledger = ContributionLedger::new(config.contribution);
        let mut market = Market::new();
        let mut network = Network::new(child_rng(seed, "network"));

        for &id in &participants {
            let entropy = format!("poc-sim-{seed}-node-{}", id.0);
            let keypair = vrf::keygen(entropy.as_bytes()).expect("non-empty entropy");
            let policy = config.policy_of(id.0);
            let devices = profile_rng
                .gen_range(config.market.devices_range.0..=config.market.devices_range.1);
            let drop_probability = match policy {
                BehaviorPolicy::OfflineFlaky { drop_probability } => drop_probability,
                _ => 0.0,
            };
            if let BehaviorPolicy::Colluder { group } = policy {
                colluder_groups.entry(group).or_default().insert(id);
            }
            registry.insert(id, keypair.public_key.clone());
            ledger.register(id, keypair.public_key.clone());
            market.open_account(id, config.market.initial_balance);
            network.register(id, drop_probability);
            nodes.insert(
                id,
                SimNode::new(
                    id,
                    keypair,
                    policy,
                    child_rng(seed, &format!("node-{}", id.0)),
                    devices,
                ),
            );
        }
        network.register(NodeId::SUPERVISOR, 0.0);

        let supervisor_keys =
            vrf::keygen(format!("poc-sim-{seed}-supervisor").as_bytes()).expect("entropy");
        let initial_list = ledger.build_list(&BTreeSet::new());
        let supervisor = Supervisor::bootstrap(
            registry.clone(),
            initial_list,
            config.protocol(),
            supervisor_keys,
            child_rng(seed, "supervisor"),
        )
        .map_err(|e| SimError::Config(e.to_string()))?;

        let initial_funds = market.total_funds();
        let mut engine = PocEngine {
            config,
            participants,
            nodes,
            registry,
            colluder_groups,
            supervisor,
            network,
            market,
            ledger,
            chain: Chain::new(),
            profile_rng,
            clock: 0,
            initial_funds,
            pending_activity: BTreeMap::new(),
            elections: BTreeMap::new(),
            traces: Vec::new(),
            weight_series: Vec::new(),
            block_times: Vec::new(),
            priority_violations: 0,
        };
        for (to, dispatch) in engine.supervisor.bootstrap_dispatches() {
            engine
                .network
                .deliver(Message::Dispatch(dispatch), NodeId::SUPERVISOR, to)?;
        }
        engine.pump_to_nodes();
        Ok(engine)
    }

    fn run(mut self) -> Result<SimulationMetrics, SimError> {
        for round in 0..self.config.rounds {
            self.run_round(round)?;
        }
        let chain_audit_ok = self.audit_chain();
        let flags: Vec<FlagRecord> = self
            .supervisor
            .flags()
            .map(|f| FlagRecord {
                node: f.node_id.0,
                round: f.round_detected,
                cause: f.cause,
            })
            .collect();
        Ok(SimulationMetrics {
            mode: ConsensusMode::Poc,
            rounds_completed: self.config.rounds,
            node_count: self.config.node_count,
            elections: self.elections,
            traces: self.traces,
            weight_series: self.weight_series,
            block_times: self.block_times,
            flags,
            priority_violations: self.priority_violations,
            conservation_ok: true,
            chain_audit_ok,
            fallback_rounds: self.supervisor.fallback_rounds,
            chain_records: self.chain.dump_records(),
            final_contribution_list: self
                .ledger
                .build_list(&self.supervisor.flagged_set())
                .canonical_serialize()
                .to_string(),
        })
    }

    fn pump_to_nodes(&mut self) {
        for envelope in self.network.drain() {
            if let Some(node) = self.nodes.get_mut(&envelope.to) {
                node.receive(&envelope.message);
            }
        }
    }

    fn forge_targets(&self, member: NodeId) -> BTreeSet<NodeId> {
        match self.nodes[&member].policy {
            BehaviorPolicy::ListForger => [member].into_iter().collect(),
            BehaviorPolicy::Colluder { group } => self.colluder_groups[&group].clone(),
            _ => BTreeSet::new(),
        }
    }

    fn deliver_match(
        &mut self,
        match_id: MatchId,
        quality: f64,
        activities: &mut BTreeMap<NodeId, RoundActivity>,
    ) -> Result<(), SimError> {
        let record = self
            .market
            .match_record(match_id)
            .expect("match created this round");
        let delivered = (record.quantity as f64 * quality).round() as Energy;
        let seller = record.seller;
        let trade = self.market.record_delivery(match_id, delivered, self.clock)?;
        activities
            .get_mut(&seller)
            .expect("seller is a participant")
            .trades
            .push(trade);
        Ok(())
    }

    fn run_round(&mut self, round: u64) -> Result<(), SimError> {
        debug_assert_eq!(self.supervisor.round().round_index, round);
        let events_start = self.network.events;
        let round_start = self.clock;

        for node in self.nodes.values_mut() {
            node.begin_round();
        }

        let committee_cp: Vec<NodeId> =
            self.supervisor.round().committee_cp.iter().copied().collect();
        let candidates_cs: Vec<NodeId> =
            self.supervisor.round().candidates_cs.iter().copied().collect();
        if committee_cp.iter().any(|id| candidates_cs.contains(id)) {
            return Err(SimError::Invariant(format!(
                "committees overlap in round {round}"
            )));
        }
        for &id in &committee_cp {
            self.elections.entry(id.0).or_default().computing += 1;
        }
        for &id in &candidates_cs {
            self.elections.entry(id.0).or_default().candidate += 1;
        }

        // The computing committee evaluates the previous round's records.
        let flagged: BTreeSet<NodeId> = self.supervisor.flagged_set();
        if round > 0 {
            let pending = std::mem::take(&mut self.pending_activity);
            for (id, activity) in pending {
                if flagged.contains(&id) {
                    continue;
                }
                self.ledger.accrue_round(id, &activity)?;
            }
        }
        for &id in &self.participants {
            let entry = self.ledger.entry(id).expect("registered");
            self.weight_series.push(WeightPoint {
                round,
                node: id.0,
                value: entry.value,
                weight: entry.weight,
                ce: entry.ce_value,
            });
        }

        // Computing phase: submissions, validation, next-round dispatch.
        let reference_list = Arc::new(self.ledger.build_list(&flagged));
        for &member in &committee_cp {
            let targets = self.forge_targets(member);
            let node = self.nodes.get_mut(&member).expect("participant");
            if let Some(submission) =
                node.make_submission(&reference_list, &targets, self.config.selection_strategy)
            {
                self.network
                    .deliver(Message::ListSubmission(submission), member, NodeId::SUPERVISOR)?;
            }
        }
        let mut submissions = Vec::new();
        for envelope in self.network.drain() {
            match envelope.message {
                Message::ListSubmission(sub) if envelope.to.is_supervisor() => {
                    submissions.push(sub)
                }
                message => {
                    if let Some(node) = self.nodes.get_mut(&envelope.to) {
                        node.receive(&message);
                    }
                }
            }
        }
        let submission_outcome = self.supervisor.process_submissions(&submissions);
        for (to, dispatch) in self.supervisor.dispatch_committee() {
            self.network
                .deliver(Message::Dispatch(dispatch), NodeId::SUPERVISOR, to)?;
        }
        self.pump_to_nodes();

        // Per-round activity profile: generation and online session.
        let profile = &self.config.market;
        let trading_start = self.clock;
        let planned_end = trading_start + self.config.trade_time;
        let mut activities: BTreeMap<NodeId, RoundActivity> = BTreeMap::new();
        for &id in &self.participants {
            let devices = self.nodes[&id].devices;
            let outputs: Vec<f64> = (0..devices)
                .map(|_| {
                    self.profile_rng
                        .gen_range(profile.generation_range.0..=profile.generation_range.1)
                })
                .collect();
            let session = if self
                .profile_rng
                .gen_bool(profile.partial_session_probability)
            {
                let half = self.config.trade_time / 2;
                let on = trading_start + self.profile_rng.gen_range(0..=half);
                let off = on + self.profile_rng.gen_range(0..=half);
                OnlineSession { t_on: on, t_off: off }
            } else {
                OnlineSession {
                    t_on: trading_start,
                    t_off: planned_end,
                }
            };
            activities.insert(
                id,
                RoundActivity {
                    generation: GenerationReport::new(outputs),
                    trades: Vec::new(),
                    session: Some(session),
                    service: None,
                },
            );
        }

        // Trading phase.
        let priority = Arc::clone(self.supervisor.agreed_list());
        let mut schedule: BTreeMap<Tick, Vec<(MatchId, f64)>> = BTreeMap::new();
        let mut created: Vec<MatchId> = Vec::new();
        let mut trades = 0usize;
        let mut ticks_used: Tick = 0;
        for tick in 1..=self.config.trade_time {
            self.clock += 1;
            ticks_used += 1;
            for &id in &self.participants {
                if !self.profile_rng.gen_bool(profile.order_rate) {
                    continue;
                }
                let side = if self.profile_rng.gen_bool(profile.buy_fraction) {
                    Side::Buy
                } else {
                    Side::Sell
                };
                let quantity = self
                    .profile_rng
                    .gen_range(profile.quantity_range.0..=profile.quantity_range.1);
                let unit_price = self
                    .profile_rng
                    .gen_range(profile.price_range.0..=profile.price_range.1);
                let slack = self
                    .profile_rng
                    .gen_range(profile.delivery_slack_range.0..=profile.delivery_slack_range.1);
                let spec = OrderSpec {
                    side,
                    owner: id,
                    quantity,
                    unit_price,
                    latest_delivery: (self.clock + slack).min(planned_end),
                };
                // Rejections (insufficient balance) are ordinary outcomes.
                let _ = self.market.submit_order(spec, self.clock)?;
            }
            let phase = self.market.infer_phase(self.clock);
            let new_matches =
                self.market
                    .match_orders(&priority, &flagged, phase, self.clock, round);
            if phase == MarketPhase::SupplyExceedsDemand {
                let violations = self.market.audit_seller_priority(
                    &new_matches,
                    &priority,
                    &flagged,
                    self.clock,
                );
                self.priority_violations += violations.len() as u64;
            }
            for &match_id in &new_matches {
                let record = self.market.match_record(match_id).expect("new match");
                let deadline = record.latest_delivery;
                let lag = self
                    .profile_rng
                    .gen_range(profile.delivery_lag_range.0..=profile.delivery_lag_range.1);
                let quality = self.profile_rng.gen_range(
                    profile.delivery_quality_range.0..=profile.delivery_quality_range.1,
                );
                schedule
                    .entry((self.clock + lag).min(deadline))
                    .or_default()
                    .push((match_id, quality));
            }
            trades += new_matches.len();
            created.extend(new_matches);
            if let Some(due) = schedule.remove(&self.clock) {
                for (match_id, quality) in due {
                    self.deliver_match(match_id, quality, &mut activities)?;
                }
            }
            if self.supervisor.trading_should_end(tick, trades) {
                break;
            }
        }

        // Round end: outstanding deliveries, settlement, expiry.
        let due_ticks: Vec<Tick> = schedule.keys().copied().collect();
        for due in due_ticks {
            for (match_id, quality) in schedule.remove(&due).expect("key present") {
                self.deliver_match(match_id, quality, &mut activities)?;
            }
        }
        let mut mempool: Vec<Settlement> = Vec::new();
        for &match_id in &created {
            mempool.push(self.market.settle(match_id, self.clock)?);
        }
        self.market.expire_open_orders();
        self.market.prune_closed(round + 1);
        if self.market.total_funds() != self.initial_funds {
            return Err(SimError::Invariant(format!(
                "account conservation violated in round {round}: {} != {}",
                self.market.total_funds(),
                self.initial_funds
            )));
        }

        let broadcast = self.supervisor.broadcast_round_end();
        for &id in &self.participants {
            self.network
                .deliver(Message::RoundEnd(broadcast.clone()), NodeId::SUPERVISOR, id)?;
        }
        self.pump_to_nodes();

        // Finalization window.
        self.clock += self.config.window_period;
        let parent_hash = self.chain.tip().hash;
        let height = self.chain.height() + 1;
        for &candidate in &candidates_cs {
            let node = self.nodes.get_mut(&candidate).expect("participant");
            if let Some(block) = node.make_proposal(&mempool, parent_hash, height, self.clock) {
                self.network
                    .deliver(Message::BlockProposal(block), candidate, NodeId::SUPERVISOR)?;
            }
        }
        let mut proposals: Vec<Block> = Vec::new();
        let mut packaged: BTreeMap<NodeId, u64> = BTreeMap::new();
        for envelope in self.network.drain() {
            if let Message::BlockProposal(block) = envelope.message {
                packaged.insert(block.proposer, block.transactions.len() as u64);
                proposals.push(block);
            }
        }
        let expected: BTreeSet<Vec<u8>> = mempool.iter().map(|s| s.canonical_bytes()).collect();

        let summary = {
            let network = &mut self.network;
            let nodes = &mut self.nodes;
            let registry = &self.registry;
            let flagged_for_vote = self.supervisor.flagged_set();
            let mut seen_proposers: BTreeSet<NodeId> = BTreeSet::new();
            let expected_ref = &expected;
            self.supervisor.finalize(
                proposals,
                |block| {
                    // A proposer seen on an earlier iteration was rejected
                    // and flagged, so it no longer votes.
                    seen_proposers.insert(block.proposer);
                    let mut excluded = flagged_for_vote.clone();
                    excluded.extend(seen_proposers.iter().copied());
                    collect_votes(
                        network,
                        nodes,
                        registry,
                        &excluded,
                        block,
                        parent_hash,
                        height,
                        expected_ref,
                    )
                },
                |tx| expected.contains(&tx.canonical_bytes()),
                &mut self.chain,
                &mut self.ledger,
                self.clock,
            )
        };

        if !summary.proposer.is_supervisor() {
            self.elections.entry(summary.proposer.0).or_default().proposer += 1;
        }
        let new_flags: Vec<FlagRecord> = self
            .supervisor
            .flags()
            .filter(|f| f.round_detected == round)
            .map(|f| FlagRecord {
                node: f.node_id.0,
                round: f.round_detected,
                cause: f.cause,
            })
            .collect();
        let events =
            (self.network.events - events_start) + ticks_used + self.config.window_period;
        self.block_times.push(events);
        self.traces.push(RoundTrace {
            round,
            committee_cp: committee_cp.iter().map(|n| n.0).collect(),
            candidates_cs: candidates_cs.iter().map(|n| n.0).collect(),
            proposer: (!summary.proposer.is_supervisor()).then_some(summary.proposer.0),
            block_hash: summary.appended.hash.to_hex(),
            tx_count: summary.appended.transactions.len(),
            trades,
            new_flags,
            consensus_failed: submission_outcome.consensus_failed,
            empty_round: summary.empty_round,
            events,
            ticks: self.clock - round_start,
            seed_cs_material: hex::encode(self.supervisor.round().seed_cs.material()),
        });

        // Consensus-service credits feed the next round's accrual.
        let network_size = self.participants.len() as u64;
        for &id in &committee_cp {
            activities
                .get_mut(&id)
                .expect("participant")
                .service = Some(ConsensusService::computing(network_size));
        }
        for &id in &candidates_cs {
            if let Some(&tx_count) = packaged.get(&id) {
                activities
                    .get_mut(&id)
                    .expect("participant")
                    .service = Some(ConsensusService::consensus(tx_count, network_size));
            }
        }
        self.pending_activity = activities;

        for (to, dispatch) in self.supervisor.advance_round() {
            self.network
                .deliver(Message::Dispatch(dispatch), NodeId::SUPERVISOR, to)?;
        }
        self.pump_to_nodes();
        Ok(())
    }

    /// Re-verifies every appended block: content hash, link, and the
    /// proposer's VRF output against the recorded round seed.
    fn audit_chain(&self) -> bool {
        let blocks = self.chain.blocks();
        for (i, block) in blocks.iter().enumerate() {
            if block.compute_hash() != block.hash {
                return false;
            }
            if i == 0 {
                continue;
            }
            let parent = &blocks[i - 1];
            if block.previous_hash != parent.hash || block.height != parent.height + 1 {
                return false;
            }
            let trace = &self.traces[i - 1];
            let material = match hex::decode(&trace.seed_cs_material) {
                Ok(m) => m,
                Err(_) => return false,
            };
            let pk = if block.proposer.is_supervisor() {
                self.supervisor.public_key()
            } else {
                match self.registry.get(&block.proposer) {
                    Some(pk) => pk,
                    None => return false,
                }
            };
            if !vrf::verify(pk, &material, &block.vrf_output()) {
                return false;
            }
        }
        true
    }
}

/// Message-driven vote collection: the supervision node sends the block to
/// every eligible voter; voters that received the round-end broadcast (and
/// the request itself) reply with their verdict.
#[allow(clippy::too_many_arguments)]
fn collect_votes(
    network: &mut Network,
    nodes: &mut BTreeMap<NodeId, SimNode>,
    registry: &BTreeMap<NodeId, PublicKey>,
    excluded: &BTreeSet<NodeId>,
    block: &Block,
    parent_hash: BlockHash,
    height: u64,
    expected: &BTreeSet<Vec<u8>>,
) -> VoteTally {
    let voters: Vec<NodeId> = nodes
        .keys()
        .copied()
        .filter(|id| !excluded.contains(id) && *id != block.proposer)
        .collect();
    for &voter in &voters {
        network
            .deliver(Message::VoteRequest(block.clone()), NodeId::SUPERVISOR, voter)
            .expect("voter registered");
    }
    for envelope in network.drain() {
        if let Message::VoteRequest(requested) = &envelope.message {
            let node = nodes.get(&envelope.to).expect("voter registered");
            if let Some(approve) =
                node.vote_on(requested, parent_hash, height, expected, registry)
            {
                network
                    .deliver(Message::VoteReply { approve }, envelope.to, NodeId::SUPERVISOR)
                    .expect("supervisor registered");
            }
        }
    }
    let mut approvals = 0usize;
    for envelope in network.drain() {
        if matches!(envelope.message, Message::VoteReply { approve: true }) {
            approvals += 1;
        }
    }
    VoteTally {
        approvals,
        eligible: voters.len(),
    }
}
