//! Simulation outputs: per-round traces, election counts, contribution
//! time series and block production times.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::consensus::FlagCause;
use crate::types::Tick;

use super::config::ConsensusMode;

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ElectionCounts {
    /// Rounds in which the node's block was appended.
    pub proposer: u64,
    /// Rounds served on the computing committee.
    pub computing: u64,
    /// Rounds served as a consensus candidate.
    pub candidate: u64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlagRecord {
    pub node: u32,
    pub round: u64,
    pub cause: FlagCause,
}

/// One round's protocol outcome.
#[derive(Clone, Debug, Serialize)]
pub struct RoundTrace {
    pub round: u64,
    pub committee_cp: Vec<u32>,
    pub candidates_cs: Vec<u32>,
    /// Appended block's proposer; `None` for a supervisor empty block.
    pub proposer: Option<u32>,
    pub block_hash: String,
    pub tx_count: usize,
    pub trades: usize,
    pub new_flags: Vec<FlagRecord>,
    pub consensus_failed: bool,
    pub empty_round: bool,
    /// Event-count proxy for round duration: trading/window ticks plus
    /// every message the network processed for this round.
    pub events: u64,
    pub ticks: Tick,
    /// VRF input of the round's candidate seed, for post-hoc audit.
    pub seed_cs_material: String,
}

/// One node's ledger standing after a given round's accrual.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeightPoint {
    pub round: u64,
    pub node: u32,
    pub value: f64,
    pub weight: f64,
    pub ce: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationMetrics {
    pub mode: ConsensusMode,
    pub rounds_completed: u64,
    pub node_count: u32,
    pub elections: BTreeMap<u32, ElectionCounts>,
    pub traces: Vec<RoundTrace>,
    pub weight_series: Vec<WeightPoint>,
    /// Per-round block production time: the event-count proxy under PoC,
    /// hash attempts under PoW.
    pub block_times: Vec<u64>,
    pub flags: Vec<FlagRecord>,
    pub priority_violations: u64,
    pub conservation_ok: bool,
    pub chain_audit_ok: bool,
    pub fallback_rounds: u64,
    /// Newline-delimited block records for audit tooling.
    pub chain_records: String,
    /// Canonical text form of the closing contribution list.
    pub final_contribution_list: String,
}

impl SimulationMetrics {
    /// Proposer counts indexed by node id, for fairness statistics.
    pub fn proposer_counts(&self) -> Vec<u64> {
        (0..self.node_count)
            .map(|id| self.elections.get(&id).map(|e| e.proposer).unwrap_or(0))
            .collect()
    }

    /// Structured summary document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}
