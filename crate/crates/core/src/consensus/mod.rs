//! The PoC round protocol: committee election, contribution-list
//! validation, committee dispatch, round-end broadcast and window-period
//! block finalization.
//!
//! Each round the computing committee independently rebuilds the
//! contribution list, proves membership with a VRF output on the round's
//! computing seed, and nominates one computing node and one consensus
//! candidate for the next round. The supervision node validates the
//! submissions by counting identical lists, flags divergent submitters,
//! tops up short committees by weighted selection, and finalizes the block
//! proposed with the largest verified VRF value that wins a majority vote.

mod select;
mod submission;
mod supervisor;
mod validate;

pub use select::{draw_weighted, weighted_select};
pub use submission::{
    build_block_proposal, build_submission, honest_submission, sign_submission,
    verify_submission,
};
pub use supervisor::{FinalizeSummary, SubmissionOutcome, Supervisor, VoteTally};
pub use validate::{validate_lists, AgreedList, ValidationOutcome};

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contribution::ContributionList;
use crate::types::{NodeId, Tick};
use crate::vrf::{VrfError, VrfOutput};

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("fewer than two positive-weight candidates available ({available})")]
    InsufficientCandidates { available: usize },
    #[error("no contribution list reached agreement")]
    ConsensusFailure,
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error(transparent)]
    Vrf(#[from] VrfError),
}

/// Network roles. Every node starts ordinary; the single supervision node
/// is operated by the grid company and never changes role.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Ordinary,
    ConsensusCandidate,
    Computing,
    Supervision,
}

/// Which committee a seed is addressed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Audience {
    Cp,
    Cs,
}

impl Audience {
    fn tag(&self) -> u8 {
        match self {
            Audience::Cp => 0,
            Audience::Cs => 1,
        }
    }
}

/// A per-round random seed generated by the supervision node, distinct per
/// (round, audience). `round_index` is the round whose committee uses it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomSeed {
    pub round_index: u64,
    pub audience: Audience,
    pub bytes: [u8; 32],
}

impl RandomSeed {
    /// Canonical VRF input for this seed.
    pub fn material(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(41);
        out.push(self.audience.tag());
        out.extend_from_slice(&self.round_index.to_be_bytes());
        out.extend_from_slice(&self.bytes);
        out
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.bytes)
    }
}

/// Round phases in execution order. The computing committee works first
/// (over the previous round's records), trading runs until its time or
/// transaction limit, and the window period finalizes the block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Computing,
    Trading,
    Finalizing,
    Done,
}

/// Per-round protocol state held by the supervision node.
#[derive(Clone, Debug)]
pub struct RoundState {
    pub round_index: u64,
    /// Seed this round's computing committee proves membership with.
    pub seed_cp: RandomSeed,
    /// Seed this round's consensus candidates prove membership with.
    pub seed_cs: RandomSeed,
    pub committee_cp: BTreeSet<NodeId>,
    pub candidates_cs: BTreeSet<NodeId>,
    pub window_period: Tick,
    pub trade_limit: usize,
    pub trade_time: Tick,
    pub phase: Phase,
}

impl RoundState {
    pub fn role_of(&self, node_id: NodeId) -> Role {
        if node_id.is_supervisor() {
            Role::Supervision
        } else if self.committee_cp.contains(&node_id) {
            Role::Computing
        } else if self.candidates_cs.contains(&node_id) {
            Role::ConsensusCandidate
        } else {
            Role::Ordinary
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagCause {
    BadList,
    BadBlock,
    BadProof,
}

impl std::fmt::Display for FlagCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FlagCause::BadList => "bad_list",
            FlagCause::BadBlock => "bad_block",
            FlagCause::BadProof => "bad_proof",
        };
        f.write_str(s)
    }
}

/// Permanent record of detected misbehavior; once set, never cleared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MaliciousFlag {
    pub node_id: NodeId,
    pub round_detected: u64,
    pub cause: FlagCause,
}

/// A computing node's round submission: its independently built list, the
/// VRF output proving committee membership, and its Algorithm-1 picks for
/// the next round's committees.
#[derive(Clone, Debug)]
pub struct ComputingSubmission {
    pub node_id: NodeId,
    pub list: Arc<ContributionList>,
    pub vrf: VrfOutput,
    pub pick_cp: NodeId,
    pub pick_cs: NodeId,
    pub signature: [u8; 32],
}

/// How Algorithm-1 draws are realized.
///
/// `RouletteWheel` is cumulative-prefix-sum sampling without replacement,
/// which makes selection probability exactly proportional to weight.
/// `LiteralScan` walks entries in list order and takes the first whose
/// weight exceeds the drawn threshold, redrawing until something matches;
/// it is kept for comparison because its outcome depends on list order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    #[default]
    RouletteWheel,
    LiteralScan,
}

/// Committee sizes, validation threshold and round timing.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub committee_cp_size: usize,
    pub committee_cs_size: usize,
    /// Agreement needs strictly more than this many identical lists.
    pub threshold_n: usize,
    /// Window period T reserved for proposal broadcast and voting.
    pub window_period: Tick,
    /// Maximum trading-phase length in ticks.
    pub trade_time: Tick,
    /// Trading also ends once this many trades are accepted.
    pub trade_limit: usize,
    pub strategy: SelectionStrategy,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            committee_cp_size: 4,
            committee_cs_size: 3,
            threshold_n: 2,
            window_period: 10,
            trade_time: 100,
            trade_limit: 100,
            strategy: SelectionStrategy::RouletteWheel,
        }
    }
}

/// Credentials the supervision node hands the next round's committees:
/// computing members get the new seed plus the agreed list, candidates get
/// their seed only. Receiving one of these is what tells a node its
/// next-round role.
#[derive(Clone, Debug)]
pub enum CommitteeDispatch {
    Computing {
        seed: RandomSeed,
        list: Arc<ContributionList>,
    },
    Candidate {
        seed: RandomSeed,
    },
}

/// Round-end broadcast revealing this round's committees and the candidate
/// seed every node needs to verify proposed blocks.
#[derive(Clone, Debug)]
pub struct RoundEndBroadcast {
    pub seed_cs: RandomSeed,
    pub candidates_cs: BTreeSet<NodeId>,
    pub committee_cp: BTreeSet<NodeId>,
}
