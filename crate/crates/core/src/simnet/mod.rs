//! Deterministic discrete-event harness: simulated clock, reliable in-order
//! message delivery, node behavior policies (honest and adversarial),
//! scenario execution and the PoW baseline.
//!
//! Everything is driven by a single-threaded event loop seeded from the
//! scenario's `rng_seed`; identical configurations produce bit-identical
//! metrics.

mod config;
mod engine;
mod metrics;
mod network;
mod node;
mod pow;

pub use config::{
    BehaviorAssignment, BehaviorPolicy, ConsensusMode, MarketProfile, ScenarioConfig,
};
pub use engine::run;
pub use metrics::{ElectionCounts, FlagRecord, RoundTrace, SimulationMetrics, WeightPoint};
pub use network::{Envelope, Message, Network};
pub use node::SimNode;
pub use pow::{pow_baseline_round, pow_hashing_round};

use thiserror::Error;

use crate::consensus::ConsensusError;
use crate::contribution::ContributionError;
use crate::market::MarketError;
use crate::types::NodeId;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("message routed to unknown node {0}")]
    Routing(NodeId),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Contribution(#[from] ContributionError),
}
