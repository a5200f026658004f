//! Proof-of-Contribution (PoC) consensus simulator for microgrid P2P energy
//! trading.
//!
//! The crate models a blockchain network in which committee membership is
//! earned through quantified contributions (power generation, trade quality,
//! online time, consensus service) instead of work or stake. A trusted
//! supervision node generates round seeds, validates contribution lists
//! submitted by the computing committee, and relays committee credentials;
//! consensus candidates package settlement transactions and the candidate
//! with the largest verified VRF value proposes the round's block.
//!
//! Modules:
//! - [`vrf`]: simulation-grade verifiable random function.
//! - [`contribution`]: contribution values, node weights, the ledger.
//! - [`consensus`]: committee election, list validation, block finalization.
//! - [`market`]: order book, contribution-priority matching, settlement.
//! - [`chain`]: hash-linked block storage.
//! - [`simnet`]: deterministic discrete-event harness and PoW baseline.
//! - [`stats`]: chi-square and dispersion helpers used by reports and tests.

pub mod chain;
pub mod consensus;
pub mod contribution;
pub mod market;
pub mod simnet;
pub mod stats;
pub mod types;
pub mod vrf;

pub use types::{NodeId, Tick};
