//! Scenario configuration: network shape, round protocol parameters,
//! market profiles and per-node behavior policies.

use serde::{Deserialize, Serialize};

use crate::consensus::{ProtocolConfig, SelectionStrategy};
use crate::contribution::ContributionParams;
use crate::market::{Energy, Money};
use crate::types::Tick;

use super::SimError;

/// What a node does with the protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BehaviorPolicy {
    /// Follows the protocol exactly.
    Honest,
    /// Submits a contribution list with its own entry inflated.
    ListForger,
    /// Packages a tampered transaction into its proposed blocks.
    InvalidBlockProposer,
    /// Drops each received message with the given probability.
    OfflineFlaky { drop_probability: f64 },
    /// Coordinates with its group to submit an identical forged list that
    /// inflates every group member.
    Colluder { group: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorAssignment {
    pub node: u32,
    pub policy: BehaviorPolicy,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusMode {
    #[default]
    Poc,
    Pow,
}

/// Stochastic order-flow and generation profile shared by all nodes, which
/// keeps activity identically distributed across honest participants.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MarketProfile {
    /// Starting balance per account, in milli-currency.
    pub initial_balance: Money,
    /// Probability a node submits an order on a given trading tick.
    pub order_rate: f64,
    /// Probability a submitted order is a buy.
    pub buy_fraction: f64,
    /// Order size range in kW, inclusive.
    pub quantity_range: (Energy, Energy),
    /// Unit price range in milli-currency per kW, inclusive.
    pub price_range: (Money, Money),
    /// Ticks between order submission and its delivery deadline.
    pub delivery_slack_range: (Tick, Tick),
    /// Ticks between a match and the seller's delivery.
    pub delivery_lag_range: (Tick, Tick),
    /// Delivered-over-contracted ratio sampled per match.
    pub delivery_quality_range: (f64, f64),
    /// Distributed generation devices per node, fixed at startup.
    pub devices_range: (u32, u32),
    /// Per-device output in kW sampled each round.
    pub generation_range: (f64, f64),
    /// Probability a node is online for only part of a round.
    pub partial_session_probability: f64,
}

impl Default for MarketProfile {
    fn default() -> Self {
        MarketProfile {
            initial_balance: 1_000_000,
            order_rate: 0.08,
            buy_fraction: 0.5,
            quantity_range: (5, 50),
            price_range: (1_000, 3_000),
            delivery_slack_range: (5, 30),
            delivery_lag_range: (1, 10),
            delivery_quality_range: (0.9, 1.0),
            devices_range: (1, 3),
            generation_range: (0.0, 20.0),
            partial_session_probability: 0.1,
        }
    }
}

impl MarketProfile {
    fn validate(&self) -> Result<(), SimError> {
        let unit = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SimError::Config(format!("{name} must be within [0, 1]")))
            }
        };
        unit(self.order_rate, "order_rate")?;
        unit(self.buy_fraction, "buy_fraction")?;
        unit(self.partial_session_probability, "partial_session_probability")?;
        unit(self.delivery_quality_range.0, "delivery_quality_range.0")?;
        unit(self.delivery_quality_range.1, "delivery_quality_range.1")?;
        if self.quantity_range.0 == 0 || self.quantity_range.0 > self.quantity_range.1 {
            return Err(SimError::Config("quantity_range must be ordered and positive".into()));
        }
        if self.price_range.0 == 0 || self.price_range.0 > self.price_range.1 {
            return Err(SimError::Config("price_range must be ordered and positive".into()));
        }
        if self.delivery_slack_range.0 > self.delivery_slack_range.1
            || self.delivery_lag_range.0 > self.delivery_lag_range.1
            || self.delivery_quality_range.0 > self.delivery_quality_range.1
            || self.devices_range.0 > self.devices_range.1
            || self.generation_range.0 > self.generation_range.1
        {
            return Err(SimError::Config("profile ranges must be ordered".into()));
        }
        if self.generation_range.0 < 0.0 {
            return Err(SimError::Config("generation must be non-negative".into()));
        }
        Ok(())
    }
}

/// Full description of one simulation run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Participant count; the supervision node is extra.
    pub node_count: u32,
    pub committee_cp_size: usize,
    pub committee_cs_size: usize,
    /// List agreement needs strictly more than this many identical lists.
    pub threshold_n: usize,
    pub rounds: u64,
    pub rng_seed: u64,
    pub contribution: ContributionParams,
    pub market: MarketProfile,
    pub behaviors: Vec<BehaviorAssignment>,
    pub consensus_mode: ConsensusMode,
    /// Leading zero bits required by the PoW baseline.
    pub pow_difficulty: u32,
    /// Search with real hashing instead of the analytic geometric model.
    pub pow_real_hashing: bool,
    pub window_period: Tick,
    pub trade_time: Tick,
    pub trade_limit: usize,
    pub selection_strategy: SelectionStrategy,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            node_count: 10,
            committee_cp_size: 4,
            committee_cs_size: 3,
            threshold_n: 2,
            rounds: 100,
            rng_seed: 42,
            contribution: ContributionParams::default(),
            market: MarketProfile::default(),
            behaviors: Vec::new(),
            consensus_mode: ConsensusMode::Poc,
            pow_difficulty: 8,
            pow_real_hashing: false,
            window_period: 10,
            trade_time: 100,
            trade_limit: 100,
            selection_strategy: SelectionStrategy::RouletteWheel,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.rounds == 0 {
            return Err(SimError::Config("rounds must be at least 1".into()));
        }
        if self.threshold_n == 0 {
            return Err(SimError::Config("threshold_n must be at least 1".into()));
        }
        if self.committee_cp_size == 0 || self.committee_cs_size == 0 {
            return Err(SimError::Config("committee sizes must be positive".into()));
        }
        let needed = (self.committee_cp_size + self.committee_cs_size + 1) as u32;
        if self.node_count < needed {
            return Err(SimError::Config(format!(
                "node_count {} leaves no ordinary node beside committees of {} and {}",
                self.node_count, self.committee_cp_size, self.committee_cs_size
            )));
        }
        if self.consensus_mode == ConsensusMode::Pow
            && !(1..=48).contains(&self.pow_difficulty)
        {
            return Err(SimError::Config("pow_difficulty must be in 1..=48".into()));
        }
        if self.trade_time == 0 {
            return Err(SimError::Config("trade_time must be positive".into()));
        }
        self.contribution
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        self.market.validate()?;
        for assignment in &self.behaviors {
            if assignment.node >= self.node_count {
                return Err(SimError::Config(format!(
                    "behavior assigned to unknown node {}",
                    assignment.node
                )));
            }
            if let BehaviorPolicy::OfflineFlaky { drop_probability } = assignment.policy {
                if !(0.0..=1.0).contains(&drop_probability) {
                    return Err(SimError::Config(
                        "drop_probability must be within [0, 1]".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            committee_cp_size: self.committee_cp_size,
            committee_cs_size: self.committee_cs_size,
            threshold_n: self.threshold_n,
            window_period: self.window_period,
            trade_time: self.trade_time,
            trade_limit: self.trade_limit,
            strategy: self.selection_strategy,
        }
    }

    pub fn policy_of(&self, node: u32) -> BehaviorPolicy {
        self.behaviors
            .iter()
            .find(|a| a.node == node)
            .map(|a| a.policy)
            .unwrap_or(BehaviorPolicy::Honest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn committee_sizes_must_leave_an_ordinary_node() {
        let config = ScenarioConfig {
            node_count: 8,
            committee_cp_size: 4,
            committee_cs_size: 4,
            ..ScenarioConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn behavior_for_unknown_node_rejected() {
        let config = ScenarioConfig {
            behaviors: vec![BehaviorAssignment {
                node: 99,
                policy: BehaviorPolicy::ListForger,
            }],
            ..ScenarioConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let config = ScenarioConfig {
            behaviors: vec![BehaviorAssignment {
                node: 3,
                policy: BehaviorPolicy::OfflineFlaky {
                    drop_probability: 0.25,
                },
            }],
            ..ScenarioConfig::default()
        };
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.behaviors, config.behaviors);
        assert_eq!(back.node_count, config.node_count);
    }
}
