//! Built-in scenario catalogue.

use poc_core::simnet::{BehaviorAssignment, BehaviorPolicy, ScenarioConfig};

use crate::reports::ReportKind;

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub config: ScenarioConfig,
    pub reports: Vec<ReportKind>,
}

fn base(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        rounds: 100,
        rng_seed: seed,
        ..ScenarioConfig::default()
    }
}

pub fn catalogue() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "fig6",
            description: "proposer distribution, 10 honest nodes, 100 rounds",
            config: base(6001),
            reports: vec![ReportKind::ProposerDistribution],
        },
        Scenario {
            name: "fig7",
            description: "per-node election counts (proposer / computing / candidate)",
            config: base(7001),
            reports: vec![ReportKind::ElectionCounts],
        },
        Scenario {
            name: "fig8",
            description: "diminishing returns of repeated trades within one round",
            config: base(8001),
            reports: vec![ReportKind::DiminishingReturns],
        },
        Scenario {
            name: "fig9",
            description: "per-node contribution value and weight over time",
            config: base(9001),
            reports: vec![ReportKind::WeightTrace],
        },
        Scenario {
            name: "fig10a",
            description: "malicious exclusion with one list forger",
            config: ScenarioConfig {
                behaviors: vec![BehaviorAssignment {
                    node: 9,
                    policy: BehaviorPolicy::ListForger,
                }],
                ..base(10001)
            },
            reports: vec![ReportKind::MaliciousTrace, ReportKind::ProposerDistribution],
        },
        Scenario {
            name: "fig10b",
            description: "malicious exclusion with a forger and an invalid-block proposer",
            config: ScenarioConfig {
                behaviors: vec![
                    BehaviorAssignment {
                        node: 9,
                        policy: BehaviorPolicy::ListForger,
                    },
                    BehaviorAssignment {
                        node: 8,
                        policy: BehaviorPolicy::InvalidBlockProposer,
                    },
                ],
                ..base(10002)
            },
            reports: vec![ReportKind::MaliciousTrace, ReportKind::ProposerDistribution],
        },
        Scenario {
            name: "fig11",
            description: "per-round block production time, PoC versus PoW",
            config: ScenarioConfig {
                pow_difficulty: 7,
                ..base(11001)
            },
            reports: vec![ReportKind::BlockTimeComparison],
        },
    ]
}

pub fn find(name: &str) -> Option<Scenario> {
    catalogue().into_iter().find(|s| s.name == name)
}
