//! Acceptance suite: one test per release criterion, each printing a
//! pass line. Run with `cargo test -p poc-core --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use poc_core::consensus::{build_submission, validate_lists, Audience, RandomSeed};
use poc_core::contribution::{
    energy_trading_contribution, node_weight, ContributionEntry, ContributionList,
    ContributionParams, TradeRecord,
};
use poc_core::simnet::{
    pow_baseline_round, run, BehaviorAssignment, BehaviorPolicy, ConsensusMode, ScenarioConfig,
};
use poc_core::stats;
use poc_core::types::NodeId;
use poc_core::vrf;

fn pass(criterion: u32, name: &str) {
    println!("acceptance criterion {criterion} ({name}): PASS");
}

/// Criterion 1: proposer fairness and election-count averages.
///
/// 10 honest nodes, computing committee 4, candidates 3. Over 1000 rounds
/// at a fixed seed every node proposes at least once and the proposer
/// histogram passes a chi-square uniformity test at significance 0.01.
/// Over 100 rounds, per-node computing elections average 40 and
/// consensus-node (proposer) elections average 10, both within 15% as a
/// mean over 20 seeds.
#[test]
fn criterion_1_fairness() {
    let started = Instant::now();

    let config = ScenarioConfig {
        rounds: 1000,
        rng_seed: 42,
        ..ScenarioConfig::default()
    };
    let metrics = run(&config).unwrap();
    let counts = metrics.proposer_counts();
    assert!(
        counts.iter().all(|&c| c > 0),
        "every node proposes at least once: {counts:?}"
    );
    let gof = stats::chi_square_uniform(&counts);
    assert!(
        gof.p_value > 0.01,
        "uniformity rejected: chi2={} p={}",
        gof.statistic,
        gof.p_value
    );

    let mut computing_means = Vec::new();
    let mut proposer_means = Vec::new();
    for seed in 100..120u64 {
        let metrics = run(&ScenarioConfig {
            rounds: 100,
            rng_seed: seed,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let computing: u64 = metrics.elections.values().map(|e| e.computing).sum();
        let proposer: u64 = metrics.elections.values().map(|e| e.proposer).sum();
        computing_means.push(computing as f64 / 10.0);
        proposer_means.push(proposer as f64 / 10.0);
    }
    let computing_mean = stats::mean(&computing_means);
    let proposer_mean = stats::mean(&proposer_means);
    assert!(
        (computing_mean - 40.0).abs() / 40.0 < 0.15,
        "computing elections averaged {computing_mean}, want 40 +/- 15%"
    );
    assert!(
        (proposer_mean - 10.0).abs() / 10.0 < 0.15,
        "consensus-node elections averaged {proposer_mean}, want 10 +/- 15%"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, budget 30s");
    pass(1, "fairness");
}

/// Criterion 2: diminishing returns is exactly alpha2 / k^2 per trade.
#[test]
fn criterion_2_diminishing_returns() {
    for alpha2 in [1.0, 10.0] {
        let params = ContributionParams {
            alpha2,
            ..ContributionParams::default()
        };
        let trades: Vec<TradeRecord> = (1..=6u32)
            .map(|k| TradeRecord {
                order_id: k as u64,
                p_order: 50.0,
                p_real: 50.0,
                round_index: 7,
                intra_round_ordinal: k,
            })
            .collect();
        for k in 1..=6usize {
            let with_k = energy_trading_contribution(&trades[..k], &params).unwrap();
            let without = energy_trading_contribution(&trades[..k - 1], &params).unwrap();
            let marginal = with_k - without;
            let expected = alpha2 / (k as f64 * k as f64);
            assert!(
                (marginal - expected).abs() / expected < 1e-12,
                "marginal at k={k}: {marginal} vs {expected}"
            );
        }
        // Independent total: same series summed smallest-first.
        let analytic: f64 = (1..=6u64)
            .rev()
            .map(|k| alpha2 / (k * k) as f64)
            .sum();
        let total = energy_trading_contribution(&trades, &params).unwrap();
        assert!(
            (total - analytic).abs() / analytic < 1e-12,
            "total {total} vs analytic {analytic}"
        );
    }
    pass(2, "diminishing returns");
}

/// Criterion 3: malicious nodes are shut out after first detection.
///
/// With 1 and 2 malicious nodes out of 10 (list forgers or invalid-block
/// proposers), over 100 rounds and 20 seeds: after the round in which a
/// node is first flagged, it joins zero committees and proposes zero
/// blocks.
#[test]
fn criterion_3_malicious_exclusion() {
    let started = Instant::now();
    let policies = [
        BehaviorPolicy::ListForger,
        BehaviorPolicy::InvalidBlockProposer,
    ];
    let mut detections = 0u32;
    let mut runs = 0u32;
    for policy in policies {
        for malicious_count in [1u32, 2] {
            for seed in 200..220u64 {
                runs += 1;
                let behaviors: Vec<BehaviorAssignment> = (0..malicious_count)
                    .map(|i| BehaviorAssignment {
                        node: 9 - i,
                        policy,
                    })
                    .collect();
                let metrics = run(&ScenarioConfig {
                    rounds: 100,
                    rng_seed: seed,
                    behaviors,
                    ..ScenarioConfig::default()
                })
                .unwrap();
                let mut all_detected = true;
                for i in 0..malicious_count {
                    let bad = 9 - i;
                    let Some(flag) = metrics.flags.iter().find(|f| f.node == bad) else {
                        all_detected = false;
                        continue;
                    };
                    for trace in metrics.traces.iter().filter(|t| t.round > flag.round) {
                        assert!(
                            !trace.committee_cp.contains(&bad)
                                && !trace.candidates_cs.contains(&bad),
                            "node {bad} in a committee after detection (policy {policy:?}, \
                             seed {seed}, round {})",
                            trace.round
                        );
                        assert_ne!(
                            trace.proposer,
                            Some(bad),
                            "node {bad} proposed after detection (seed {seed})"
                        );
                    }
                }
                if all_detected {
                    detections += 1;
                }
            }
        }
    }
    assert_eq!(
        detections, runs,
        "every malicious node should be caught within 100 rounds"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, budget 30s");
    pass(3, "malicious exclusion");
}

/// Criterion 4: PoC finalization time is far more stable than PoW.
///
/// Over 100 rounds the coefficient of variation of the PoC event-count
/// proxy is at least 5x smaller than the PoW baseline's at a difficulty
/// whose mean matches PoC's; the PoW mean itself matches the geometric
/// prediction 1/p within 10%.
#[test]
fn criterion_4_block_time_stability() {
    let poc = run(&ScenarioConfig {
        rounds: 100,
        rng_seed: 42,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let poc_times: Vec<f64> = poc.block_times.iter().map(|&t| t as f64).collect();
    let poc_mean = stats::mean(&poc_times);
    let poc_cov = stats::coefficient_of_variation(&poc_times);

    // Difficulty whose geometric mean 2^d is closest to the PoC mean.
    let difficulty = poc_mean.log2().round().clamp(1.0, 48.0) as u32;
    let predicted_mean = 2f64.powi(difficulty as i32);
    assert!(
        predicted_mean / poc_mean < 2.0 && poc_mean / predicted_mean < 2.0,
        "difficulty {difficulty} mean {predicted_mean} is not near PoC mean {poc_mean}"
    );

    let pow = run(&ScenarioConfig {
        rounds: 100,
        rng_seed: 42,
        consensus_mode: ConsensusMode::Pow,
        pow_difficulty: difficulty,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let pow_times: Vec<f64> = pow.block_times.iter().map(|&t| t as f64).collect();
    let pow_cov = stats::coefficient_of_variation(&pow_times);
    assert!(
        poc_cov <= pow_cov / 5.0,
        "PoC CoV {poc_cov} not 5x smaller than PoW CoV {pow_cov}"
    );

    let mut rng = ChaCha20Rng::seed_from_u64(4242);
    let trials = 10_000u64;
    let total: u64 = (0..trials)
        .map(|_| pow_baseline_round(difficulty, &mut rng))
        .sum();
    let sample_mean = total as f64 / trials as f64;
    assert!(
        (sample_mean - predicted_mean).abs() / predicted_mean < 0.10,
        "PoW mean {sample_mean} vs geometric prediction {predicted_mean}"
    );
    pass(4, "block-time stability");
}

/// Criterion 5: exhaustive list-validation check at committee size 4,
/// threshold 2: agreement exactly when some valid-proof list appears
/// strictly more than twice; forged-proof submissions never count.
#[test]
fn criterion_5_validation_exhaustive() {
    let seed = RandomSeed {
        round_index: 5,
        audience: Audience::Cp,
        bytes: [11u8; 32],
    };
    let wrong_seed = RandomSeed {
        round_index: 6,
        ..seed.clone()
    };
    let keypairs: Vec<vrf::KeyPair> = (0..4)
        .map(|i| vrf::keygen(format!("acc5-{i}").as_bytes()).unwrap())
        .collect();
    let registry: BTreeMap<NodeId, vrf::PublicKey> = keypairs
        .iter()
        .enumerate()
        .map(|(i, kp)| (NodeId(i as u32), kp.public_key.clone()))
        .collect();
    let make_list = |tag: f64| {
        let entries = (0..4u32)
            .map(|id| {
                let mut e = ContributionEntry::new(
                    NodeId(id),
                    registry[&NodeId(id)].clone(),
                );
                e.value = tag + id as f64;
                e.weight = 1.0;
                e
            })
            .collect();
        Arc::new(ContributionList::from_entries(entries))
    };
    let honest = make_list(0.0);
    let forged = make_list(1000.0);

    // Submitter kinds: honest list, forged list, or an invalid proof
    // (signed against the wrong seed, as a node without the real seed).
    let mut checked = 0u32;
    for assignment in 0..81u32 {
        let kinds: Vec<u32> = (0..4).map(|i| (assignment / 3u32.pow(i)) % 3).collect();
        let submissions: Vec<_> = kinds
            .iter()
            .enumerate()
            .map(|(i, &kind)| {
                let (list, use_seed) = match kind {
                    0 => (Arc::clone(&honest), &seed),
                    1 => (Arc::clone(&forged), &seed),
                    _ => (Arc::clone(&honest), &wrong_seed),
                };
                build_submission(
                    NodeId(i as u32),
                    &keypairs[i],
                    use_seed,
                    list,
                    NodeId(1),
                    NodeId(2),
                )
                .unwrap()
            })
            .collect();
        let honest_count = kinds.iter().filter(|&&k| k == 0).count();
        let forged_count = kinds.iter().filter(|&&k| k == 1).count();
        let outcome = validate_lists(&submissions, &seed, &registry, 2);
        match outcome.agreed {
            Some(agreed) => {
                assert!(
                    honest_count > 2 || forged_count > 2,
                    "agreement without a strict majority: kinds {kinds:?}"
                );
                let expected = if honest_count > 2 { &honest } else { &forged };
                assert_eq!(
                    agreed.list.canonical_serialize(),
                    expected.canonical_serialize(),
                    "wrong list agreed for kinds {kinds:?}"
                );
                assert_eq!(agreed.supporters.len(), honest_count.max(forged_count));
            }
            None => {
                assert!(
                    honest_count <= 2 && forged_count <= 2,
                    "missed agreement for kinds {kinds:?}"
                );
            }
        }
        // Collusion reading: any forging subset of size <= threshold never
        // wins, whatever the rest do.
        if forged_count <= 2 {
            checked += 1;
        }
    }
    assert!(checked > 0);
    pass(5, "validation exhaustive");
}

/// Criterion 6: node_weight matches an independent streaming oracle on
/// 1000 random histories to relative error 1e-12.
#[test]
fn criterion_6_weight_oracle() {
    // Welford's online mean/variance, a different route than the
    // implementation's two-pass formula.
    fn oracle(history: &[f64], epsilon: f64) -> f64 {
        assert!(!history.is_empty());
        if history.len() == 1 {
            return 1.0 / history[0].max(epsilon);
        }
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (i, &x) in history.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (x - mean);
        }
        let std = (m2 / history.len() as f64).sqrt();
        1.0 / std.max(epsilon)
    }

    let params = ContributionParams::default();
    let mut rng = ChaCha20Rng::seed_from_u64(606);
    for case in 0..1000 {
        let history: Vec<f64> = match case % 10 {
            // Single-round branch.
            0 => vec![rng.gen_range(0.0..100.0)],
            // Constant history hits the epsilon floor.
            1 => {
                let v = rng.gen_range(0.0..100.0);
                vec![v; rng.gen_range(2..20)]
            }
            _ => {
                let n = rng.gen_range(2..40);
                (0..n).map(|_| rng.gen_range(0.0..100.0)).collect()
            }
        };
        let got = node_weight(&history, &params).unwrap();
        let want = oracle(&history, params.epsilon);
        assert!(
            (got - want).abs() <= 1e-12 * want.abs(),
            "history {history:?}: {got} vs {want}"
        );
    }
    pass(6, "weight oracle");
}

/// Criterion 7: VRF suite: roundtrip, mutation soundness, determinism
/// and output uniformity.
#[test]
fn criterion_7_vrf_suite() {
    let mut rng = ChaCha20Rng::seed_from_u64(707);

    // Roundtrip and determinism.
    for i in 0..100u32 {
        let kp = vrf::keygen(&i.to_be_bytes()).unwrap();
        let seed: [u8; 24] = rng.gen();
        let a = vrf::evaluate(&kp.secret_key, &seed).unwrap();
        let b = vrf::evaluate(&kp.secret_key, &seed).unwrap();
        assert_eq!(a, b, "evaluate must be pure");
        assert!(vrf::verify(&kp.public_key, &seed, &a));
    }

    // 10^4 random single-byte mutations, zero false accepts.
    let kp = vrf::keygen(b"mutation-target").unwrap();
    let mut false_accepts = 0u32;
    for _ in 0..10_000 {
        let seed: [u8; 16] = rng.gen();
        let out = vrf::evaluate(&kp.secret_key, &seed).unwrap();
        let mut out = out;
        let mut seed = seed.to_vec();
        let mut pk = kp.public_key.as_bytes().to_vec();
        let flip: u8 = rng.gen_range(1..=255);
        let target: u8 = rng.gen_range(0..4);
        match target {
            0 => {
                let i = rng.gen_range(0..32);
                out.value.0[i] ^= flip;
            }
            1 => {
                let i = rng.gen_range(0..32);
                out.proof.0[i] ^= flip;
            }
            2 => {
                let i = rng.gen_range(0..seed.len());
                seed[i] ^= flip;
            }
            _ => {
                let i = rng.gen_range(0..pk.len());
                pk[i] ^= flip;
            }
        }
        let pk = vrf::PublicKey::from_bytes(pk);
        if vrf::verify(&pk, &seed, &out) {
            false_accepts += 1;
        }
    }
    assert_eq!(false_accepts, 0, "mutations must never verify");

    // Top-byte uniformity over 10^4 evaluations.
    let kp = vrf::keygen(b"uniformity").unwrap();
    let mut bins = [0u64; 256];
    for _ in 0..10_000 {
        let seed: [u8; 16] = rng.gen();
        let out = vrf::evaluate(&kp.secret_key, &seed).unwrap();
        bins[out.value.top_byte() as usize] += 1;
    }
    let gof = stats::chi_square_uniform(&bins);
    assert!(
        gof.p_value > 0.01,
        "top byte not uniform: chi2={} p={}",
        gof.statistic,
        gof.p_value
    );
    pass(7, "vrf suite");
}

/// Criterion 8: market audit: exact account conservation and zero
/// seller-priority violations over full simulated runs, honest and
/// adversarial.
#[test]
fn criterion_8_market_audit() {
    let scenarios = [
        ScenarioConfig {
            rounds: 100,
            rng_seed: 42,
            ..ScenarioConfig::default()
        },
        ScenarioConfig {
            rounds: 100,
            rng_seed: 808,
            behaviors: vec![
                BehaviorAssignment {
                    node: 9,
                    policy: BehaviorPolicy::ListForger,
                },
                BehaviorAssignment {
                    node: 8,
                    policy: BehaviorPolicy::OfflineFlaky {
                        drop_probability: 0.5,
                    },
                },
            ],
            ..ScenarioConfig::default()
        },
    ];
    for config in scenarios {
        let metrics = run(&config).unwrap();
        assert!(metrics.conservation_ok, "conservation violated");
        assert_eq!(
            metrics.priority_violations, 0,
            "matching priority violated (seed {})",
            config.rng_seed
        );
    }
    pass(8, "market audit");
}

/// Criterion 9: reruns with identical config and seed are byte-identical.
#[test]
fn criterion_9_determinism() {
    let configs = [
        ScenarioConfig {
            rounds: 60,
            rng_seed: 909,
            behaviors: vec![BehaviorAssignment {
                node: 9,
                policy: BehaviorPolicy::ListForger,
            }],
            ..ScenarioConfig::default()
        },
        ScenarioConfig {
            rounds: 60,
            rng_seed: 909,
            consensus_mode: ConsensusMode::Pow,
            pow_difficulty: 6,
            ..ScenarioConfig::default()
        },
    ];
    for config in configs {
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.to_json(), b.to_json(), "metrics must be byte-identical");
        assert_eq!(a.chain_records, b.chain_records);
    }
    pass(9, "determinism");
}
