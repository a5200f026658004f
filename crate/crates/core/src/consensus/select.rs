//! Weighted random selection over the contribution list.

use rand::Rng;

use crate::contribution::ContributionList;
use crate::types::NodeId;

use super::{ConsensusError, SelectionStrategy};

/// Removes and returns one node from `pool`, chosen with probability
/// proportional to weight (roulette wheel) or by the literal first-weight-
/// above-threshold scan. Entries with non-positive weight never win.
/// Returns `None` once no positive-weight entry remains.
pub fn draw_weighted<R: Rng>(
    pool: &mut Vec<(NodeId, f64)>,
    rng: &mut R,
    strategy: SelectionStrategy,
) -> Option<NodeId> {
    pool.retain(|(_, w)| *w > 0.0);
    if pool.is_empty() {
        return None;
    }
    let total: f64 = pool.iter().map(|(_, w)| w).sum();
    match strategy {
        SelectionStrategy::RouletteWheel => roulette_draw(pool, total, rng),
        SelectionStrategy::LiteralScan => literal_scan_draw(pool, total, rng),
    }
}

fn roulette_draw<R: Rng>(pool: &mut Vec<(NodeId, f64)>, total: f64, rng: &mut R) -> Option<NodeId> {
    let threshold = rng.gen_range(0.0..total);
    let mut cumulative = 0.0;
    for i in 0..pool.len() {
        cumulative += pool[i].1;
        if cumulative > threshold {
            return Some(pool.remove(i).0);
        }
    }
    // Rounding can leave the cumulative sum a hair under the threshold.
    Some(pool.pop().expect("pool non-empty").0)
}

fn literal_scan_draw<R: Rng>(
    pool: &mut Vec<(NodeId, f64)>,
    total: f64,
    rng: &mut R,
) -> Option<NodeId> {
    // The scan only hits entries whose weight exceeds the draw, so small
    // draws are retried until one lands below some entry's weight.
    loop {
        let threshold = rng.gen_range(0.0..total);
        for i in 0..pool.len() {
            if pool[i].1 > threshold {
                return Some(pool.remove(i).0);
            }
        }
    }
}

/// Samples the next-round computing pick and consensus pick: two distinct
/// nodes drawn without replacement, weight-proportionally. Requires at
/// least two positive-weight entries.
pub fn weighted_select<R: Rng>(
    list: &ContributionList,
    rng: &mut R,
    strategy: SelectionStrategy,
) -> Result<(NodeId, NodeId), ConsensusError> {
    let mut pool: Vec<(NodeId, f64)> = list
        .entries()
        .iter()
        .filter(|e| e.weight > 0.0)
        .map(|e| (e.node_id, e.weight))
        .collect();
    if pool.len() < 2 {
        return Err(ConsensusError::InsufficientCandidates {
            available: pool.len(),
        });
    }
    let pick_cp = draw_weighted(&mut pool, rng, strategy).expect("two entries available");
    let pick_cs = draw_weighted(&mut pool, rng, strategy).expect("one entry remains");
    Ok((pick_cp, pick_cs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contribution::ContributionEntry;
    use crate::vrf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn list(weights: &[(u32, f64)]) -> ContributionList {
        let entries = weights
            .iter()
            .map(|(id, w)| {
                let mut entry = ContributionEntry::new(
                    NodeId(*id),
                    vrf::keygen(format!("s{id}").as_bytes()).unwrap().public_key,
                );
                entry.weight = *w;
                entry.value = *w;
                entry
            })
            .collect();
        ContributionList::from_entries(entries)
    }

    #[test]
    fn single_positive_entry_is_insufficient() {
        let list = list(&[(0, 1.0), (1, 0.0), (2, 0.0)]);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(matches!(
            weighted_select(&list, &mut rng, SelectionStrategy::RouletteWheel),
            Err(ConsensusError::InsufficientCandidates { available: 1 })
        ));
    }

    #[test]
    fn picks_are_distinct() {
        let list = list(&[(0, 1.0), (1, 1.0), (2, 1.0)]);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (cp, cs) = weighted_select(&list, &mut rng, SelectionStrategy::RouletteWheel).unwrap();
            assert_ne!(cp, cs);
        }
    }

    #[test]
    fn equal_weights_split_first_pick_evenly() {
        let list = list(&[(0, 1.0), (1, 1.0)]);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut first_a = 0u32;
        for _ in 0..10_000 {
            let (cp, _) = weighted_select(&list, &mut rng, SelectionStrategy::RouletteWheel).unwrap();
            if cp == NodeId(0) {
                first_a += 1;
            }
        }
        let share = first_a as f64 / 10_000.0;
        assert!((share - 0.5).abs() < 0.02, "first-pick share {share}");
    }

    #[test]
    fn weights_bias_first_pick_proportionally() {
        let list = list(&[(0, 3.0), (1, 1.0), (2, 0.0)]);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut first_a = 0u32;
        for _ in 0..10_000 {
            let (cp, cs) = weighted_select(&list, &mut rng, SelectionStrategy::RouletteWheel).unwrap();
            assert_ne!(cp, NodeId(2), "zero-weight node selected");
            assert_ne!(cs, NodeId(2), "zero-weight node selected");
            if cp == NodeId(0) {
                first_a += 1;
            }
        }
        let share = first_a as f64 / 10_000.0;
        assert!((share - 0.75).abs() < 0.02, "first-pick share {share}");
    }

    #[test]
    fn literal_scan_also_draws_two_distinct() {
        let list = list(&[(0, 5.0), (1, 2.0), (2, 1.0)]);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (cp, cs) = weighted_select(&list, &mut rng, SelectionStrategy::LiteralScan).unwrap();
            assert_ne!(cp, cs);
        }
    }

    #[test]
    fn draw_weighted_exhausts_pool() {
        let mut pool = vec![(NodeId(0), 1.0), (NodeId(1), 0.0), (NodeId(2), 2.0)];
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut drawn = Vec::new();
        while let Some(id) = draw_weighted(&mut pool, &mut rng, SelectionStrategy::RouletteWheel) {
            drawn.push(id);
        }
        assert_eq!(drawn.len(), 2);
        assert!(!drawn.contains(&NodeId(1)));
    }
}
