//! Contribution-list validation: count identical lists among submissions
//! with valid membership proofs; agreement needs strictly more than the
//! threshold.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::contribution::ContributionList;
use crate::types::NodeId;
use crate::vrf::PublicKey;

use super::{ComputingSubmission, RandomSeed};

/// The list that won agreement, who supported it, and their picks.
#[derive(Clone, Debug)]
pub struct AgreedList {
    pub list: Arc<ContributionList>,
    pub supporters: Vec<NodeId>,
    /// (submitter, pick_cp, pick_cs) from each supporting submission, in
    /// ascending submitter order.
    pub picks: Vec<(NodeId, NodeId, NodeId)>,
}

#[derive(Clone, Debug)]
pub struct ValidationOutcome {
    /// `None` when no list reached a count strictly above the threshold.
    pub agreed: Option<AgreedList>,
    /// Submitters whose VRF proof or signature failed; never counted.
    pub invalid_proof: Vec<NodeId>,
    /// Valid-proof submitters whose list diverged from the agreed one.
    pub divergent: Vec<NodeId>,
}

/// Algorithm-2 style validation. Submissions failing VRF or signature
/// verification are discarded before counting; survivors are grouped by
/// the canonical serialization of their list, and a group whose count is
/// strictly greater than `threshold_n` becomes the agreed list.
///
/// With the recommended threshold of half the committee, at most one group
/// can exceed it; for smaller thresholds ties break toward the larger
/// group, then the lexicographically smallest serialization.
pub fn validate_lists(
    submissions: &[ComputingSubmission],
    seed_cp: &RandomSeed,
    registry: &BTreeMap<NodeId, PublicKey>,
    threshold_n: usize,
) -> ValidationOutcome {
    let mut invalid_proof = Vec::new();
    let mut valid: Vec<&ComputingSubmission> = Vec::new();
    for submission in submissions {
        let ok = registry
            .get(&submission.node_id)
            .map(|pk| super::verify_submission(submission, pk, seed_cp))
            .unwrap_or(false);
        if ok {
            valid.push(submission);
        } else {
            invalid_proof.push(submission.node_id);
        }
    }

    let mut groups: BTreeMap<&str, Vec<&ComputingSubmission>> = BTreeMap::new();
    for submission in &valid {
        groups
            .entry(submission.list.canonical_serialize())
            .or_default()
            .push(submission);
    }

    let winner = groups
        .iter()
        .filter(|(_, members)| members.len() > threshold_n)
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0)));

    match winner {
        Some((_, members)) => {
            let mut supporters: Vec<&ComputingSubmission> = members.clone();
            supporters.sort_by_key(|s| s.node_id);
            let supporter_ids: Vec<NodeId> = supporters.iter().map(|s| s.node_id).collect();
            let picks = supporters
                .iter()
                .map(|s| (s.node_id, s.pick_cp, s.pick_cs))
                .collect();
            let divergent = valid
                .iter()
                .filter(|s| !supporter_ids.contains(&s.node_id))
                .map(|s| s.node_id)
                .collect();
            ValidationOutcome {
                agreed: Some(AgreedList {
                    list: supporters[0].list.clone(),
                    supporters: supporter_ids,
                    picks,
                }),
                invalid_proof,
                divergent,
            }
        }
        None => ValidationOutcome {
            agreed: None,
            invalid_proof,
            divergent: Vec::new(),
        },
    }
}
