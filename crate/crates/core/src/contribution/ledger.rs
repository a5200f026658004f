//! The per-node contribution ledger.
//!
//! Single writer per round: the simulation driver records each round's
//! activity once, after which reads are unrestricted. Flagged nodes stop
//! accruing and disappear from built lists.

use std::collections::{BTreeMap, BTreeSet};

use crate::types::NodeId;
use crate::vrf::PublicKey;

use super::{
    consensus_contribution, energy_contribution, reset_contribution, total_contribution,
    ConsensusService, ContributionEntry, ContributionError, ContributionList, ContributionParams,
    GenerationReport, HistoryRecord, OnlineSession, TradeRecord,
};

/// Everything one node did in one round that earns contribution.
#[derive(Clone, Debug, Default)]
pub struct RoundActivity {
    pub generation: GenerationReport,
    pub trades: Vec<TradeRecord>,
    pub session: Option<OnlineSession>,
    pub service: Option<ConsensusService>,
}

/// The CE/CC split credited for one node in one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundAccrual {
    pub ce: f64,
    pub cc: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct ContributionLedger {
    entries: BTreeMap<NodeId, ContributionEntry>,
    params: ContributionParams,
}

impl ContributionLedger {
    pub fn new(params: ContributionParams) -> Self {
        ContributionLedger {
            entries: BTreeMap::new(),
            params,
        }
    }

    pub fn params(&self) -> &ContributionParams {
        &self.params
    }

    pub fn register(&mut self, node_id: NodeId, pk: PublicKey) {
        self.entries
            .entry(node_id)
            .or_insert_with(|| ContributionEntry::new(node_id, pk));
    }

    pub fn entry(&self, node_id: NodeId) -> Option<&ContributionEntry> {
        self.entries.get(&node_id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.keys().copied()
    }

    /// Credits a node with one round of activity and refreshes its weight.
    pub fn accrue_round(
        &mut self,
        node_id: NodeId,
        activity: &RoundActivity,
    ) -> Result<RoundAccrual, ContributionError> {
        let params = self.params;
        let ce = energy_contribution(
            &activity.generation,
            &activity.trades,
            activity.session.as_ref(),
            &params,
        )?;
        let cc = activity
            .service
            .as_ref()
            .map(|service| consensus_contribution(service, &params))
            .unwrap_or(0.0);
        let total = total_contribution(ce, cc);

        let entry = self
            .entries
            .get_mut(&node_id)
            .ok_or(ContributionError::UnknownNode(node_id))?;
        entry.value += total;
        entry.ce_value += ce;
        entry.history.push(HistoryRecord::Round(total));
        entry.recompute_weight(&params);
        Ok(RoundAccrual { ce, cc, total })
    }

    /// Applies the elected proposer's contribution reset.
    pub fn reset(&mut self, node_id: NodeId) -> Result<(), ContributionError> {
        let params = self.params;
        let entry = self
            .entries
            .get_mut(&node_id)
            .ok_or(ContributionError::UnknownNode(node_id))?;
        reset_contribution(entry, &params);
        Ok(())
    }

    /// Builds the descending contribution list, skipping flagged nodes.
    pub fn build_list(&self, flagged: &BTreeSet<NodeId>) -> ContributionList {
        let entries = self
            .entries
            .values()
            .filter(|entry| !flagged.contains(&entry.node_id))
            .cloned()
            .collect();
        ContributionList::from_entries(entries)
    }
}
