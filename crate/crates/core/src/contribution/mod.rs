//! Contribution accounting: per-round contribution values, node weights,
//! the per-node ledger and the descending contribution list.
//!
//! A node's contribution splits into the energy-trading component CE
//! (generation + trade quality + online time), which is public, and the
//! consensus component CC (committee service rewards), which only consensus
//! participants learn. Selection weight is the reciprocal of the population
//! standard deviation of the node's per-round history, so steady
//! participation: not raw volume: earns selection probability.

mod ledger;

pub use ledger::{ContributionLedger, RoundAccrual, RoundActivity};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{NodeId, Tick};
use crate::vrf::PublicKey;

/// Weight assigned to a node before it has any per-round history.
pub const INITIAL_WEIGHT: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum ContributionError {
    #[error("device output must be non-negative, got {0}")]
    NegativeDeviceOutput(f64),
    #[error("contracted energy must be positive, got {0}")]
    NonPositiveOrderEnergy(f64),
    #[error("delivered energy must be non-negative, got {0}")]
    NegativeDeliveredEnergy(f64),
    #[error("trade records span multiple rounds ({0} and {1})")]
    MixedRounds(u64, u64),
    #[error("trade ordinals must be 1..=n without gaps or duplicates")]
    BadOrdinals,
    #[error("session ends ({t_off}) before it starts ({t_on})")]
    SessionOrder { t_on: Tick, t_off: Tick },
    #[error("weight requires a non-empty history")]
    EmptyHistory,
    #[error("invalid parameters: {0}")]
    BadParams(&'static str),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// Reward coefficients for the contribution components plus the positive
/// lower bound used when a weight denominator would otherwise vanish.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ContributionParams {
    /// Contribution per kW generated.
    pub alpha1: f64,
    /// Contribution per completed trade at full quality.
    pub alpha2: f64,
    /// Contribution per tick of stable online time.
    pub alpha3: f64,
    /// Per-round reward for serving as a computing node.
    pub alpha4: f64,
    /// Reward per packaged transaction for a consensus candidate.
    pub alpha5: f64,
    /// Positive floor for weight denominators.
    pub epsilon: f64,
}

impl Default for ContributionParams {
    fn default() -> Self {
        ContributionParams {
            alpha1: 1.0,
            alpha2: 10.0,
            alpha3: 0.01,
            alpha4: 1.0,
            alpha5: 0.2,
            epsilon: 1e-6,
        }
    }
}

impl ContributionParams {
    pub fn validate(&self) -> Result<(), ContributionError> {
        let alphas = [
            self.alpha1,
            self.alpha2,
            self.alpha3,
            self.alpha4,
            self.alpha5,
        ];
        if alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(ContributionError::BadParams("alphas must be >= 0"));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(ContributionError::BadParams("epsilon must be > 0"));
        }
        Ok(())
    }
}

/// Per-device power outputs (kW) reported by one node for one round.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenerationReport {
    pub device_outputs: Vec<f64>,
}

impl GenerationReport {
    pub fn new(device_outputs: Vec<f64>) -> Self {
        GenerationReport { device_outputs }
    }
}

/// One settled trade attributed to the seller that delivered it.
#[derive(Clone, Debug, PartialEq)]
pub struct TradeRecord {
    pub order_id: u64,
    /// Contracted energy, strictly positive.
    pub p_order: f64,
    /// Delivered energy, non-negative; may exceed `p_order`.
    pub p_real: f64,
    /// Consensus round in which the trade settled.
    pub round_index: u64,
    /// 1-based position among the seller's trades within that round.
    pub intra_round_ordinal: u32,
}

/// One online session in simulation ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OnlineSession {
    pub t_on: Tick,
    pub t_off: Tick,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ServiceRole {
    Computing,
    Consensus,
}

/// Consensus-task service performed by a node in one round. Exactly one of
/// the two reward terms is active: computing nodes are paid per network
/// size, candidates per packaged transaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConsensusService {
    role: ServiceRole,
    packaged_tx_count: u64,
    network_size: u64,
}

impl ConsensusService {
    pub fn computing(network_size: u64) -> Self {
        ConsensusService {
            role: ServiceRole::Computing,
            packaged_tx_count: 0,
            network_size,
        }
    }

    pub fn consensus(packaged_tx_count: u64, network_size: u64) -> Self {
        ConsensusService {
            role: ServiceRole::Consensus,
            packaged_tx_count,
            network_size,
        }
    }

    pub fn role(&self) -> ServiceRole {
        self.role
    }
}

/// Power generation contribution: the alpha1-weighted sum of device outputs.
pub fn power_generation_contribution(
    report: &GenerationReport,
    params: &ContributionParams,
) -> Result<f64, ContributionError> {
    let mut total = 0.0;
    for &output in &report.device_outputs {
        if !output.is_finite() || output < 0.0 {
            return Err(ContributionError::NegativeDeviceOutput(output));
        }
        total += params.alpha1 * output;
    }
    Ok(total)
}

/// Transaction quality: delivered over contracted energy, clamped to [0, 1].
/// Full (or over-) delivery scores 1. The unclamped ratio stays available to
/// callers that keep the raw trade record.
pub fn transaction_quality(p_order: f64, p_real: f64) -> Result<f64, ContributionError> {
    if !p_order.is_finite() || p_order <= 0.0 {
        return Err(ContributionError::NonPositiveOrderEnergy(p_order));
    }
    if !p_real.is_finite() || p_real < 0.0 {
        return Err(ContributionError::NegativeDeliveredEnergy(p_real));
    }
    Ok((p_real / p_order).min(1.0))
}

/// Energy trading contribution with diminishing returns: the k-th trade in a
/// round earns `alpha2 * TQ_k / k^2`, so spamming small trades is pointless.
///
/// All records must share one round and carry ordinals 1..=n with no gaps.
pub fn energy_trading_contribution(
    trades: &[TradeRecord],
    params: &ContributionParams,
) -> Result<f64, ContributionError> {
    if trades.is_empty() {
        return Ok(0.0);
    }
    let round = trades[0].round_index;
    let mut seen = vec![false; trades.len()];
    for trade in trades {
        if trade.round_index != round {
            return Err(ContributionError::MixedRounds(round, trade.round_index));
        }
        let ordinal = trade.intra_round_ordinal as usize;
        if ordinal < 1 || ordinal > trades.len() || seen[ordinal - 1] {
            return Err(ContributionError::BadOrdinals);
        }
        seen[ordinal - 1] = true;
    }
    let mut total = 0.0;
    for trade in trades {
        let tq = transaction_quality(trade.p_order, trade.p_real)?;
        let k = trade.intra_round_ordinal as f64;
        total += params.alpha2 * tq / (k * k);
    }
    Ok(total)
}

/// Stable online time contribution: alpha3 per tick spent online.
pub fn stable_online_contribution(
    session: &OnlineSession,
    params: &ContributionParams,
) -> Result<f64, ContributionError> {
    if session.t_off < session.t_on {
        return Err(ContributionError::SessionOrder {
            t_on: session.t_on,
            t_off: session.t_off,
        });
    }
    Ok(params.alpha3 * (session.t_off - session.t_on) as f64)
}

/// Energy trading contribution CE = PGC + ETC + SOT.
pub fn energy_contribution(
    report: &GenerationReport,
    trades: &[TradeRecord],
    session: Option<&OnlineSession>,
    params: &ContributionParams,
) -> Result<f64, ContributionError> {
    let pgc = power_generation_contribution(report, params)?;
    let etc = energy_trading_contribution(trades, params)?;
    let sot = match session {
        Some(session) => stable_online_contribution(session, params)?,
        None => 0.0,
    };
    Ok(pgc + etc + sot)
}

/// Consensus contribution CC: computing nodes earn `network_size * alpha4`,
/// candidates earn `packaged_tx_count * alpha5`.
pub fn consensus_contribution(service: &ConsensusService, params: &ContributionParams) -> f64 {
    match service.role {
        ServiceRole::Computing => service.network_size as f64 * params.alpha4,
        ServiceRole::Consensus => service.packaged_tx_count as f64 * params.alpha5,
    }
}

/// Total per-round contribution N_C = CE + CC.
pub fn total_contribution(ce: f64, cc: f64) -> f64 {
    ce + cc
}

/// Selection weight from a node's per-round contribution history.
///
/// With one recorded round the weight is the reciprocal of that round's
/// contribution; with more it is the reciprocal of the population standard
/// deviation. Degenerate denominators (zero contribution, constant history)
/// are floored at `epsilon` to keep weights finite.
pub fn node_weight(history: &[f64], params: &ContributionParams) -> Result<f64, ContributionError> {
    if history.is_empty() {
        return Err(ContributionError::EmptyHistory);
    }
    let denominator = if history.len() == 1 {
        history[0]
    } else {
        let n = history.len() as f64;
        let mu = history.iter().sum::<f64>() / n;
        let var = history.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
        var.sqrt()
    };
    Ok(1.0 / denominator.max(params.epsilon))
}

/// One entry of a node's contribution history: a per-round total, or a
/// marker recording how much value a proposer reset wiped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HistoryRecord {
    Round(f64),
    Reset(f64),
}

/// One row of the contribution list: id, public key, accumulated value,
/// history and selection weight. `ce_value` keeps the public CE component
/// separate so the market can rank by CE while consensus ranks by total.
#[derive(Clone, Debug, PartialEq)]
pub struct ContributionEntry {
    pub node_id: NodeId,
    pub pk: PublicKey,
    pub value: f64,
    pub ce_value: f64,
    pub history: Vec<HistoryRecord>,
    pub weight: f64,
}

impl ContributionEntry {
    pub fn new(node_id: NodeId, pk: PublicKey) -> Self {
        ContributionEntry {
            node_id,
            pk,
            value: 0.0,
            ce_value: 0.0,
            history: Vec::new(),
            weight: INITIAL_WEIGHT,
        }
    }

    /// Per-round contribution values, skipping reset markers.
    pub fn round_history(&self) -> Vec<f64> {
        self.history
            .iter()
            .filter_map(|record| match record {
                HistoryRecord::Round(v) => Some(*v),
                HistoryRecord::Reset(_) => None,
            })
            .collect()
    }

    fn recompute_weight(&mut self, params: &ContributionParams) {
        let rounds = self.round_history();
        self.weight = if rounds.is_empty() {
            INITIAL_WEIGHT
        } else {
            node_weight(&rounds, params).expect("non-empty history")
        };
    }

    /// Canonical line form `node_id,pk_hex,value,weight,history_csv`.
    pub fn canonical_line(&self) -> String {
        let history = self
            .history
            .iter()
            .map(|record| match record {
                HistoryRecord::Round(v) => format_value(*v),
                HistoryRecord::Reset(v) => format!("R{}", format_value(*v)),
            })
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{},{},{},{},{}",
            self.node_id.0,
            self.pk.to_hex(),
            format_value(self.value),
            format_value(self.weight),
            history
        )
    }
}

/// Deterministic decimal rendering used by the canonical serialization.
fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Zeroes the elected proposer's accumulated value, leaving a reset marker
/// in the history and recomputing the weight on what remains. Identity
/// fields and prior round records are untouched.
pub fn reset_contribution(entry: &mut ContributionEntry, params: &ContributionParams) {
    let wiped = entry.value;
    entry.value = 0.0;
    entry.ce_value = 0.0;
    entry.history.push(HistoryRecord::Reset(wiped));
    entry.recompute_weight(params);
}

/// The contribution list L_cb: entries in descending value order, ties
/// broken by ascending node id.
///
/// The canonical serialization is computed once per list and cached;
/// entries are immutable once the list is built.
#[derive(Clone, Debug, Default)]
pub struct ContributionList {
    entries: Vec<ContributionEntry>,
    canonical: std::sync::OnceLock<String>,
}

impl PartialEq for ContributionList {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl ContributionList {
    pub fn from_entries(mut entries: Vec<ContributionEntry>) -> Self {
        entries.sort_by(|a, b| {
            b.value
                .partial_cmp(&a.value)
                .expect("contribution values are finite")
                .then(a.node_id.cmp(&b.node_id))
        });
        ContributionList {
            entries,
            canonical: std::sync::OnceLock::new(),
        }
    }

    pub fn entries(&self) -> &[ContributionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, node_id: NodeId) -> Option<&ContributionEntry> {
        self.entries.iter().find(|e| e.node_id == node_id)
    }

    pub fn weight_of(&self, node_id: NodeId) -> Option<f64> {
        self.get(node_id).map(|e| e.weight)
    }

    pub fn ce_of(&self, node_id: NodeId) -> Option<f64> {
        self.get(node_id).map(|e| e.ce_value)
    }

    /// Node ids ranked by the public CE component, descending, ties by id.
    /// This is the market's priority order; consensus keeps the total-value
    /// order of the list itself.
    pub fn by_ce_descending(&self) -> Vec<NodeId> {
        let mut ids: Vec<(NodeId, f64)> = self
            .entries
            .iter()
            .map(|e| (e.node_id, e.ce_value))
            .collect();
        ids.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("ce values are finite")
                .then(a.0.cmp(&b.0))
        });
        ids.into_iter().map(|(id, _)| id).collect()
    }

    /// Canonical text form: one `canonical_line` per entry, newline after
    /// each. Byte equality of this form is the list-equality relation used
    /// during validation.
    pub fn canonical_serialize(&self) -> &str {
        self.canonical.get_or_init(|| {
            let mut out = String::new();
            for entry in &self.entries {
                out.push_str(&entry.canonical_line());
                out.push('\n');
            }
            out
        })
    }
}
