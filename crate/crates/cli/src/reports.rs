//! Report tables: plain comma-separated text with a header row, one file
//! per selected report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

use poc_core::contribution::{energy_trading_contribution, TradeRecord};
use poc_core::simnet::{ScenarioConfig, SimulationMetrics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    ProposerDistribution,
    ElectionCounts,
    DiminishingReturns,
    WeightTrace,
    MaliciousTrace,
    BlockTimeComparison,
}

impl ReportKind {
    pub fn file_name(&self) -> &'static str {
        match self {
            ReportKind::ProposerDistribution => "proposer_distribution.csv",
            ReportKind::ElectionCounts => "election_counts.csv",
            ReportKind::DiminishingReturns => "diminishing_returns.csv",
            ReportKind::WeightTrace => "weight_trace.csv",
            ReportKind::MaliciousTrace => "malicious_trace.csv",
            ReportKind::BlockTimeComparison => "block_time_comparison.csv",
        }
    }

    /// True when the table needs a PoW companion run.
    pub fn needs_pow(&self) -> bool {
        matches!(self, ReportKind::BlockTimeComparison)
    }
}

/// Everything a report can draw on: the main run plus, for comparisons,
/// a PoW run at the same seed.
pub struct RunOutputs {
    pub config: ScenarioConfig,
    pub main: SimulationMetrics,
    pub pow: Option<SimulationMetrics>,
}

pub fn render(kind: ReportKind, outputs: &RunOutputs) -> String {
    match kind {
        ReportKind::ProposerDistribution => proposer_distribution(&outputs.main),
        ReportKind::ElectionCounts => election_counts(&outputs.main),
        ReportKind::DiminishingReturns => diminishing_returns(&outputs.config),
        ReportKind::WeightTrace => weight_trace(&outputs.main),
        ReportKind::MaliciousTrace => malicious_trace(outputs),
        ReportKind::BlockTimeComparison => block_time_comparison(outputs),
    }
}

pub fn write(
    kind: ReportKind,
    outputs: &RunOutputs,
    dir: &Path,
) -> std::io::Result<PathBuf> {
    let path = dir.join(kind.file_name());
    std::fs::write(&path, render(kind, outputs))?;
    Ok(path)
}

fn proposer_distribution(metrics: &SimulationMetrics) -> String {
    let mut out = String::from("node_id,proposer_count\n");
    for (id, count) in metrics.proposer_counts().iter().enumerate() {
        writeln!(out, "{id},{count}").expect("write to string");
    }
    out
}

fn election_counts(metrics: &SimulationMetrics) -> String {
    let mut out = String::from("node_id,proposer,computing,candidate\n");
    for id in 0..metrics.node_count {
        let counts = metrics.elections.get(&id).copied().unwrap_or_default();
        writeln!(
            out,
            "{id},{},{},{}",
            counts.proposer, counts.computing, counts.candidate
        )
        .expect("write to string");
    }
    out
}

/// Direct evaluation of the per-trade reward curve at full quality: the
/// k-th trade in a round earns alpha2 / k^2.
fn diminishing_returns(config: &ScenarioConfig) -> String {
    let mut out = String::from("k,marginal_etc,cumulative_etc\n");
    let mut trades: Vec<TradeRecord> = Vec::new();
    let mut previous = 0.0;
    for k in 1..=10u32 {
        trades.push(TradeRecord {
            order_id: k as u64,
            p_order: 1.0,
            p_real: 1.0,
            round_index: 0,
            intra_round_ordinal: k,
        });
        let cumulative =
            energy_trading_contribution(&trades, &config.contribution).expect("valid trades");
        writeln!(out, "{k},{},{}", cumulative - previous, cumulative).expect("write to string");
        previous = cumulative;
    }
    out
}

fn weight_trace(metrics: &SimulationMetrics) -> String {
    let mut out = String::from("round,node_id,value,weight,ce\n");
    for point in &metrics.weight_series {
        writeln!(
            out,
            "{},{},{},{},{}",
            point.round, point.node, point.value, point.weight, point.ce
        )
        .expect("write to string");
    }
    out
}

fn malicious_trace(outputs: &RunOutputs) -> String {
    let malicious: Vec<u32> = outputs
        .config
        .behaviors
        .iter()
        .map(|b| b.node)
        .collect();
    let mut out =
        String::from("round,proposer,new_flags,malicious_in_cp,malicious_in_cs\n");
    for trace in &outputs.main.traces {
        let proposer = trace
            .proposer
            .map(|p| p.to_string())
            .unwrap_or_else(|| "supervisor".into());
        let flags = trace
            .new_flags
            .iter()
            .map(|f| format!("{}:{}", f.node, f.cause))
            .collect::<Vec<_>>()
            .join(";");
        let in_cp = trace
            .committee_cp
            .iter()
            .filter(|id| malicious.contains(id))
            .count();
        let in_cs = trace
            .candidates_cs
            .iter()
            .filter(|id| malicious.contains(id))
            .count();
        writeln!(out, "{},{proposer},{flags},{in_cp},{in_cs}", trace.round)
            .expect("write to string");
    }
    out
}

fn block_time_comparison(outputs: &RunOutputs) -> String {
    let mut out = String::from("round,poc_events,pow_attempts\n");
    let empty = Vec::new();
    let pow_times = outputs.pow.as_ref().map(|m| &m.block_times).unwrap_or(&empty);
    let rounds = outputs.main.block_times.len().max(pow_times.len());
    for round in 0..rounds {
        let poc = outputs
            .main
            .block_times
            .get(round)
            .map(|t| t.to_string())
            .unwrap_or_default();
        let pow = pow_times
            .get(round)
            .map(|t| t.to_string())
            .unwrap_or_default();
        writeln!(out, "{round},{poc},{pow}").expect("write to string");
    }
    out
}
