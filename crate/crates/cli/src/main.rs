//! `pocsim`: run Proof-of-Contribution trading simulations and write the
//! report tables behind the evaluation figures.

mod reports;
mod scenarios;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use poc_core::simnet::{run, ConsensusMode, ScenarioConfig, SimError};
use poc_core::stats;

use reports::{ReportKind, RunOutputs};

const OUTPUT_DIR_ENV: &str = "POCSIM_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "pocsim",
    version,
    about = "Proof-of-Contribution microgrid trading simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenarios.
    Scenarios,
    /// Run a scenario and write its report tables.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario name (see `pocsim scenarios`).
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Path to a JSON scenario configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to $POCSIM_OUTPUT_DIR or ./pocsim-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of consensus rounds.
    #[arg(long)]
    rounds: Option<u64>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the participant count.
    #[arg(long)]
    node_count: Option<u32>,
    /// Override the consensus mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Report tables to write; defaults to the scenario's own selection.
    #[arg(long = "report", value_enum)]
    reports: Vec<ReportKind>,
    /// Run this many consecutive seeds, one output directory each.
    #[arg(long)]
    sweep: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Poc,
    Pow,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Invariant(String),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Invariant(msg) => write!(f, "{msg}"),
            CliError::Io(err) => write!(f, "{err}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err)
    }
}

impl From<SimError> for CliError {
    fn from(err: SimError) -> Self {
        match err {
            SimError::Invariant(msg) => CliError::Invariant(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Scenarios => {
            list_scenarios();
            Ok(())
        }
        Command::Run(args) => run_command(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn list_scenarios() {
    for scenario in scenarios::catalogue() {
        println!("{:<8} {}", scenario.name, scenario.description);
    }
}

fn resolve(args: &RunArgs) -> Result<(String, ScenarioConfig, Vec<ReportKind>), CliError> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "config".into());
        let default_reports = vec![
            ReportKind::ProposerDistribution,
            ReportKind::ElectionCounts,
            ReportKind::WeightTrace,
        ];
        return Ok((label, config, default_reports));
    }
    if let Some(name) = &args.scenario {
        let scenario = scenarios::find(name).ok_or_else(|| {
            let names: Vec<&str> = scenarios::catalogue().iter().map(|s| s.name).collect();
            CliError::Config(format!(
                "unknown scenario `{name}`; built-ins: {}",
                names.join(", ")
            ))
        })?;
        return Ok((scenario.name.to_string(), scenario.config, scenario.reports));
    }
    Err(CliError::Config(
        "one of --scenario or --config is required".into(),
    ))
}

fn run_command(args: RunArgs) -> Result<(), CliError> {
    let (label, mut config, mut report_kinds) = resolve(&args)?;
    if let Some(rounds) = args.rounds {
        config.rounds = rounds;
    }
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Some(node_count) = args.node_count {
        config.node_count = node_count;
    }
    if let Some(mode) = args.mode {
        config.consensus_mode = match mode {
            ModeArg::Poc => ConsensusMode::Poc,
            ModeArg::Pow => ConsensusMode::Pow,
        };
    }
    if !args.reports.is_empty() {
        report_kinds = args.reports.clone();
    }

    let out_root = args
        .out
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("pocsim-out"));
    let sweep = args.sweep.unwrap_or(1).max(1);

    for offset in 0..sweep {
        let mut cfg = config.clone();
        cfg.rng_seed = config.rng_seed + offset;
        let dir = if sweep == 1 {
            out_root.clone()
        } else {
            out_root.join(format!("seed-{}", cfg.rng_seed))
        };
        std::fs::create_dir_all(&dir)?;
        let outputs = execute(cfg, &report_kinds)?;
        let mut written = Vec::new();
        for kind in &report_kinds {
            written.push(reports::write(*kind, &outputs, &dir)?);
        }
        let summary_path = dir.join("summary.json");
        std::fs::write(&summary_path, outputs.main.to_json())?;
        written.push(summary_path);
        if !outputs.main.chain_records.is_empty() {
            let chain_path = dir.join("chain.jsonl");
            std::fs::write(&chain_path, &outputs.main.chain_records)?;
            written.push(chain_path);
        }
        if !outputs.main.final_contribution_list.is_empty() {
            let list_path = dir.join("contribution_list.txt");
            std::fs::write(&list_path, &outputs.main.final_contribution_list)?;
            written.push(list_path);
        }
        print_summary(&label, &outputs, &written);
    }
    Ok(())
}

/// Runs the scenario; comparison reports get a PoC main run plus a PoW
/// companion at the same seed.
fn execute(config: ScenarioConfig, kinds: &[ReportKind]) -> Result<RunOutputs, CliError> {
    let needs_both = kinds.iter().any(|k| k.needs_pow());
    if needs_both {
        let poc_config = ScenarioConfig {
            consensus_mode: ConsensusMode::Poc,
            ..config.clone()
        };
        let pow_config = ScenarioConfig {
            consensus_mode: ConsensusMode::Pow,
            ..config.clone()
        };
        let main = run(&poc_config)?;
        let pow = run(&pow_config)?;
        Ok(RunOutputs {
            config,
            main,
            pow: Some(pow),
        })
    } else {
        let main = run(&config)?;
        Ok(RunOutputs {
            config,
            main,
            pow: None,
        })
    }
}

fn print_summary(label: &str, outputs: &RunOutputs, written: &[PathBuf]) {
    let metrics = &outputs.main;
    println!(
        "scenario {label} seed {}: {} rounds completed, {} flags raised, {} fallback rounds, {} priority violations",
        outputs.config.rng_seed,
        metrics.rounds_completed,
        metrics.flags.len(),
        metrics.fallback_rounds,
        metrics.priority_violations,
    );
    if metrics.mode == ConsensusMode::Poc && metrics.node_count >= 2 {
        let counts = metrics.proposer_counts();
        let gof = stats::chi_square_uniform(&counts);
        println!(
            "  proposer fairness: chi2={:.3} (dof {}), p={:.4}",
            gof.statistic, gof.degrees_of_freedom, gof.p_value
        );
    }
    for path in written {
        println!("  wrote {}", path.display());
    }
}
