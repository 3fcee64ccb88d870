//! `vradapt` — scenario runner and report generator.
//!
//! Subcommands:
//! * `run <config>` executes a configured session end to end and writes the
//!   queue-metrics, adaptation-ledger, and recommendation reports.
//! * `analyze <lambda> <mu1> <mu2> <mu3> <K>` prints the closed-form queue
//!   metrics for the three-stage server.
//! * `kb export|import|history` works the knowledge-base store directly.
//!
//! The `VRADAPT_KB` environment variable overrides the knowledge-base path
//! for every subcommand.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use vradapt_core::config::{RunOverrides, ScenarioConfig};
use vradapt_core::kb::KnowledgeBase;
use vradapt_core::monitor::AnomalyCategory;
use vradapt_core::pipeline::run_session;
use vradapt_core::queue::{mean_service_time, mm1k_analytics, StageRates};

#[derive(Parser)]
#[command(name = "vradapt", version, about = "Session anomaly adaptation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured session end to end and write reports
    Run {
        /// Path to a run config (TOML)
        config: PathBuf,
        /// Override the telemetry seed
        #[arg(long)]
        seed: Option<u64>,
        /// Disable adaptations (no-adaptation baseline)
        #[arg(long)]
        no_adaptation: bool,
        /// Override the severe-severity threshold in milliseconds
        #[arg(long, value_name = "MS")]
        severe_threshold: Option<f64>,
        /// Override the knowledge-base path
        #[arg(long, env = "VRADAPT_KB", value_name = "PATH")]
        kb: Option<PathBuf>,
    },
    /// Print closed-form M/M/1/K metrics for a three-stage server
    Analyze {
        /// Arrival rate, events/second
        lambda: f64,
        /// Stage service rates, events/second
        mu1: f64,
        mu2: f64,
        mu3: f64,
        /// System capacity (waiting + in service)
        k: usize,
    },
    /// Knowledge-base utilities
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
}

#[derive(Subcommand)]
enum KbCommand {
    /// Export the store to a CSV file
    Export {
        /// Destination CSV path
        path: PathBuf,
        /// Knowledge-base store path
        #[arg(long, env = "VRADAPT_KB")]
        kb: PathBuf,
    },
    /// Import records from a CSV file into an empty store
    Import {
        /// Source CSV path
        path: PathBuf,
        /// Knowledge-base store path
        #[arg(long, env = "VRADAPT_KB")]
        kb: PathBuf,
    },
    /// Show per-adaptation usage counts and smoothed impacts for a category
    History {
        /// Anomaly category (QoA, QoS, DoS, Intrusion)
        category: String,
        /// Knowledge-base store path
        #[arg(long, env = "VRADAPT_KB")]
        kb: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, no_adaptation, severe_threshold, kb } => {
            let mut config = ScenarioConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            config.apply_overrides(&RunOverrides {
                seed,
                no_adaptation,
                severe_threshold_ms: severe_threshold,
                kb_path: kb,
            });
            let outcome = run_session(&config).context("running session")?;
            print!("{}", outcome.reports.summary_txt);
            if !outcome.summary.ledger.is_empty() {
                println!();
                print!("{}", outcome.reports.adaptation_ledger_txt);
            }
            println!();
            print!("{}", outcome.reports.queue_metrics_txt);
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Analyze { lambda, mu1, mu2, mu3, k } => analyze(lambda, mu1, mu2, mu3, k),
        Command::Kb { command } => kb_command(command),
    }
}

fn analyze(lambda: f64, mu1: f64, mu2: f64, mu3: f64, k: usize) -> Result<()> {
    let rates = StageRates::new(mu1, mu2, mu3)?;
    let x_bar = mean_service_time(&rates);
    let mu_eff = 1.0 / x_bar;
    let a = mm1k_analytics(lambda, mu_eff, k)?;
    println!("three-stage service: x_bar = {x_bar:.6} s, mu_eff = {mu_eff:.6} /s");
    println!("M/M/1/K: lambda = {lambda:.6}, rho = {:.6}, K = {k}", a.rho);
    println!("state probabilities:");
    const SHOWN: usize = 40;
    for (n, p) in a.state_probs.iter().enumerate().take(SHOWN) {
        println!("  P{n} = {p:.6}");
    }
    if a.state_probs.len() > SHOWN {
        println!("  ... ({} more states)", a.state_probs.len() - SHOWN);
        println!("  P{k} = {:.6}", a.blocking_prob);
    }
    println!("blocking (PK)    = {:.6}", a.blocking_prob);
    println!("effective lambda = {:.6}", a.effective_lambda);
    println!("L  = {:.6}   Lq = {:.6}", a.l, a.lq);
    println!("W  = {:.6} s Wq = {:.6} s", a.w, a.wq);
    Ok(())
}

fn kb_command(command: KbCommand) -> Result<()> {
    match command {
        KbCommand::Export { path, kb } => {
            let store = KnowledgeBase::open(&kb)
                .with_context(|| format!("opening store {}", kb.display()))?;
            let count = store.export_csv(&path)?;
            println!("exported {count} records to {}", path.display());
            Ok(())
        }
        KbCommand::Import { path, kb } => {
            let mut store = KnowledgeBase::open(&kb)
                .with_context(|| format!("opening store {}", kb.display()))?;
            let count = store
                .import_csv(&path)
                .with_context(|| format!("importing {}", path.display()))?;
            println!("imported {count} records into {}", kb.display());
            Ok(())
        }
        KbCommand::History { category, kb } => {
            let category: AnomalyCategory =
                category.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
            let store = KnowledgeBase::open(&kb)
                .with_context(|| format!("opening store {}", kb.display()))?;
            let history = store.history(category);
            if history.is_empty() {
                println!("no history for {category}");
                return Ok(());
            }
            println!("{:<12} {:>6}  impact", "adaptation", "uses");
            for h in history {
                let impact = h.impact.map(|i| format!("{i:.6}")).unwrap_or_else(|| "-".into());
                println!("{:<12} {:>6}  {impact}", h.adaptation, h.uses);
            }
            Ok(())
        }
    }
}
