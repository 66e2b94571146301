//! Command-line front end. Exit codes: 0 success, 1 failed suite or runtime error,
//! 2 configuration error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use typematch_core::policies::horizontal::compute_protection_levels_2x2;
use typematch_core::{build_dominance_graph, evaluate_policy_exact, priority_tiers, solve_exact, MatchingInstance, Pair};

use crate::config::{EvalMode, ExperimentConfig};
use crate::export::{GraphDoc, ProtectionTableDoc, ValueTableDoc};
use crate::registry::build_policy;
use crate::simulate::simulate;
use crate::verify::verify_suite;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "typematch", version, about = "Dynamic type matching: exact oracle, policies and simulation")]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for simulation.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact DP: optimal expected value, plus exact values of the configured policies in exact mode.
    Solve,
    /// Dominance relations, priority tiers and perfect pairs.
    Analyze,
    /// Replicated simulation of the configured policies.
    Simulate {
        /// Overrides the config replication count.
        #[arg(long)]
        replications: Option<u64>,
    },
    /// Runs one verification suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Protection table of a 2x2 instance.
    Protect,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::UnknownSuite(_) | HarnessError::UnknownPolicy(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn load(cli: &Cli) -> Result<(ExperimentConfig, MatchingInstance), Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let inst = cfg.build_instance().map_err(|e| Failure::Config(e.to_string()))?;
    Ok((cfg, inst))
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(io),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(io),
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn pair(p: &Pair) -> String {
    format!("({},{})", p.i, p.j)
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    match &cli.command {
        Command::Solve => {
            let (cfg, inst) = load(cli)?;
            let table = solve_exact(&inst).map_err(HarnessError::from)?;
            if cli.format == Some(Format::Json) {
                emit(cli, &json(&ValueTableDoc::from_table(&table))?)?;
                return Ok(0);
            }
            let mut text = format!("optimal\t{}\n", table.expected_value());
            if cfg.mode == EvalMode::Exact {
                for name in &cfg.policies {
                    let policy = build_policy(&inst, name, cfg.sample_count, cfg.seed)?;
                    let v = evaluate_policy_exact(&inst, policy.as_ref()).map_err(HarnessError::from)?;
                    text.push_str(&format!("{name}\t{v}\n"));
                }
            }
            emit(cli, &text)?;
        }
        Command::Analyze => {
            let (_, inst) = load(cli)?;
            let graph = build_dominance_graph(&inst);
            let doc = GraphDoc::from_graph(&inst, &graph);
            match cli.format {
                Some(Format::Json) => emit(cli, &json(&doc)?)?,
                Some(Format::Csv) => emit(cli, &doc.edge_list_csv()?)?,
                None => {
                    let mut text = format!("strong_valid: {}\n", graph.strong_valid);
                    for (a, b) in &graph.weak_oriented {
                        text.push_str(&format!("weak {} > {}\n", pair(a), pair(b)));
                    }
                    for (a, b) in &graph.strong_oriented {
                        text.push_str(&format!("strong {} > {}\n", pair(a), pair(b)));
                    }
                    match priority_tiers(&graph) {
                        Ok(tiers) => {
                            for (k, tier) in tiers.tiers.iter().enumerate() {
                                let names: Vec<String> = tier.iter().map(pair).collect();
                                text.push_str(&format!("tier {k}: {}\n", names.join(" ")));
                            }
                        }
                        Err(e) => text.push_str(&format!("tiers: {e}\n")),
                    }
                    let perfect: Vec<String> = doc.perfect_pairs.iter().map(|p| format!("({},{})", p[0], p[1])).collect();
                    text.push_str(&format!("perfect pairs: {}\n", perfect.join(" ")));
                    emit(cli, &text)?;
                }
            }
        }
        Command::Simulate { replications } => {
            let (cfg, inst) = load(cli)?;
            let policies = cfg
                .policies
                .iter()
                .map(|name| build_policy(&inst, name, cfg.sample_count, cfg.seed))
                .collect::<Result<Vec<_>, _>>()?;
            let reps = replications.unwrap_or(cfg.replications as u64);
            let report = simulate(&inst, &policies, reps, cfg.seed, cli.workers)?;
            let text = match cli.format {
                Some(Format::Json) => json(&report)?,
                _ => report.to_csv()?,
            };
            match (&cli.out, &cfg.output) {
                (None, Some(path)) => std::fs::write(path, text).map_err(|e| Failure::Runtime(e.to_string()))?,
                _ => emit(cli, &text)?,
            }
        }
        Command::Verify { suite, trials } => {
            let report = verify_suite(suite, *trials, cli.seed.unwrap_or(0))?;
            let text = match cli.format {
                Some(Format::Json) => json(&report)?,
                _ => {
                    let mut text = format!(
                        "{}: {} ({} trials, seed {}, {} failures)\n",
                        report.suite,
                        if report.passed { "pass" } else { "FAIL" },
                        report.trials,
                        report.seed,
                        report.failures.len()
                    );
                    for (k, v) in &report.metrics {
                        text.push_str(&format!("  {k} = {v}\n"));
                    }
                    for f in &report.failures {
                        text.push_str(&format!("  trial {} (seed {}): {}\n", f.trial, f.seed, f.detail));
                    }
                    text
                }
            };
            emit(cli, &text)?;
            return Ok(if report.passed { 0 } else { 1 });
        }
        Command::Protect => {
            let (_, inst) = load(cli)?;
            let table = compute_protection_levels_2x2(&inst).map_err(|e| Failure::Config(e.to_string()))?;
            let doc = ProtectionTableDoc::from_table(&table);
            match cli.format {
                Some(Format::Csv) => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    for row in &doc.entries {
                        w.serialize(row).map_err(HarnessError::from)?;
                    }
                    let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
                    emit(cli, &String::from_utf8_lossy(&bytes))?;
                }
                _ => emit(cli, &json(&doc)?)?,
            }
        }
    }
    Ok(0)
}
