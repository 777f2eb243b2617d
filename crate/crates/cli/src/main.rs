//! `miim` — validate networks, run cascades, compute contingency lists,
//! replay scenarios and benchmark the solvers.
//!
//! Exit codes: 0 success, 1 diagnostics or input errors, 2 infeasible query.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use miim_core::cascade::{damage_of, run_cascade, trace_csv, trace_json};
use miim_core::dsl::{self, ParseDiagnostic};
use miim_core::network::IssueSeverity;
use miim_core::runner::{self, ReportFormat};
use miim_core::solver::{CandidateScope, ContingencyQuery, SolveError, SolverKind};
use miim_core::{EntityId, EvaluationMode, JointNetwork, Objective};

#[derive(Parser)]
#[command(
    name = "miim",
    version,
    about = "Interdependent power-communication network contingency analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Miim,
    Iim,
}

impl From<ModeArg> for EvaluationMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Miim => EvaluationMode::Miim,
            ModeArg::Iim => EvaluationMode::Iim,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exact,
    Heuristic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Failed,
    Deficit,
}

impl From<ObjectiveArg> for Objective {
    fn from(objective: ObjectiveArg) -> Self {
        match objective {
            ObjectiveArg::Failed => Objective::Failed,
            ObjectiveArg::Deficit => Objective::Deficit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a network file.
    Validate { network: PathBuf },
    /// Fail entities and cascade to steady state.
    Cascade {
        network: PathBuf,
        /// Comma-separated entity ids to fail at t=0.
        #[arg(long, value_delimiter = ',', required = true)]
        fail: Vec<String>,
        #[arg(long, value_enum, default_value = "miim")]
        mode: ModeArg,
        /// Print the per-round state trace.
        #[arg(long)]
        trace: bool,
        /// Trace format (with --trace).
        #[arg(long, value_enum, default_value = "csv")]
        trace_format: TraceFormat,
    },
    /// Compute the K-contingency list.
    List {
        network: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum)]
        solver: SolverArg,
        #[arg(long, value_enum, default_value = "miim")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "failed")]
        objective: ObjectiveArg,
        /// Admit edge-bound channel entities as candidates (exact solver).
        #[arg(long)]
        include_edge_entities: bool,
    },
    /// Decide whether some K-set fails at least S entities.
    Decide {
        network: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: u32,
        #[arg(long, value_enum, default_value = "miim")]
        mode: ModeArg,
    },
    /// Replay a scenario file into a contingency timeline.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        out: OutFormat,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out_file: Option<PathBuf>,
    },
    /// Compare the exact and heuristic solvers on one query.
    Bench {
        network: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "miim")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "failed")]
        objective: ObjectiveArg,
        /// Skip the exact solver above this many candidate subsets.
        #[arg(long, default_value_t = 1_000_000)]
        cap: u64,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn print_diagnostics(diags: &[ParseDiagnostic]) {
    for diag in diags {
        eprintln!("{diag}");
    }
}

fn load_network(path: &Path) -> Result<Option<JointNetwork>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match dsl::parse_network(&text) {
        Ok(net) => Ok(Some(net)),
        Err(diags) => {
            print_diagnostics(&diags);
            Ok(None)
        }
    }
}

fn solve_exit(err: SolveError) -> Result<ExitCode> {
    if err.is_infeasible() {
        eprintln!("infeasible: {err}");
        Ok(ExitCode::from(2))
    } else {
        Err(anyhow!(err))
    }
}

fn format_set(set: &BTreeSet<EntityId>) -> String {
    set.iter()
        .map(EntityId::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { network } => {
            let Some(net) = load_network(&network)? else {
                return Ok(ExitCode::from(1));
            };
            let issues = net.validate();
            for issue in &issues {
                println!("{issue}");
            }
            let errors = issues
                .iter()
                .filter(|i| i.severity == IssueSeverity::Error)
                .count();
            println!(
                "{}: {} entities, {} edges, {} idrs, {} error(s), {} warning(s)",
                network.display(),
                net.len(),
                net.edge_count(),
                net.idrs.len(),
                errors,
                issues.len() - errors
            );
            Ok(ExitCode::from(if errors > 0 { 1 } else { 0 }))
        }

        Command::Cascade {
            network,
            fail,
            mode,
            trace,
            trace_format,
        } => {
            let Some(net) = load_network(&network)? else {
                return Ok(ExitCode::from(1));
            };
            let failures: BTreeSet<EntityId> =
                fail.iter().map(|s| EntityId::new(s.trim())).collect();
            let result = run_cascade(&net, &failures, mode.into())?;
            if trace {
                match trace_format {
                    TraceFormat::Csv => print!("{}", trace_csv(&result)),
                    TraceFormat::Json => println!("{}", trace_json(&result)),
                }
            }
            let damage = damage_of(&result)?;
            println!(
                "steady after {} round(s): {} failed, state deficit {}",
                damage.rounds_to_steady, damage.failed_count, damage.state_deficit
            );
            let dead = result.final_table().failed_ids();
            if !dead.is_empty() {
                println!("failed entities: {}", format_set(&dead));
            }
            Ok(ExitCode::from(0))
        }

        Command::List {
            network,
            k,
            solver,
            mode,
            objective,
            include_edge_entities,
        } => {
            let Some(net) = load_network(&network)? else {
                return Ok(ExitCode::from(1));
            };
            let query = ContingencyQuery {
                k,
                s: None,
                mode: mode.into(),
                objective: objective.into(),
                scope: if include_edge_entities {
                    CandidateScope::IncludeEdgeEntities
                } else {
                    CandidateScope::NodesOnly
                },
            };
            let kind = match solver {
                SolverArg::Exact => SolverKind::Exact,
                SolverArg::Heuristic => SolverKind::Heuristic,
            };
            let (list, stats) = match miim_core::solver::solve_with_stats(&net, &query, kind) {
                Ok(ok) => ok,
                Err(err) => return solve_exit(err),
            };
            println!(
                "k={} damage: {} failed, state deficit {} ({} candidate set(s) evaluated)",
                list.k,
                list.damage.failed_count,
                list.damage.state_deficit,
                stats.candidates_evaluated
            );
            for (i, set) in list.best_sets.iter().enumerate() {
                println!("{i}: {}", format_set(set));
            }
            Ok(ExitCode::from(0))
        }

        Command::Decide {
            network,
            k,
            s,
            mode,
        } => {
            let Some(net) = load_network(&network)? else {
                return Ok(ExitCode::from(1));
            };
            let query = ContingencyQuery {
                k,
                s: Some(s),
                mode: mode.into(),
                objective: Objective::Failed,
                scope: CandidateScope::NodesOnly,
            };
            match miim_core::solver::decide_k_s(&net, &query) {
                Ok(answer) => {
                    println!("{answer}");
                    Ok(ExitCode::from(0))
                }
                Err(err) => solve_exit(err),
            }
        }

        Command::Run {
            scenario,
            out,
            out_file,
        } => {
            let text = std::fs::read_to_string(&scenario)
                .with_context(|| format!("reading {}", scenario.display()))?;
            let parsed = match dsl::parse_scenario(&text) {
                Ok(parsed) => parsed,
                Err(diags) => {
                    print_diagnostics(&diags);
                    return Ok(ExitCode::from(1));
                }
            };
            // Network paths resolve relative to the scenario file.
            let base = scenario.parent().unwrap_or(Path::new("."));
            let net_path = base.join(&parsed.network_path);
            let Some(net) = load_network(&net_path)? else {
                return Ok(ExitCode::from(1));
            };
            let (records, warnings) = runner::run_scenario(&parsed, &net)?;
            for warning in &warnings {
                eprintln!("warning: {warning}");
            }
            let format = match out {
                OutFormat::Csv => ReportFormat::Csv,
                OutFormat::Json => ReportFormat::Json,
            };
            let report = runner::emit_report(&records, format);
            match out_file {
                Some(path) => std::fs::write(&path, report)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{report}"),
            }
            Ok(ExitCode::from(0))
        }

        Command::Bench {
            network,
            k,
            mode,
            objective,
            cap,
        } => {
            let Some(net) = load_network(&network)? else {
                return Ok(ExitCode::from(1));
            };
            let comparison =
                match runner::bench_solvers(&net, k, mode.into(), objective.into(), cap) {
                    Ok(comparison) => comparison,
                    Err(err) => return solve_exit(err),
                };
            let h = &comparison.heuristic;
            println!(
                "heuristic: {} candidate(s), {} ns, damage ({}, {}), {} set(s)",
                h.candidates_evaluated,
                h.wall_ns,
                h.list.damage.failed_count,
                h.list.damage.state_deficit,
                h.list.best_sets.len()
            );
            match (&comparison.exact, comparison.exact_skipped_candidates) {
                (Some(e), _) => {
                    println!(
                        "exact:     {} candidate(s), {} ns, damage ({}, {}), {} set(s)",
                        e.candidates_evaluated,
                        e.wall_ns,
                        e.list.damage.failed_count,
                        e.list.damage.state_deficit,
                        e.list.best_sets.len()
                    );
                    let (failed_gap, deficit_gap) = comparison.gap.unwrap_or((0, 0));
                    println!("gap:       ({failed_gap} failed, {deficit_gap} deficit)");
                }
                (None, Some(skipped)) => {
                    println!("exact:     skipped ({skipped} candidate sets exceed cap {cap})");
                }
                (None, None) => unreachable!("skipped exact always records the count"),
            }
            Ok(ExitCode::from(0))
        }
    }
}
