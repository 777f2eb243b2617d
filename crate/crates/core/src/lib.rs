//! Modeling and analysis of interdependent power-communication networks.
//!
//! The crate provides:
//!
//! - a multi-valued Boolean algebra for interdependency relations (IDRs),
//!   with a three-valued mode (operational levels 0/1/2 under min-AND,
//!   max-OR and new-XOR) and a binary mode (0/2 under min-AND and max-OR);
//! - a joint network model with power, communication and coupling layers,
//!   plain-text formats for networks and scenarios, and lossless canonical
//!   serialization;
//! - a synchronous-round cascade engine that propagates failures to steady
//!   state and prunes failed entities between steady states;
//! - K-contingency solvers: exhaustive subset enumeration and a
//!   graph-coloring heuristic, plus an event-driven self-updating engine;
//! - a scenario runner producing per-millisecond contingency timelines and
//!   solver benchmarks.
//!
//! Candidate evaluation parallelizes via rayon when the default `parallel`
//! feature is enabled; results are identical with the feature disabled.

pub mod algebra;
pub mod cascade;
pub mod dsl;
pub mod fuzz;
pub mod graph;
pub mod network;
pub mod runner;
pub mod samples;
pub mod solver;

pub use algebra::{EntityId, EvaluationMode, IdrExpression, StateValue};
pub use cascade::{
    apply_self_update, damage_of, run_cascade, run_cascade_from, step_once, CascadeTrace,
    DamageReport, FailureEvent, Objective, StateTable,
};
pub use graph::{build_graph_abstraction, Color, GraphAbstraction};
pub use network::{EdgeClass, EntityKind, JointNetwork, ValidationIssue};
pub use runner::{
    bench_solvers, emit_report, run_scenario, ReportFormat, Scenario, TimelineRecord,
};
pub use solver::{
    decide_k_s, exact_k_list, heuristic_k_list, ContingencyList, ContingencyQuery, EngineState,
    SolverKind,
};
