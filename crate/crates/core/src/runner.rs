//! Scenario replay and solver benchmarking: timed failure events against a
//! network, one cascade round per millisecond, with the contingency list
//! recomputed at every tick on the pruned view of the network.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{EntityId, EvaluationMode};
use crate::cascade::{
    apply_self_update, CascadeError, CascadeSim, DamageReport, FailureEvent, Objective, StateTable,
};
use crate::graph::{build_graph_abstraction, ModelError};
use crate::network::JointNetwork;
use crate::solver::{
    binomial, eligible_candidates, isolation_candidates, solve_with_stats, ContingencyList,
    ContingencyQuery, SolveError, SolverKind,
};

/// A parsed `.scn` file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub network_path: String,
    pub mode: EvaluationMode,
    pub k: u32,
    pub solver: SolverKind,
    pub objective: Objective,
    pub events: Vec<FailureEvent>,
    /// Inclusive query window in milliseconds.
    pub query: (u64, u64),
}

/// The contingency list observed at one millisecond of the timeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineRecord {
    pub t_ms: u64,
    pub sets: Vec<BTreeSet<EntityId>>,
    pub set_count: usize,
    /// Damage of the solver's list; absent when the query was infeasible on
    /// the shrunken network.
    pub damage: Option<DamageReport>,
    pub candidates_evaluated: u64,
    pub wall_ns: u64,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Replays a scenario with the real clock.
pub fn run_scenario(
    scenario: &Scenario,
    net: &JointNetwork,
) -> Result<(Vec<TimelineRecord>, Vec<String>), RunError> {
    let start = Instant::now();
    run_scenario_with_clock(scenario, net, &mut move || {
        start.elapsed().as_nanos() as u64
    })
}

/// Replays a scenario against an injectable nanosecond clock, so identical
/// scenarios can produce byte-identical reports under test.
///
/// Timeline semantics: the record at the window start is the pre-event list.
/// Each tick `t` then clamps the entities of events at `t`, advances one
/// synchronous cascade round on the baseline network (failed entities keep
/// contributing state 0 by substitution), recomputes the list on the network
/// pruned of everything failed so far, applies the isolation rules, and
/// emits the record for `t + 1`.
pub fn run_scenario_with_clock(
    scenario: &Scenario,
    net: &JointNetwork,
    clock: &mut dyn FnMut() -> u64,
) -> Result<(Vec<TimelineRecord>, Vec<String>), RunError> {
    let (t0, t1) = scenario.query;
    let query = ContingencyQuery {
        k: scenario.k as usize,
        s: None,
        mode: scenario.mode,
        objective: scenario.objective,
        scope: crate::solver::CandidateScope::NodesOnly,
    };
    let mut warnings = Vec::new();
    for event in &scenario.events {
        if event.time_ms < t0 || event.time_ms >= t1 {
            warnings.push(format!(
                "event at t={} ms falls outside the observable window [{t0}, {t1}) and is ignored",
                event.time_ms
            ));
        }
        for id in &event.entity_ids {
            if !net.contains(id) {
                warnings.push(format!("event names undeclared entity {id}"));
            }
        }
    }

    let sim = CascadeSim::new(net, scenario.mode)?;
    let mut baseline_graph = build_graph_abstraction(net)?;
    baseline_graph.classify_base_colors(net);
    let baseline_ids: BTreeSet<EntityId> = net.entities.keys().cloned().collect();

    let solve_view = |view: &JointNetwork,
                      clock: &mut dyn FnMut() -> u64|
     -> Result<(Option<ContingencyList>, u64, u64), RunError> {
        let before = clock();
        let outcome = solve_with_stats(view, &query, scenario.solver);
        let wall = clock().saturating_sub(before);
        match outcome {
            Ok((list, stats)) => Ok((Some(list), stats.candidates_evaluated, wall)),
            Err(e) if e.is_infeasible() => Ok((None, 0, wall)),
            Err(e) => Err(e.into()),
        }
    };

    let mut records = Vec::new();
    let mut additions: Vec<EntityId> = Vec::new();

    // Window start: the pre-event list.
    let (list0, candidates0, wall0) = solve_view(net, clock)?;
    records.push(compose_record(
        t0,
        &list0,
        &additions,
        scenario.k,
        candidates0,
        wall0,
    ));

    let mut states = StateTable::all_full(net);
    let mut clamp: BTreeSet<EntityId> = BTreeSet::new();

    for t in t0..t1 {
        for event in scenario.events.iter().filter(|e| e.time_ms == t) {
            for id in &event.entity_ids {
                match states.get(id) {
                    Some(v) if !v.is_failed() => {
                        clamp.insert(id.clone());
                    }
                    Some(_) => warnings.push(format!(
                        "event at t={t} ms names already-failed entity {id}; ignored"
                    )),
                    None => {} // undeclared; warned above
                }
            }
        }

        states = sim.step_table(&states, &clamp)?;
        let failed_now = states.failed_ids();
        let view = apply_self_update(net, &failed_now);
        let (list, candidates, wall) = solve_view(&view, clock)?;

        let all_failed: BTreeSet<EntityId> = baseline_ids
            .iter()
            .filter(|id| !view.contains(id))
            .cloned()
            .collect();
        if !all_failed.is_empty() {
            let live: BTreeSet<EntityId> = view.entities.keys().cloned().collect();
            let list_entities: BTreeSet<EntityId> = list
                .iter()
                .flat_map(|l| l.best_sets.iter().flatten().cloned())
                .collect();
            let already: BTreeSet<EntityId> = additions.iter().cloned().collect();
            additions.extend(isolation_candidates(
                &baseline_graph,
                &live,
                &all_failed,
                &list_entities,
                &already,
            ));
        }

        records.push(compose_record(
            t + 1,
            &list,
            &additions,
            scenario.k,
            candidates,
            wall,
        ));
    }
    Ok((records, warnings))
}

/// Solver sets first, then (for k=1 queries) the isolation singletons.
fn compose_record(
    t_ms: u64,
    list: &Option<ContingencyList>,
    additions: &[EntityId],
    k: u32,
    candidates_evaluated: u64,
    wall_ns: u64,
) -> TimelineRecord {
    let mut sets: Vec<BTreeSet<EntityId>> = list
        .iter()
        .flat_map(|l| l.best_sets.iter().cloned())
        .collect();
    if k == 1 {
        for id in additions {
            let single = BTreeSet::from([id.clone()]);
            if !sets.contains(&single) {
                sets.push(single);
            }
        }
    }
    TimelineRecord {
        t_ms,
        set_count: sets.len(),
        sets,
        damage: list.as_ref().map(|l| l.damage),
        candidates_evaluated,
        wall_ns,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Renders timeline records. CSV emits one row per set with the columns
/// `t_ms,set_index,members,failed_count,state_deficit,candidates,wall_ns`;
/// JSON mirrors the record structure. Output is byte-deterministic for
/// identical records.
pub fn emit_report(records: &[TimelineRecord], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(records).expect("records serialize"),
        ReportFormat::Csv => {
            let mut out = String::from(
                "t_ms,set_index,members,failed_count,state_deficit,candidates,wall_ns\n",
            );
            for record in records {
                for (index, set) in record.sets.iter().enumerate() {
                    let members = set
                        .iter()
                        .map(EntityId::as_str)
                        .collect::<Vec<_>>()
                        .join(" ");
                    let (failed, deficit) = match &record.damage {
                        Some(d) => (d.failed_count.to_string(), d.state_deficit.to_string()),
                        None => (String::new(), String::new()),
                    };
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        record.t_ms,
                        index,
                        members,
                        failed,
                        deficit,
                        record.candidates_evaluated,
                        record.wall_ns
                    ));
                }
            }
            out
        }
    }
}

/// Reads back a JSON report.
pub fn read_report_json(text: &str) -> Result<Vec<TimelineRecord>, serde_json::Error> {
    serde_json::from_str(text)
}

/// One solver's result in a side-by-side comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverRun {
    pub list: ContingencyList,
    pub wall_ns: u64,
    pub candidates_evaluated: u64,
}

/// Exact-versus-heuristic comparison on identical inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverComparison {
    /// Absent when the candidate count exceeded the cap.
    pub exact: Option<SolverRun>,
    /// The candidate count that tripped the cap, when `exact` was skipped.
    pub exact_skipped_candidates: Option<u64>,
    pub heuristic: SolverRun,
    /// (exact - heuristic) on the two damage dimensions.
    pub gap: Option<(i64, i64)>,
}

/// Runs both solvers on the same query. The exact solver is skipped (not
/// failed) when its subset count exceeds `cap`.
pub fn bench_solvers(
    net: &JointNetwork,
    k: usize,
    mode: EvaluationMode,
    objective: Objective,
    cap: u64,
) -> Result<SolverComparison, SolveError> {
    let query = ContingencyQuery {
        k,
        s: None,
        mode,
        objective,
        scope: crate::solver::CandidateScope::NodesOnly,
    };

    let run = |kind: SolverKind| -> Result<SolverRun, SolveError> {
        let before = Instant::now();
        let (list, stats) = solve_with_stats(net, &query, kind)?;
        Ok(SolverRun {
            list,
            wall_ns: before.elapsed().as_nanos() as u64,
            candidates_evaluated: stats.candidates_evaluated,
        })
    };

    let heuristic = run(SolverKind::Heuristic)?;
    let exact_candidates = binomial(eligible_candidates(net, query.scope).len(), k);
    if exact_candidates > cap {
        return Ok(SolverComparison {
            exact: None,
            exact_skipped_candidates: Some(exact_candidates),
            heuristic,
            gap: None,
        });
    }
    let exact = run(SolverKind::Exact)?;
    let gap = (
        exact.list.damage.failed_count as i64 - heuristic.list.damage.failed_count as i64,
        exact.list.damage.state_deficit as i64 - heuristic.list.damage.state_deficit as i64,
    );
    Ok(SolverComparison {
        exact: Some(exact),
        exact_skipped_candidates: None,
        heuristic,
        gap: Some(gap),
    })
}
