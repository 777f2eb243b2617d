//! K-contingency solvers: exhaustive enumeration over candidate subsets, the
//! color-guided heuristic, the K/S decision query, and the event-driven
//! self-updating engine.
//!
//! Candidate damage evaluations are pure and fan out to a thread pool when
//! the `parallel` feature is enabled; results are merged in candidate order
//! so output never depends on scheduling.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{EntityId, EvaluationMode};
use crate::cascade::{
    apply_self_update, run_cascade_from, CascadeError, CascadeSim, DamageReport, FailureEvent,
    Objective, StateTable,
};
use crate::graph::{build_graph_abstraction, Color, GraphAbstraction, ModelError};
use crate::network::{EdgeClass, JointNetwork};

/// Which entities may seed a contingency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateScope {
    /// Node entities only: edges are assumed (n-1) fault tolerant.
    NodesOnly,
    /// Node entities plus edge-bound channel entities.
    IncludeEdgeEntities,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyQuery {
    pub k: usize,
    /// Decision variant: is there a k-set failing at least `s` entities?
    pub s: Option<u32>,
    pub mode: EvaluationMode,
    pub objective: Objective,
    pub scope: CandidateScope,
}

impl ContingencyQuery {
    pub fn new(k: usize, mode: EvaluationMode) -> Self {
        ContingencyQuery {
            k,
            s: None,
            mode,
            objective: Objective::Failed,
            scope: CandidateScope::NodesOnly,
        }
    }
}

/// All tied argmax sets of size k, plus the damage they achieve. The damage
/// report carries the replay of the first set in canonical order; tied sets
/// match it on both damage dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyList {
    pub k: usize,
    pub best_sets: Vec<BTreeSet<EntityId>>,
    pub damage: DamageReport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Number of candidate failure sets whose cascade was simulated.
    pub candidates_evaluated: u64,
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("k={k} exceeds the {candidates} eligible candidate entities")]
    KTooLarge { k: usize, candidates: usize },
    #[error("the power layer has no vertices")]
    EmptyPowerLayer,
    #[error("no red vertices; the k=1 step must run first")]
    NoRedVertices,
    #[error("no candidate pairs available for k=2")]
    NoCandidatePairs,
    #[error(
        "insufficient graph for K: the working graph exhausted before enough pairs accumulated"
    )]
    InsufficientGraph,
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl SolveError {
    /// Queries that cannot be answered on this network, as opposed to bad
    /// inputs or internal failures.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            SolveError::KTooLarge { .. }
                | SolveError::EmptyPowerLayer
                | SolveError::NoRedVertices
                | SolveError::NoCandidatePairs
                | SolveError::InsufficientGraph
        )
    }
}

// ---------------------------------------------------------------------------
// Candidate evaluation (parallel seam)
// ---------------------------------------------------------------------------

#[cfg(feature = "parallel")]
fn eval_damages(sim: &CascadeSim, clamps: &[Vec<usize>]) -> Vec<DamageReport> {
    use rayon::prelude::*;
    clamps
        .par_iter()
        .map(|c| sim.damage_of_indices(c))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn eval_damages(sim: &CascadeSim, clamps: &[Vec<usize>]) -> Vec<DamageReport> {
    clamps.iter().map(|c| sim.damage_of_indices(c)).collect()
}

/// Steady-state damage for each failure set, in input order. Runs on the
/// thread pool when the `parallel` feature is enabled.
pub fn damage_for_sets(
    net: &JointNetwork,
    sets: &[BTreeSet<EntityId>],
    mode: EvaluationMode,
) -> Result<Vec<DamageReport>, CascadeError> {
    let sim = CascadeSim::new(net, mode)?;
    let clamps = sets
        .iter()
        .map(|s| sim.indices_of(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(eval_damages(&sim, &clamps))
}

/// Single-threaded twin of [`damage_for_sets`]; bitwise-identical results.
pub fn damage_for_sets_seq(
    net: &JointNetwork,
    sets: &[BTreeSet<EntityId>],
    mode: EvaluationMode,
) -> Result<Vec<DamageReport>, CascadeError> {
    let sim = CascadeSim::new(net, mode)?;
    let mut out = Vec::with_capacity(sets.len());
    for set in sets {
        out.push(sim.damage_of_indices(&sim.indices_of(set)?));
    }
    Ok(out)
}

/// Picks every argmax set under the objective. Winners come back sorted and
/// deduplicated; the damage is the one recorded for the first winner.
fn argmax_sets(
    mut scored: Vec<(BTreeSet<EntityId>, DamageReport)>,
    objective: Objective,
) -> Option<(Vec<BTreeSet<EntityId>>, DamageReport)> {
    let best = scored.iter().map(|(_, d)| objective.key(d)).max()?;
    scored.retain(|(_, d)| objective.key(d) == best);
    scored.sort_by(|a, b| a.0.cmp(&b.0));
    scored.dedup_by(|a, b| a.0 == b.0);
    let damage = scored[0].1;
    Some((scored.into_iter().map(|(s, _)| s).collect(), damage))
}

fn score_sets(
    sim: &CascadeSim,
    sets: Vec<BTreeSet<EntityId>>,
    stats: &mut SolverStats,
) -> Result<Vec<(BTreeSet<EntityId>, DamageReport)>, SolveError> {
    let clamps = sets
        .iter()
        .map(|s| sim.indices_of(s))
        .collect::<Result<Vec<_>, _>>()?;
    stats.candidates_evaluated += sets.len() as u64;
    let damages = eval_damages(sim, &clamps);
    Ok(sets.into_iter().zip(damages).collect())
}

// ---------------------------------------------------------------------------
// Exact enumeration
// ---------------------------------------------------------------------------

/// Entities eligible as contingency candidates, in id order.
pub fn eligible_candidates(net: &JointNetwork, scope: CandidateScope) -> Vec<EntityId> {
    match scope {
        CandidateScope::NodesOnly => net.node_ids().into_iter().collect(),
        CandidateScope::IncludeEdgeEntities => net.entities.keys().cloned().collect(),
    }
}

/// Lexicographic k-subset index iterator.
struct Combinations {
    n: usize,
    k: usize,
    current: Vec<usize>,
    started: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            k,
            current: (0..k).collect(),
            started: false,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.k > self.n {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.current.clone());
        }
        let mut i = self.k.checked_sub(1)?;
        loop {
            if self.current[i] < self.n - self.k + i {
                self.current[i] += 1;
                for j in i + 1..self.k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return Some(self.current.clone());
            }
            if i == 0 {
                return None;
            }
            i -= 1;
        }
    }
}

/// n choose k without overflow (caps at `u64::MAX`).
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

pub(crate) fn exact_k_list_counted(
    net: &JointNetwork,
    query: &ContingencyQuery,
) -> Result<(ContingencyList, SolverStats), SolveError> {
    if query.k == 0 {
        return Err(SolveError::InvalidK);
    }
    let candidates = eligible_candidates(net, query.scope);
    if query.k > candidates.len() {
        return Err(SolveError::KTooLarge {
            k: query.k,
            candidates: candidates.len(),
        });
    }
    let sim = CascadeSim::new(net, query.mode)?;
    let indices: Vec<usize> = candidates
        .iter()
        .map(|id| sim.index_of(id))
        .collect::<Result<_, _>>()?;

    let clamps: Vec<Vec<usize>> = Combinations::new(candidates.len(), query.k)
        .map(|combo| combo.iter().map(|&c| indices[c]).collect())
        .collect();
    let damages = eval_damages(&sim, &clamps);
    let stats = SolverStats {
        candidates_evaluated: clamps.len() as u64,
    };

    let scored: Vec<(BTreeSet<EntityId>, DamageReport)> =
        Combinations::new(candidates.len(), query.k)
            .map(|combo| {
                combo
                    .iter()
                    .map(|&c| candidates[c].clone())
                    .collect::<BTreeSet<_>>()
            })
            .zip(damages)
            .collect();
    let (best_sets, damage) =
        argmax_sets(scored, query.objective).expect("at least one candidate subset");
    Ok((
        ContingencyList {
            k: query.k,
            best_sets,
            damage,
        },
        stats,
    ))
}

/// Enumerates every size-k subset of the eligible candidates, cascades each,
/// and returns all argmax sets under the objective ordering.
pub fn exact_k_list(
    net: &JointNetwork,
    query: &ContingencyQuery,
) -> Result<ContingencyList, SolveError> {
    exact_k_list_counted(net, query).map(|(list, _)| list)
}

/// Decision variant: does some k-set fail at least `s` entities in total at
/// steady state?
pub fn decide_k_s(net: &JointNetwork, query: &ContingencyQuery) -> Result<bool, SolveError> {
    let s = query.s.expect("decision query requires s");
    let failed_first = ContingencyQuery {
        objective: Objective::Failed,
        ..query.clone()
    };
    let (list, _) = exact_k_list_counted(net, &failed_first)?;
    Ok(list.damage.failed_count >= s)
}

// ---------------------------------------------------------------------------
// Coloring heuristic
// ---------------------------------------------------------------------------

fn singleton(id: &EntityId) -> BTreeSet<EntityId> {
    BTreeSet::from([id.clone()])
}

fn pair(a: &EntityId, b: &EntityId) -> BTreeSet<EntityId> {
    BTreeSet::from([a.clone(), b.clone()])
}

pub(crate) fn heuristic_k1_counted(
    graph: &mut GraphAbstraction,
    sim: &CascadeSim,
    objective: Objective,
) -> Result<(ContingencyList, SolverStats), SolveError> {
    if graph.vp().is_empty() {
        return Err(SolveError::EmptyPowerLayer);
    }
    let pendants = graph.pendant_vertices();
    let pink: BTreeSet<EntityId> = if pendants.is_empty() {
        graph.min_pp_degree_vertices()
    } else {
        pendants
            .iter()
            .flat_map(|p| {
                graph
                    .neighbors(EdgeClass::Pp, p)
                    .into_iter()
                    .flatten()
                    .cloned()
            })
            .collect()
    };
    for id in &pink {
        graph.set_color(id, Color::Pink);
    }

    let mut stats = SolverStats::default();
    let sets: Vec<BTreeSet<EntityId>> = pink.iter().map(singleton).collect();
    let scored = score_sets(sim, sets, &mut stats)?;
    let (best_sets, damage) = argmax_sets(scored, objective).ok_or(SolveError::EmptyPowerLayer)?;

    for set in &best_sets {
        for id in set {
            graph.set_color(id, Color::Red);
        }
    }
    graph.revert_color(Color::Pink);
    Ok((
        ContingencyList {
            k: 1,
            best_sets,
            damage,
        },
        stats,
    ))
}

pub(crate) fn heuristic_k2_counted(
    graph: &mut GraphAbstraction,
    sim: &CascadeSim,
    objective: Objective,
) -> Result<(ContingencyList, SolverStats), SolveError> {
    let reds: Vec<EntityId> = graph
        .vp()
        .iter()
        .filter(|v| graph.color(v) == Color::Red)
        .cloned()
        .collect();
    if reds.is_empty() {
        return Err(SolveError::NoRedVertices);
    }
    let mut stats = SolverStats::default();

    // List 1: red vertices paired with attribute-colored vertices. A red
    // vertex keeps its yellow/blue/green classification underneath, so
    // pairing consults base colors.
    let partners: Vec<EntityId> = graph
        .vp()
        .iter()
        .filter(|v| {
            matches!(
                graph.base_color(v),
                Color::Yellow | Color::Blue | Color::Green
            )
        })
        .cloned()
        .collect();
    let pairs1: BTreeSet<BTreeSet<EntityId>> = reds
        .iter()
        .flat_map(|r| partners.iter().map(move |p| (r, p)))
        .filter(|(r, p)| r != p)
        .map(|(r, p)| pair(r, p))
        .collect();
    let list1 = argmax_sets(
        score_sets(sim, pairs1.into_iter().collect(), &mut stats)?,
        objective,
    );

    // List 2: pairs among grey vertices, the neighbors of vertices that have
    // exactly two pp edges.
    let grey: BTreeSet<EntityId> = graph
        .vp()
        .iter()
        .filter(|v| graph.pp_degree(v) == 2)
        .flat_map(|v| {
            graph
                .neighbors(EdgeClass::Pp, v)
                .into_iter()
                .flatten()
                .cloned()
        })
        .collect();
    for id in &grey {
        graph.set_color(id, Color::Grey);
    }
    let grey: Vec<EntityId> = grey.into_iter().collect();
    let mut pairs2: Vec<BTreeSet<EntityId>> = Vec::new();
    for (i, a) in grey.iter().enumerate() {
        for b in &grey[i + 1..] {
            pairs2.push(pair(a, b));
        }
    }
    let list2 = argmax_sets(score_sets(sim, pairs2, &mut stats)?, objective);
    graph.revert_color(Color::Grey);

    let (best_sets, damage) = match (list1, list2) {
        (None, None) => return Err(SolveError::NoCandidatePairs),
        (Some(l1), None) => l1,
        (None, Some(l2)) => l2,
        (Some((sets1, d1)), Some((sets2, d2))) => {
            match objective.key(&d1).cmp(&objective.key(&d2)) {
                std::cmp::Ordering::Greater => (sets1, d1),
                std::cmp::Ordering::Less => (sets2, d2),
                std::cmp::Ordering::Equal => {
                    let mut merged = sets1;
                    merged.extend(sets2);
                    merged.sort();
                    merged.dedup();
                    (merged, d1)
                }
            }
        }
    };
    Ok((
        ContingencyList {
            k: 2,
            best_sets,
            damage,
        },
        stats,
    ))
}

pub(crate) fn heuristic_k_counted(
    graph: &GraphAbstraction,
    sim: &CascadeSim,
    k: usize,
    objective: Objective,
) -> Result<(ContingencyList, SolverStats), SolveError> {
    debug_assert!(k >= 3);
    let mut stats = SolverStats::default();
    let pairs_needed = k.div_ceil(2);
    let pairs_per_union = k / 2;

    let mut working = graph.clone();
    let mut accumulated: Vec<BTreeSet<EntityId>> = Vec::new();
    let winners: (Vec<BTreeSet<EntityId>>, DamageReport) = loop {
        if working.vp().is_empty() {
            return Err(SolveError::InsufficientGraph);
        }
        let round = (|| -> Result<ContingencyList, SolveError> {
            let (_, s1) = heuristic_k1_counted(&mut working, sim, objective)?;
            stats.candidates_evaluated += s1.candidates_evaluated;
            let (pairs, s2) = heuristic_k2_counted(&mut working, sim, objective)?;
            stats.candidates_evaluated += s2.candidates_evaluated;
            Ok(pairs)
        })();
        let round = match round {
            Ok(round) => round,
            Err(e) if e.is_infeasible() => return Err(SolveError::InsufficientGraph),
            Err(e) => return Err(e),
        };
        let used: BTreeSet<EntityId> = round.best_sets.iter().flatten().cloned().collect();
        working.remove_vertices(&used);
        working.revert_color(Color::Red);
        for set in round.best_sets {
            if !accumulated.contains(&set) {
                accumulated.push(set);
            }
        }

        if accumulated.len() >= pairs_needed {
            // Unions of pairwise-disjoint accumulated pairs; overlapping
            // combinations that cannot reach size 2*pairs_per_union are
            // skipped.
            let mut unions: Vec<BTreeSet<EntityId>> = Vec::new();
            for combo in Combinations::new(accumulated.len(), pairs_per_union) {
                let mut merged: BTreeSet<EntityId> = BTreeSet::new();
                for &i in &combo {
                    merged.extend(accumulated[i].iter().cloned());
                }
                if merged.len() == 2 * pairs_per_union {
                    unions.push(merged);
                }
            }
            unions.sort();
            unions.dedup();
            if !unions.is_empty() {
                let scored = score_sets(sim, unions, &mut stats)?;
                break argmax_sets(scored, objective).expect("nonempty unions");
            }
        }
    };

    if k.is_multiple_of(2) {
        let (best_sets, damage) = winners;
        return Ok((
            ContingencyList {
                k,
                best_sets,
                damage,
            },
            stats,
        ));
    }

    // Odd k: rerun the k=1 step on the graph without the winning entities,
    // then extend each winning set with each fresh red singleton.
    let used: BTreeSet<EntityId> = winners.0.iter().flatten().cloned().collect();
    let mut reduced = graph.clone();
    reduced.remove_vertices(&used);
    let (singles, s3) = match heuristic_k1_counted(&mut reduced, sim, objective) {
        Ok(ok) => ok,
        Err(e) if e.is_infeasible() => return Err(SolveError::InsufficientGraph),
        Err(e) => return Err(e),
    };
    stats.candidates_evaluated += s3.candidates_evaluated;

    let mut combos: Vec<BTreeSet<EntityId>> = Vec::new();
    for base in &winners.0 {
        for single in &singles.best_sets {
            let mut merged = base.clone();
            merged.extend(single.iter().cloned());
            if merged.len() == k {
                combos.push(merged);
            }
        }
    }
    combos.sort();
    combos.dedup();
    if combos.is_empty() {
        return Err(SolveError::InsufficientGraph);
    }
    let scored = score_sets(sim, combos, &mut stats)?;
    let (best_sets, damage) = argmax_sets(scored, objective).expect("nonempty combos");
    Ok((
        ContingencyList {
            k,
            best_sets,
            damage,
        },
        stats,
    ))
}

/// The k=1 step: candidates are the neighbors of pendant power vertices (or
/// the minimum-degree class when no pendants exist), each evaluated by a full
/// cascade; all argmax candidates turn red and form the list. Pink reverts.
pub fn heuristic_k1(
    graph: &mut GraphAbstraction,
    net: &JointNetwork,
    mode: EvaluationMode,
    objective: Objective,
) -> Result<ContingencyList, SolveError> {
    let sim = CascadeSim::new(net, mode)?;
    heuristic_k1_counted(graph, &sim, objective).map(|(list, _)| list)
}

/// The k=2 step: red-times-colored pairs against grey-neighborhood pairs.
/// Requires red vertices from a prior k=1 step. Grey reverts.
pub fn heuristic_k2(
    graph: &mut GraphAbstraction,
    net: &JointNetwork,
    mode: EvaluationMode,
    objective: Objective,
) -> Result<ContingencyList, SolveError> {
    let sim = CascadeSim::new(net, mode)?;
    heuristic_k2_counted(graph, &sim, objective).map(|(list, _)| list)
}

/// The k>=3 step: repeatedly harvests best pairs from a shrinking working
/// copy of the power graph, then assembles k-sets from disjoint pairs (plus
/// one fresh red singleton when k is odd).
pub fn heuristic_k(
    graph: &GraphAbstraction,
    net: &JointNetwork,
    k: usize,
    mode: EvaluationMode,
    objective: Objective,
) -> Result<ContingencyList, SolveError> {
    if k < 3 {
        return Err(SolveError::InvalidK);
    }
    let sim = CascadeSim::new(net, mode)?;
    heuristic_k_counted(graph, &sim, k, objective).map(|(list, _)| list)
}

pub(crate) fn heuristic_k_list_counted(
    net: &JointNetwork,
    query: &ContingencyQuery,
) -> Result<(ContingencyList, SolverStats), SolveError> {
    let mut graph = build_graph_abstraction(net)?;
    graph.classify_base_colors(net);
    let sim = CascadeSim::new(net, query.mode)?;
    match query.k {
        0 => Err(SolveError::InvalidK),
        1 => heuristic_k1_counted(&mut graph, &sim, query.objective),
        2 => {
            let (_, s1) = heuristic_k1_counted(&mut graph, &sim, query.objective)?;
            let (list, s2) = heuristic_k2_counted(&mut graph, &sim, query.objective)?;
            Ok((
                list,
                SolverStats {
                    candidates_evaluated: s1.candidates_evaluated + s2.candidates_evaluated,
                },
            ))
        }
        k => heuristic_k_counted(&graph, &sim, k, query.objective),
    }
}

/// Runs the full heuristic pipeline for any k on a fresh graph abstraction.
pub fn heuristic_k_list(
    net: &JointNetwork,
    query: &ContingencyQuery,
) -> Result<ContingencyList, SolveError> {
    heuristic_k_list_counted(net, query).map(|(list, _)| list)
}

/// Dispatches to the configured solver, reporting evaluation counts.
pub fn solve_with_stats(
    net: &JointNetwork,
    query: &ContingencyQuery,
    kind: SolverKind,
) -> Result<(ContingencyList, SolverStats), SolveError> {
    match kind {
        SolverKind::Exact => exact_k_list_counted(net, query),
        SolverKind::Heuristic => heuristic_k_list_counted(net, query),
    }
}

// ---------------------------------------------------------------------------
// Event-driven self-updating engine
// ---------------------------------------------------------------------------

/// Live view of a network under an ongoing incident: the pruned network, the
/// steady states of its survivors, the colored graph, the current list, and
/// isolation flags accumulated between events.
#[derive(Debug, Clone)]
pub struct EngineState {
    baseline_graph: GraphAbstraction,
    baseline_ids: BTreeSet<EntityId>,
    pub network: JointNetwork,
    pub states: StateTable,
    pub graph: GraphAbstraction,
    pub query: ContingencyQuery,
    pub solver: SolverKind,
    pub current_list: Option<ContingencyList>,
    /// Communication vertices flagged by the isolation rules, in the order
    /// they were flagged. Entries persist even if the entity later fails.
    pub isolation_additions: Vec<EntityId>,
    pub failed_history: Vec<(u64, EntityId)>,
    pub last_stats: SolverStats,
}

impl EngineState {
    pub fn new(
        net: JointNetwork,
        query: ContingencyQuery,
        solver: SolverKind,
    ) -> Result<EngineState, SolveError> {
        let mut graph = build_graph_abstraction(&net)?;
        graph.classify_base_colors(&net);
        let (current_list, initial_stats) = match solve_with_stats(&net, &query, solver) {
            Ok((list, stats)) => (Some(list), stats),
            Err(e) if e.is_infeasible() => (None, SolverStats::default()),
            Err(e) => return Err(e),
        };
        Ok(EngineState {
            baseline_graph: graph.clone(),
            baseline_ids: net.entities.keys().cloned().collect(),
            states: StateTable::all_full(&net),
            network: net,
            graph,
            query,
            solver,
            current_list,
            isolation_additions: Vec::new(),
            failed_history: Vec::new(),
            last_stats: initial_stats,
        })
    }

    /// Entities of the solver list (not counting isolation additions).
    fn list_entities(&self) -> BTreeSet<EntityId> {
        self.current_list
            .iter()
            .flat_map(|l| l.best_sets.iter().flatten().cloned())
            .collect()
    }

    fn all_failed(&self) -> BTreeSet<EntityId> {
        self.baseline_ids
            .iter()
            .filter(|id| !self.network.contains(id))
            .cloned()
            .collect()
    }

    fn refresh_list(&mut self) -> Result<(), SolveError> {
        match solve_with_stats(&self.network, &self.query, self.solver) {
            Ok((list, stats)) => {
                self.current_list = Some(list);
                self.last_stats = stats;
                Ok(())
            }
            Err(e) if e.is_infeasible() => {
                self.current_list = None;
                self.last_stats = SolverStats::default();
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    /// Processes one event (or its absence). With an event: clamp, cascade to
    /// steady state, prune everything that failed, rebuild the graph and
    /// recompute the list. Without: apply the isolation rules, flagging
    /// communication vertices whose every pc (or cc) edge leads to failed
    /// entities or to entities of the current list.
    pub fn handle_event(
        &mut self,
        event: Option<&FailureEvent>,
    ) -> Result<Vec<String>, SolveError> {
        match event {
            Some(event) => self.apply_failures(event),
            None => {
                self.apply_isolation_rules();
                Ok(Vec::new())
            }
        }
    }

    fn apply_failures(&mut self, event: &FailureEvent) -> Result<Vec<String>, SolveError> {
        let mut warnings = Vec::new();
        let mut clamp: BTreeSet<EntityId> = BTreeSet::new();
        for id in &event.entity_ids {
            if self.network.contains(id) {
                clamp.insert(id.clone());
            } else {
                warnings.push(format!(
                    "entity {id} is already failed or unknown; event ignored for it"
                ));
            }
        }
        if clamp.is_empty() {
            return Ok(warnings);
        }

        let trace = run_cascade_from(&self.network, &self.states, &clamp, self.query.mode)?;
        let steady = trace.final_table();
        let zeros = steady.failed_ids();
        let before: BTreeSet<EntityId> = self.network.entities.keys().cloned().collect();
        self.network = apply_self_update(&self.network, &zeros);
        for id in &before {
            if !self.network.contains(id) {
                self.failed_history.push((event.time_ms, id.clone()));
            }
        }
        self.states = StateTable(
            steady
                .iter()
                .filter(|(id, _)| self.network.contains(id))
                .map(|(id, v)| (id.clone(), v))
                .collect(),
        );
        self.graph = build_graph_abstraction(&self.network)?;
        self.graph.classify_base_colors(&self.network);
        self.refresh_list()?;
        Ok(warnings)
    }

    fn apply_isolation_rules(&mut self) {
        let failed = self.all_failed();
        if failed.is_empty() {
            return;
        }
        let live: BTreeSet<EntityId> = self.network.entities.keys().cloned().collect();
        let list_entities = self.list_entities();
        let already: BTreeSet<EntityId> = self.isolation_additions.iter().cloned().collect();
        let additions = isolation_candidates(
            &self.baseline_graph,
            &live,
            &failed,
            &list_entities,
            &already,
        );
        for id in additions {
            self.graph.set_color(&id, Color::Red);
            self.isolation_additions.push(id);
        }
    }

    /// The sets to report for the current query: the solver list plus, for
    /// k=1 queries, the isolation-flagged singletons.
    pub fn reported_sets(&self) -> Vec<BTreeSet<EntityId>> {
        let mut sets: Vec<BTreeSet<EntityId>> = self
            .current_list
            .iter()
            .flat_map(|l| l.best_sets.iter().cloned())
            .collect();
        if self.query.k == 1 {
            for id in &self.isolation_additions {
                let single = singleton(id);
                if !sets.contains(&single) {
                    sets.push(single);
                }
            }
        }
        sets
    }
}

/// The four isolation rules over the baseline topology. A vertex qualifies
/// when it is still live, has at least one edge of the class, and every such
/// edge leads into the failed set (rules 1-2) or into the current list
/// (rules 3-4). Flagged vertices come back in id order.
pub(crate) fn isolation_candidates(
    baseline: &GraphAbstraction,
    live: &BTreeSet<EntityId>,
    failed: &BTreeSet<EntityId>,
    list_entities: &BTreeSet<EntityId>,
    already: &BTreeSet<EntityId>,
) -> Vec<EntityId> {
    let mut out = Vec::new();
    for vc in baseline.vc() {
        if !live.contains(vc) || already.contains(vc) {
            continue;
        }
        let all_lead_to = |class: EdgeClass, targets: &BTreeSet<EntityId>| {
            baseline
                .neighbors(class, vc)
                .is_some_and(|n| !n.is_empty() && n.iter().all(|x| targets.contains(x)))
        };
        if all_lead_to(EdgeClass::Pc, failed)
            || all_lead_to(EdgeClass::Cc, failed)
            || all_lead_to(EdgeClass::Pc, list_entities)
            || all_lead_to(EdgeClass::Cc, list_entities)
        {
            out.push(vc.clone());
        }
    }
    out
}

// Re-export for convenient glob imports alongside the solvers.
pub use crate::cascade::Objective as DamageObjective;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::run_cascade;
    use crate::dsl::parse_network;
    use crate::samples;

    fn id(s: &str) -> EntityId {
        EntityId::from(s)
    }

    fn ids(names: &[&str]) -> BTreeSet<EntityId> {
        names.iter().map(|s| id(s)).collect()
    }

    fn net_a() -> JointNetwork {
        parse_network(samples::NET_A).unwrap()
    }

    fn query(k: usize) -> ContingencyQuery {
        ContingencyQuery::new(k, EvaluationMode::Miim)
    }

    fn classified(net: &JointNetwork) -> GraphAbstraction {
        let mut g = build_graph_abstraction(net).unwrap();
        g.classify_base_colors(net);
        g
    }

    /// Two disjoint copies of the fixture network (primed ids).
    fn double_net_a() -> JointNetwork {
        let copy = samples::NET_A
            .replace("P1", "Q1")
            .replace("P2", "Q2")
            .replace("P3", "Q3")
            .replace("C1", "D1")
            .replace("C2", "D2");
        let both = format!("{}{}", samples::NET_A, copy);
        // Merge the two texts section by section.
        let net_one = parse_network(samples::NET_A).unwrap();
        let net_two = parse_network(&copy).unwrap();
        let mut entities = net_one.entities.clone();
        entities.extend(net_two.entities.clone());
        let mut idrs = net_one.idrs.clone();
        idrs.extend(net_two.idrs.clone());
        let mut edges = net_one.edges.clone();
        edges.extend(net_two.edges.clone());
        let _ = both;
        JointNetwork::new(entities, idrs, edges)
    }

    #[test]
    fn exact_k1_finds_the_root_generator() {
        let (list, stats) = exact_k_list_counted(&net_a(), &query(1)).unwrap();
        assert_eq!(list.best_sets, vec![ids(&["P1"])]);
        assert_eq!(
            (list.damage.failed_count, list.damage.state_deficit),
            (5, 10)
        );
        assert_eq!(stats.candidates_evaluated, 5);
    }

    #[test]
    fn exact_k2_returns_all_tied_pairs() {
        let list = exact_k_list(&net_a(), &query(2)).unwrap();
        let expected: Vec<BTreeSet<EntityId>> = vec![
            ids(&["C1", "P1"]),
            ids(&["C2", "P1"]),
            ids(&["P1", "P2"]),
            ids(&["P1", "P3"]),
        ];
        assert_eq!(list.best_sets, expected);
        assert_eq!(
            (list.damage.failed_count, list.damage.state_deficit),
            (5, 10)
        );
    }

    #[test]
    fn exact_k_equal_to_candidate_count() {
        let list = exact_k_list(&net_a(), &query(5)).unwrap();
        assert_eq!(list.best_sets.len(), 1);
        assert_eq!(list.damage.failed_count, 5);
    }

    #[test]
    fn exact_rejects_oversized_k() {
        assert!(matches!(
            exact_k_list(&net_a(), &query(6)),
            Err(SolveError::KTooLarge {
                k: 6,
                candidates: 5
            })
        ));
    }

    #[test]
    fn candidate_scope_admits_edge_entities() {
        let source = "[entities]\nP1 bus\nP2 bus\nT1 line\n[edges]\npp P1 P2 entity=T1\n[idrs]\nP2 <- P1 . T1\n";
        let net = parse_network(source).unwrap();
        assert_eq!(
            eligible_candidates(&net, CandidateScope::NodesOnly),
            vec![id("P1"), id("P2")]
        );
        assert_eq!(
            eligible_candidates(&net, CandidateScope::IncludeEdgeEntities).len(),
            3
        );
        // With the channel admitted, failing T1 alone takes P2 with it and
        // ties the bus that feeds both.
        let mut q = query(1);
        q.scope = CandidateScope::IncludeEdgeEntities;
        let (list, stats) = exact_k_list_counted(&net, &q).unwrap();
        assert_eq!(stats.candidates_evaluated, 3);
        assert_eq!(list.best_sets, vec![ids(&["P1"]), ids(&["T1"])]);
        assert_eq!(list.damage.failed_count, 2);
    }

    #[test]
    fn decide_k_s() {
        let mut q = query(1);
        q.s = Some(5);
        assert!(super::decide_k_s(&net_a(), &q).unwrap());
        q.s = Some(6);
        assert!(!super::decide_k_s(&net_a(), &q).unwrap());
    }

    #[test]
    fn heuristic_k1_picks_pendant_neighbor() {
        let net = net_a();
        let mut graph = classified(&net);
        let list = heuristic_k1(&mut graph, &net, EvaluationMode::Miim, Objective::Failed).unwrap();
        assert_eq!(list.best_sets, vec![ids(&["P2"])]);
        assert_eq!(
            (list.damage.failed_count, list.damage.state_deficit),
            (1, 3)
        );
        assert_eq!(graph.color(&id("P2")), Color::Red);
        assert_eq!(graph.count_color(Color::Pink), 0);
    }

    #[test]
    fn heuristic_k1_single_bus_is_its_own_class() {
        let net = parse_network("[entities]\nP1 bus\n[edges]\n[idrs]\n").unwrap();
        let mut graph = classified(&net);
        let list = heuristic_k1(&mut graph, &net, EvaluationMode::Miim, Objective::Failed).unwrap();
        assert_eq!(list.best_sets, vec![ids(&["P1"])]);
        assert_eq!(graph.color(&id("P1")), Color::Red);
    }

    #[test]
    fn heuristic_k1_ties_all_turn_red() {
        let source = "[entities]\nP1 bus\nP2 bus\nP3 bus\nP4 bus\n[edges]\npp P1 P2\npp P2 P3\npp P3 P4\npp P1 P4\n[idrs]\n";
        let net = parse_network(source).unwrap();
        let mut graph = classified(&net);
        let list = heuristic_k1(&mut graph, &net, EvaluationMode::Miim, Objective::Failed).unwrap();
        assert_eq!(list.best_sets.len(), 4);
        assert_eq!(graph.count_color(Color::Red), 4);
    }

    #[test]
    fn heuristic_k2_merges_tied_lists() {
        let net = net_a();
        let mut graph = classified(&net);
        heuristic_k1(&mut graph, &net, EvaluationMode::Miim, Objective::Failed).unwrap();
        let list = heuristic_k2(&mut graph, &net, EvaluationMode::Miim, Objective::Failed).unwrap();
        assert_eq!(list.best_sets, vec![ids(&["P1", "P2"]), ids(&["P1", "P3"])]);
        assert_eq!(
            (list.damage.failed_count, list.damage.state_deficit),
            (5, 10)
        );
        assert_eq!(graph.count_color(Color::Grey), 0);
    }

    #[test]
    fn heuristic_k2_requires_red() {
        let net = net_a();
        let mut graph = classified(&net);
        assert!(matches!(
            heuristic_k2(&mut graph, &net, EvaluationMode::Miim, Objective::Failed),
            Err(SolveError::NoRedVertices)
        ));
    }

    #[test]
    fn heuristic_matches_exact_on_disjoint_copies_k2() {
        let net = double_net_a();
        let heuristic = heuristic_k_list(&net, &query(2)).unwrap();
        let exact = exact_k_list(&net, &query(2)).unwrap();
        assert!(heuristic.damage.same_damage(&exact.damage));
        assert_eq!(heuristic.best_sets, vec![ids(&["P1", "Q1"])]);
        assert_eq!(heuristic.damage.failed_count, 10);
    }

    #[test]
    fn heuristic_k4_on_disjoint_copies_sums_damage() {
        let net = double_net_a();
        let list = heuristic_k_list(&net, &query(4)).unwrap();
        assert_eq!(
            (list.damage.failed_count, list.damage.state_deficit),
            (10, 20)
        );
        // Two disjoint accumulated pairs force exactly one candidate union.
        assert_eq!(list.best_sets.len(), 1);
        let exact = exact_k_list(&net, &query(4)).unwrap();
        assert!(list.damage.same_damage(&exact.damage));
    }

    #[test]
    fn heuristic_k2_falls_back_to_grey_pairs_without_colored_partners() {
        // No generator or PMU anywhere: list 1 has no partners, so the grey
        // pairs decide alone.
        let source = "[entities]\nP1 bus\nP2 bus\nP3 bus\nP4 bus\n[edges]\npp P1 P2\npp P2 P3\npp P3 P4\n[idrs]\nP2 <- P1\nP3 <- P4\n";
        let net = parse_network(source).unwrap();
        let list = heuristic_k_list(&net, &query(2)).unwrap();
        assert_eq!(list.best_sets, vec![ids(&["P1", "P4"])]);
        assert_eq!(list.damage.failed_count, 4);
    }

    #[test]
    fn heuristic_k2_falls_back_to_colored_pairs_without_degree_two() {
        // Both buses have pp degree 1, so no grey candidates exist and the
        // red-times-yellow pair decides alone.
        let source = "[entities]\nP1 bus gen\nP2 bus\nC1 substation_entity\n[edges]\npp P1 P2\npc P2 C1\n[idrs]\nC1 <- P2\n";
        let net = parse_network(source).unwrap();
        let list = heuristic_k_list(&net, &query(2)).unwrap();
        assert_eq!(list.best_sets, vec![ids(&["P1", "P2"])]);
        assert_eq!(list.damage.failed_count, 3);
    }

    #[test]
    fn heuristic_k3_on_disjoint_copies() {
        let net = double_net_a();
        let list = heuristic_k_list(&net, &query(3)).unwrap();
        let exact = exact_k_list(&net, &query(3)).unwrap();
        assert!(objectively_le(&list.damage, &exact.damage));
        assert_eq!(list.damage.failed_count, 10);
        for set in &list.best_sets {
            assert_eq!(set.len(), 3);
        }
    }

    fn objectively_le(a: &DamageReport, b: &DamageReport) -> bool {
        Objective::Failed.key(a) <= Objective::Failed.key(b)
    }

    #[test]
    fn heuristic_k_errors_when_graph_exhausts() {
        // Three buses cannot yield the two disjoint pairs a k=4 query needs.
        let source =
            "[entities]\nP1 bus gen\nP2 bus pmu\nP3 bus\n[edges]\npp P1 P2\npp P2 P3\n[idrs]\n";
        let net = parse_network(source).unwrap();
        assert!(matches!(
            heuristic_k_list(&net, &query(4)),
            Err(SolveError::InsufficientGraph)
        ));
    }

    #[test]
    fn solver_reported_damage_replays_exactly() {
        let net = net_a();
        for k in 1..=2 {
            for kind in [SolverKind::Exact, SolverKind::Heuristic] {
                let (list, _) = solve_with_stats(&net, &query(k), kind).unwrap();
                for set in &list.best_sets {
                    let trace = run_cascade(&net, set, EvaluationMode::Miim).unwrap();
                    let damage = crate::cascade::damage_of(&trace).unwrap();
                    assert!(damage.same_damage(&list.damage));
                }
            }
        }
    }

    #[test]
    fn engine_event_prunes_and_recomputes() {
        let net = net_a();
        let mut engine = EngineState::new(net, query(1), SolverKind::Heuristic).unwrap();
        let event = FailureEvent {
            time_ms: 0,
            entity_ids: ids(&["P3"]),
        };
        let warnings = engine.handle_event(Some(&event)).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(engine.network.len(), 4);
        let list = engine.current_list.as_ref().unwrap();
        assert_eq!(list.best_sets, vec![ids(&["P1"])]);
        assert_eq!(
            (list.damage.failed_count, list.damage.state_deficit),
            (4, 8)
        );
    }

    #[test]
    fn engine_event_matches_fresh_computation() {
        let net = net_a();
        let mut engine = EngineState::new(net.clone(), query(1), SolverKind::Heuristic).unwrap();
        let event = FailureEvent {
            time_ms: 0,
            entity_ids: ids(&["P3"]),
        };
        engine.handle_event(Some(&event)).unwrap();

        let trace = run_cascade(&net, &ids(&["P3"]), EvaluationMode::Miim).unwrap();
        let pruned = apply_self_update(&net, &trace.final_table().failed_ids());
        let fresh = heuristic_k_list(&pruned, &query(1)).unwrap();
        assert_eq!(
            serde_json::to_string(&engine.current_list.as_ref().unwrap()).unwrap(),
            serde_json::to_string(&fresh).unwrap()
        );
    }

    #[test]
    fn engine_ignores_already_failed_entities() {
        let net = net_a();
        let mut engine = EngineState::new(net, query(1), SolverKind::Heuristic).unwrap();
        engine
            .handle_event(Some(&FailureEvent {
                time_ms: 0,
                entity_ids: ids(&["P3"]),
            }))
            .unwrap();
        let warnings = engine
            .handle_event(Some(&FailureEvent {
                time_ms: 1,
                entity_ids: ids(&["P3"]),
            }))
            .unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn engine_no_event_no_failures_is_identity() {
        let net = net_a();
        let mut engine = EngineState::new(net, query(1), SolverKind::Heuristic).unwrap();
        let before = engine.reported_sets();
        engine.handle_event(None).unwrap();
        assert_eq!(engine.reported_sets(), before);
        assert!(engine.isolation_additions.is_empty());
    }

    #[test]
    fn isolation_rule_flags_cut_off_comm_vertex() {
        // C1 hangs off P3 alone; failing P3 isolates it.
        let source = "[entities]\nP1 bus gen\nP2 bus\nP3 bus\nC1 substation_entity\n[edges]\npp P1 P2\npp P2 P3\npc P3 C1\n[idrs]\n";
        let net = parse_network(source).unwrap();
        let mut engine = EngineState::new(net, query(1), SolverKind::Heuristic).unwrap();
        engine
            .handle_event(Some(&FailureEvent {
                time_ms: 0,
                entity_ids: ids(&["P3"]),
            }))
            .unwrap();
        engine.handle_event(None).unwrap();
        assert_eq!(engine.isolation_additions, vec![id("C1")]);
        let sets = engine.reported_sets();
        assert!(sets.contains(&ids(&["C1"])));
    }

    #[test]
    fn parallel_and_sequential_paths_agree() {
        let net = double_net_a();
        let sets: Vec<BTreeSet<EntityId>> = net
            .node_ids()
            .iter()
            .map(|i| BTreeSet::from([i.clone()]))
            .collect();
        let par = damage_for_sets(&net, &sets, EvaluationMode::Miim).unwrap();
        let seq = damage_for_sets_seq(&net, &sets, EvaluationMode::Miim).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn binomial_sanity() {
        assert_eq!(binomial(5, 1), 5);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(200, 100), u64::MAX);
    }

    #[test]
    fn combinations_cover_all_subsets() {
        let combos: Vec<Vec<usize>> = Combinations::new(5, 2).collect();
        assert_eq!(combos.len(), 10);
        assert_eq!(combos[0], vec![0, 1]);
        assert_eq!(combos[9], vec![3, 4]);
    }
}
