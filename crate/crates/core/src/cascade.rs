//! Synchronous-round cascade propagation to steady state, damage accounting,
//! and the between-steady-states self-updating prune.
//!
//! State trajectories only move downward: each round recomputes every entity
//! with an IDR as `min(previous, eval(idr))` against the previous round's
//! table, so a fixpoint is always reached. During a cascade a failed entity
//! simply contributes state 0 wherever it is referenced (substitution);
//! pruning of entities and IDRs happens only between steady states via
//! [`apply_self_update`]. The two give different results around new-XOR and
//! are deliberately kept apart.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    max_or, min_and, new_xor, EntityId, EvalError, EvaluationMode, IdrExpression, StateValue,
};
use crate::network::JointNetwork;

/// Total mapping from the entities of one network to their states.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateTable(pub BTreeMap<EntityId, StateValue>);

impl StateTable {
    /// Every entity of the network at full operation.
    pub fn all_full(net: &JointNetwork) -> Self {
        StateTable(
            net.entities
                .keys()
                .map(|id| (id.clone(), StateValue::Full))
                .collect(),
        )
    }

    pub fn get(&self, id: &EntityId) -> Option<StateValue> {
        self.0.get(id).copied()
    }

    pub fn set(&mut self, id: EntityId, value: StateValue) {
        self.0.insert(id, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityId, StateValue)> {
        self.0.iter().map(|(id, &v)| (id, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entities currently at state 0.
    pub fn failed_ids(&self) -> BTreeSet<EntityId> {
        self.0
            .iter()
            .filter(|(_, v)| v.is_failed())
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Sum over entities of (2 - state).
    pub fn deficit(&self) -> u32 {
        self.0.values().map(|v| v.deficit()).sum()
    }
}

/// One or more entities externally failing at a point in time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub time_ms: u64,
    pub entity_ids: BTreeSet<EntityId>,
}

/// Recorded cascade: `rounds[r]` is the state after `r` synchronous rounds,
/// with `rounds[0]` the initial table (external failures already clamped).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeTrace {
    pub rounds: Vec<StateTable>,
    pub steady: bool,
    pub clamp_set: BTreeSet<EntityId>,
}

impl CascadeTrace {
    pub fn final_table(&self) -> &StateTable {
        self.rounds.last().expect("trace has at least one round")
    }

    /// Rounds until the table stopped changing (the confirming duplicate
    /// round is not counted).
    pub fn rounds_to_steady(&self) -> u32 {
        (self.rounds.len() as u32).saturating_sub(2)
    }
}

/// Damage measured at steady state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DamageReport {
    /// Entities at state 0.
    pub failed_count: u32,
    /// Sum over entities of (2 - state).
    pub state_deficit: u32,
    pub rounds_to_steady: u32,
}

impl DamageReport {
    /// Equality on the damage dimensions, ignoring timing.
    pub fn same_damage(&self, other: &DamageReport) -> bool {
        self.failed_count == other.failed_count && self.state_deficit == other.state_deficit
    }
}

/// Which damage dimension to maximize first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Most entities at state 0, deficit as tiebreak.
    Failed,
    /// Largest total state deficit, failed count as tiebreak.
    Deficit,
}

impl Objective {
    /// Sort key; larger is more damage.
    pub fn key(&self, damage: &DamageReport) -> (u32, u32) {
        match self {
            Objective::Failed => (damage.failed_count, damage.state_deficit),
            Objective::Deficit => (damage.state_deficit, damage.failed_count),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CascadeError {
    #[error("unknown entity id: {0}")]
    UnknownEntity(EntityId),
    #[error("state table does not match the network (missing or extra entities)")]
    TableMismatch,
    #[error("trace is not steady")]
    NotSteady,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

// ---------------------------------------------------------------------------
// Compiled simulator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum CompiledExpr {
    Entity(usize),
    MinAnd(Vec<CompiledExpr>),
    MaxOr(Vec<CompiledExpr>),
    NewXor(Vec<CompiledExpr>),
}

impl CompiledExpr {
    fn eval(&self, states: &[StateValue]) -> StateValue {
        match self {
            CompiledExpr::Entity(index) => states[*index],
            CompiledExpr::MinAnd(children) => children
                .iter()
                .map(|c| c.eval(states))
                .reduce(min_and)
                .expect("connectives have children"),
            CompiledExpr::MaxOr(children) => children
                .iter()
                .map(|c| c.eval(states))
                .reduce(max_or)
                .expect("connectives have children"),
            CompiledExpr::NewXor(children) => {
                let values: Vec<StateValue> = children.iter().map(|c| c.eval(states)).collect();
                new_xor(&values).expect("connectives have children")
            }
        }
    }
}

/// A network compiled for repeated cascade runs: entity ids resolved to
/// dense indices once, so solvers can evaluate thousands of candidate
/// failure sets cheaply. Immutable and safe to share across threads.
#[derive(Debug, Clone)]
pub struct CascadeSim {
    ids: Vec<EntityId>,
    index: BTreeMap<EntityId, usize>,
    idrs: Vec<Option<CompiledExpr>>,
    mode: EvaluationMode,
}

impl CascadeSim {
    pub fn new(net: &JointNetwork, mode: EvaluationMode) -> Result<CascadeSim, CascadeError> {
        let ids: Vec<EntityId> = net.entities.keys().cloned().collect();
        let index: BTreeMap<EntityId, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let mut idrs = vec![None; ids.len()];
        for (target, expr) in &net.idrs {
            let slot = *index
                .get(target)
                .ok_or_else(|| CascadeError::UnknownEntity(target.clone()))?;
            expr.check_mode(mode)?;
            // A self literal is ignored during evaluation; an IDR that was
            // nothing but self references degenerates to a root entity.
            let selfless = expr.prune(&BTreeSet::from([target.clone()]));
            let Some(expr) = selfless else {
                continue;
            };
            idrs[slot] = Some(compile(&expr, &index)?);
        }
        Ok(CascadeSim {
            ids,
            index,
            idrs,
            mode,
        })
    }

    pub fn mode(&self) -> EvaluationMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &EntityId) -> Result<usize, CascadeError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| CascadeError::UnknownEntity(id.clone()))
    }

    pub fn indices_of(&self, ids: &BTreeSet<EntityId>) -> Result<Vec<usize>, CascadeError> {
        ids.iter().map(|id| self.index_of(id)).collect()
    }

    fn to_vec(&self, table: &StateTable) -> Result<Vec<StateValue>, CascadeError> {
        if table.len() != self.ids.len() {
            return Err(CascadeError::TableMismatch);
        }
        let mut out = Vec::with_capacity(self.ids.len());
        for id in &self.ids {
            let value = table.get(id).ok_or(CascadeError::TableMismatch)?;
            if !value.valid_in(self.mode) {
                return Err(CascadeError::Eval(EvalError::ReducedInIim(id.clone())));
            }
            out.push(value);
        }
        Ok(out)
    }

    fn to_table(&self, states: &[StateValue]) -> StateTable {
        StateTable(
            self.ids
                .iter()
                .cloned()
                .zip(states.iter().copied())
                .collect(),
        )
    }

    /// One synchronous round: every IDR reads the same input table; entities
    /// in `clamp` are forced to 0 (in the read view and the output).
    fn step(&self, states: &[StateValue], clamp: &[usize]) -> Vec<StateValue> {
        let mut input = states.to_vec();
        for &i in clamp {
            input[i] = StateValue::Failed;
        }
        let mut next = input.clone();
        for (i, idr) in self.idrs.iter().enumerate() {
            if let Some(expr) = idr {
                next[i] = min_and(input[i], expr.eval(&input));
            }
        }
        next
    }

    fn evolve(&self, initial: Vec<StateValue>, clamp: &[usize]) -> Vec<Vec<StateValue>> {
        let mut rounds = Vec::new();
        let mut current = initial;
        for &i in clamp {
            current[i] = StateValue::Failed;
        }
        rounds.push(current.clone());
        if self.ids.is_empty() {
            return rounds;
        }
        loop {
            let next = self.step(&current, clamp);
            let done = next == current;
            rounds.push(next.clone());
            current = next;
            if done {
                return rounds;
            }
            debug_assert!(
                rounds.len() <= 2 * self.ids.len() + 2,
                "cascade failed to converge"
            );
        }
    }

    /// One synchronous round over a state table.
    pub fn step_table(
        &self,
        states: &StateTable,
        clamp: &BTreeSet<EntityId>,
    ) -> Result<StateTable, CascadeError> {
        let clamp_indices = self.indices_of(clamp)?;
        Ok(self.to_table(&self.step(&self.to_vec(states)?, &clamp_indices)))
    }

    /// Runs to steady state from an explicit starting table.
    pub fn run_from(
        &self,
        initial: &StateTable,
        clamp: &BTreeSet<EntityId>,
    ) -> Result<CascadeTrace, CascadeError> {
        let clamp_indices = self.indices_of(clamp)?;
        let rounds = self.evolve(self.to_vec(initial)?, &clamp_indices);
        Ok(CascadeTrace {
            rounds: rounds.iter().map(|r| self.to_table(r)).collect(),
            steady: true,
            clamp_set: clamp.clone(),
        })
    }

    /// Runs to steady state from the all-full table.
    pub fn run(&self, failures: &BTreeSet<EntityId>) -> Result<CascadeTrace, CascadeError> {
        let clamp_indices = self.indices_of(failures)?;
        let initial = vec![StateValue::Full; self.ids.len()];
        let rounds = self.evolve(initial, &clamp_indices);
        Ok(CascadeTrace {
            rounds: rounds.iter().map(|r| self.to_table(r)).collect(),
            steady: true,
            clamp_set: failures.clone(),
        })
    }

    /// Damage of a candidate failure set without materializing the trace.
    /// Candidates are pre-resolved indices so solvers can fan out cheaply.
    pub fn damage_of_indices(&self, clamp: &[usize]) -> DamageReport {
        let initial = vec![StateValue::Full; self.ids.len()];
        let rounds = self.evolve(initial, clamp);
        let last = rounds.last().expect("at least one round");
        DamageReport {
            failed_count: last.iter().filter(|v| v.is_failed()).count() as u32,
            state_deficit: last.iter().map(|v| v.deficit()).sum(),
            rounds_to_steady: (rounds.len() as u32).saturating_sub(2),
        }
    }
}

fn compile(
    expr: &IdrExpression,
    index: &BTreeMap<EntityId, usize>,
) -> Result<CompiledExpr, CascadeError> {
    Ok(match expr {
        IdrExpression::Entity(id) => CompiledExpr::Entity(
            *index
                .get(id)
                .ok_or_else(|| CascadeError::UnknownEntity(id.clone()))?,
        ),
        IdrExpression::MinAnd(children) => CompiledExpr::MinAnd(compile_children(children, index)?),
        IdrExpression::MaxOr(children) => CompiledExpr::MaxOr(compile_children(children, index)?),
        IdrExpression::NewXor(children) => CompiledExpr::NewXor(compile_children(children, index)?),
    })
}

fn compile_children(
    children: &[IdrExpression],
    index: &BTreeMap<EntityId, usize>,
) -> Result<Vec<CompiledExpr>, CascadeError> {
    children.iter().map(|c| compile(c, index)).collect()
}

// ---------------------------------------------------------------------------
// Free-function API
// ---------------------------------------------------------------------------

/// One synchronous round over a state table; see [`CascadeSim::step`].
pub fn step_once(
    net: &JointNetwork,
    states: &StateTable,
    clamp: &BTreeSet<EntityId>,
    mode: EvaluationMode,
) -> Result<StateTable, CascadeError> {
    let sim = CascadeSim::new(net, mode)?;
    let clamp_indices = sim.indices_of(clamp)?;
    let next = sim.step(&sim.to_vec(states)?, &clamp_indices);
    Ok(sim.to_table(&next))
}

/// Cascade from the all-full table with the given external failures clamped,
/// until two consecutive tables are equal.
pub fn run_cascade(
    net: &JointNetwork,
    initial_failures: &BTreeSet<EntityId>,
    mode: EvaluationMode,
) -> Result<CascadeTrace, CascadeError> {
    CascadeSim::new(net, mode)?.run(initial_failures)
}

/// Cascade from an explicit starting table (used when failures arrive while
/// earlier damage is still in place).
pub fn run_cascade_from(
    net: &JointNetwork,
    initial: &StateTable,
    clamp: &BTreeSet<EntityId>,
    mode: EvaluationMode,
) -> Result<CascadeTrace, CascadeError> {
    CascadeSim::new(net, mode)?.run_from(initial, clamp)
}

/// Damage of a steady trace under either objective ordering.
pub fn damage_of(trace: &CascadeTrace) -> Result<DamageReport, CascadeError> {
    if !trace.steady {
        return Err(CascadeError::NotSteady);
    }
    let last = trace.final_table();
    Ok(DamageReport {
        failed_count: last.failed_ids().len() as u32,
        state_deficit: last.deficit(),
        rounds_to_steady: trace.rounds_to_steady(),
    })
}

/// Removes failed entities, their IDRs and incident edges, then rewrites
/// every surviving IDR without the failed references. An entity whose IDR is
/// pruned away entirely is itself treated as failed, and the removal repeats
/// until closure. A channel entity loses its edge and an edge loses its
/// channel entity symmetrically. Ids not present are ignored, so applying
/// the same update twice is a no-op.
pub fn apply_self_update(net: &JointNetwork, failed: &BTreeSet<EntityId>) -> JointNetwork {
    let mut current = net.clone();
    let mut gone: BTreeSet<EntityId> = failed
        .iter()
        .filter(|id| current.contains(id))
        .cloned()
        .collect();

    while !gone.is_empty() {
        let mut next_gone: BTreeSet<EntityId> = BTreeSet::new();

        for id in &gone {
            current.entities.remove(id);
            current.idrs.remove(id);
        }
        current.edges.retain(|edge| {
            let dead = gone.contains(&edge.a)
                || gone.contains(&edge.b)
                || edge
                    .bound_entity
                    .as_ref()
                    .is_some_and(|bound| gone.contains(bound));
            if dead {
                // The channel entity goes down with its edge.
                if let Some(bound) = &edge.bound_entity {
                    if !gone.contains(bound) && current.entities.contains_key(bound) {
                        next_gone.insert(bound.clone());
                    }
                }
            }
            !dead
        });

        let mut rewritten: BTreeMap<EntityId, IdrExpression> = BTreeMap::new();
        for (target, expr) in &current.idrs {
            match expr.prune(&gone) {
                Some(pruned) => {
                    rewritten.insert(target.clone(), pruned);
                }
                None => {
                    next_gone.insert(target.clone());
                }
            }
        }
        current.idrs = rewritten;
        gone = next_gone;
    }
    current.edges.sort();
    current
}

// ---------------------------------------------------------------------------
// Trace export
// ---------------------------------------------------------------------------

/// CSV rows `round,entity,state`, rounds ascending and entities sorted.
pub fn trace_csv(trace: &CascadeTrace) -> String {
    let mut out = String::from("round,entity,state\n");
    for (round, table) in trace.rounds.iter().enumerate() {
        for (id, value) in table.iter() {
            out.push_str(&format!("{round},{id},{value}\n"));
        }
    }
    out
}

/// JSON array of per-round state tables.
pub fn trace_json(trace: &CascadeTrace) -> String {
    serde_json::to_string_pretty(&trace.rounds).expect("trace serializes")
}
