//! Multi-valued Boolean operator algebra and interdependency-relation (IDR)
//! expression trees.
//!
//! Two evaluation modes are supported. The three-valued mode (MIIM) works
//! over operational levels {0, 1, 2} with three connectives: min-AND (takes
//! the lowest input), max-OR (takes the highest input) and new-XOR (returns
//! the common value when all inputs agree, otherwise 1). The binary mode
//! (IIM) restricts states to {0, 2} and connectives to min-AND / max-OR.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Operational level of an entity: 0 = failed, 1 = reduced, 2 = full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateValue {
    Failed,
    Reduced,
    Full,
}

impl StateValue {
    pub fn level(self) -> u8 {
        match self {
            StateValue::Failed => 0,
            StateValue::Reduced => 1,
            StateValue::Full => 2,
        }
    }

    pub fn from_level(level: u8) -> Option<StateValue> {
        match level {
            0 => Some(StateValue::Failed),
            1 => Some(StateValue::Reduced),
            2 => Some(StateValue::Full),
            _ => None,
        }
    }

    /// Distance below full operation (2 - level).
    pub fn deficit(self) -> u32 {
        2 - self.level() as u32
    }

    pub fn is_failed(self) -> bool {
        self == StateValue::Failed
    }

    /// Whether the value is legal in the given mode (IIM allows 0 and 2 only).
    pub fn valid_in(self, mode: EvaluationMode) -> bool {
        mode == EvaluationMode::Miim || self != StateValue::Reduced
    }
}

impl fmt::Display for StateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.level())
    }
}

impl Serialize for StateValue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.level())
    }
}

impl<'de> Deserialize<'de> for StateValue {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let level = u8::deserialize(deserializer)?;
        StateValue::from_level(level)
            .ok_or_else(|| serde::de::Error::custom(format!("state level out of range: {level}")))
    }
}

/// Identifier of a network entity. Treated as an opaque string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

/// Evaluation mode for IDRs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluationMode {
    /// Three-valued mode: states {0,1,2}, connectives min-AND / max-OR / new-XOR.
    Miim,
    /// Binary mode: states {0,2}, connectives min-AND / max-OR only.
    Iim,
}

impl fmt::Display for EvaluationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluationMode::Miim => f.write_str("miim"),
            EvaluationMode::Iim => f.write_str("iim"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unresolved entity reference: {0}")]
    UnknownEntity(EntityId),
    #[error("new-XOR connective is not allowed in IIM mode")]
    XorInIim,
    #[error("state value 1 for entity {0} is not allowed in IIM mode")]
    ReducedInIim(EntityId),
    #[error("connective with no operands")]
    EmptyOperands,
}

/// min-AND: the lowest of the two input values.
pub fn min_and(a: StateValue, b: StateValue) -> StateValue {
    a.min(b)
}

/// max-OR: the highest of the two input values.
pub fn max_or(a: StateValue, b: StateValue) -> StateValue {
    a.max(b)
}

/// new-XOR over one or more inputs: the common value when all inputs agree,
/// otherwise 1 (reduced operation). A singleton list yields its sole input.
pub fn new_xor(inputs: &[StateValue]) -> Result<StateValue, EvalError> {
    let (first, rest) = inputs.split_first().ok_or(EvalError::EmptyOperands)?;
    if rest.iter().all(|v| v == first) {
        Ok(*first)
    } else {
        Ok(StateValue::Reduced)
    }
}

/// An IDR expression tree. Connective nodes hold one or more children;
/// n-ary connectives evaluate as left folds, which for all three operators
/// coincides with the n-ary definition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IdrExpression {
    Entity(EntityId),
    MinAnd(Vec<IdrExpression>),
    MaxOr(Vec<IdrExpression>),
    NewXor(Vec<IdrExpression>),
}

impl IdrExpression {
    pub fn entity(id: impl Into<String>) -> Self {
        IdrExpression::Entity(EntityId::new(id))
    }

    /// All entity ids referenced anywhere in the expression.
    pub fn references(&self) -> BTreeSet<EntityId> {
        let mut out = BTreeSet::new();
        self.collect_references(&mut out);
        out
    }

    fn collect_references(&self, out: &mut BTreeSet<EntityId>) {
        match self {
            IdrExpression::Entity(id) => {
                out.insert(id.clone());
            }
            IdrExpression::MinAnd(children)
            | IdrExpression::MaxOr(children)
            | IdrExpression::NewXor(children) => {
                for child in children {
                    child.collect_references(out);
                }
            }
        }
    }

    /// Checks the structural constraints of the given mode without evaluating.
    pub fn check_mode(&self, mode: EvaluationMode) -> Result<(), EvalError> {
        match self {
            IdrExpression::Entity(_) => Ok(()),
            IdrExpression::NewXor(children) => {
                if mode == EvaluationMode::Iim {
                    return Err(EvalError::XorInIim);
                }
                if children.is_empty() {
                    return Err(EvalError::EmptyOperands);
                }
                children.iter().try_for_each(|c| c.check_mode(mode))
            }
            IdrExpression::MinAnd(children) | IdrExpression::MaxOr(children) => {
                if children.is_empty() {
                    return Err(EvalError::EmptyOperands);
                }
                children.iter().try_for_each(|c| c.check_mode(mode))
            }
        }
    }

    /// Bottom-up evaluation against a state lookup.
    pub fn eval<F>(&self, lookup: &F, mode: EvaluationMode) -> Result<StateValue, EvalError>
    where
        F: Fn(&EntityId) -> Option<StateValue>,
    {
        match self {
            IdrExpression::Entity(id) => {
                let value = lookup(id).ok_or_else(|| EvalError::UnknownEntity(id.clone()))?;
                if !value.valid_in(mode) {
                    return Err(EvalError::ReducedInIim(id.clone()));
                }
                Ok(value)
            }
            IdrExpression::MinAnd(children) => fold_eval(children, lookup, mode, min_and),
            IdrExpression::MaxOr(children) => fold_eval(children, lookup, mode, max_or),
            IdrExpression::NewXor(children) => {
                if mode == EvaluationMode::Iim {
                    return Err(EvalError::XorInIim);
                }
                let mut values = Vec::with_capacity(children.len());
                for child in children {
                    values.push(child.eval(lookup, mode)?);
                }
                new_xor(&values)
            }
        }
    }

    /// Removes every reference to a failed entity. Connective nodes whose
    /// children all vanish are removed, and a connective left with a single
    /// child collapses to that child. Returns `None` when the whole
    /// expression vanishes.
    pub fn prune(&self, failed: &BTreeSet<EntityId>) -> Option<IdrExpression> {
        match self {
            IdrExpression::Entity(id) => {
                if failed.contains(id) {
                    None
                } else {
                    Some(self.clone())
                }
            }
            IdrExpression::MinAnd(children) => {
                prune_children(children, failed).map(collapse(IdrExpression::MinAnd))
            }
            IdrExpression::MaxOr(children) => {
                prune_children(children, failed).map(collapse(IdrExpression::MaxOr))
            }
            IdrExpression::NewXor(children) => {
                prune_children(children, failed).map(collapse(IdrExpression::NewXor))
            }
        }
    }
}

fn fold_eval<F>(
    children: &[IdrExpression],
    lookup: &F,
    mode: EvaluationMode,
    op: fn(StateValue, StateValue) -> StateValue,
) -> Result<StateValue, EvalError>
where
    F: Fn(&EntityId) -> Option<StateValue>,
{
    let (first, rest) = children.split_first().ok_or(EvalError::EmptyOperands)?;
    let mut acc = first.eval(lookup, mode)?;
    for child in rest {
        acc = op(acc, child.eval(lookup, mode)?);
    }
    Ok(acc)
}

fn prune_children(
    children: &[IdrExpression],
    failed: &BTreeSet<EntityId>,
) -> Option<Vec<IdrExpression>> {
    let kept: Vec<IdrExpression> = children.iter().filter_map(|c| c.prune(failed)).collect();
    if kept.is_empty() {
        None
    } else {
        Some(kept)
    }
}

fn collapse(
    make: fn(Vec<IdrExpression>) -> IdrExpression,
) -> impl Fn(Vec<IdrExpression>) -> IdrExpression {
    move |mut kept| {
        if kept.len() == 1 {
            kept.pop().unwrap()
        } else {
            make(kept)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [StateValue; 3] = [StateValue::Failed, StateValue::Reduced, StateValue::Full];

    fn s(level: u8) -> StateValue {
        StateValue::from_level(level).unwrap()
    }

    // The full nine-row operator table, as (a, b, min-AND, max-OR, new-XOR).
    const TABLE: [(u8, u8, u8, u8, u8); 9] = [
        (2, 2, 2, 2, 2),
        (2, 1, 1, 2, 1),
        (2, 0, 0, 2, 1),
        (1, 2, 1, 2, 1),
        (1, 1, 1, 1, 1),
        (1, 0, 0, 1, 1),
        (0, 2, 0, 2, 1),
        (0, 1, 0, 1, 1),
        (0, 0, 0, 0, 0),
    ];

    #[test]
    fn operator_table_exact() {
        for &(a, b, and, or, xor) in &TABLE {
            assert_eq!(min_and(s(a), s(b)), s(and), "min_and({a},{b})");
            assert_eq!(max_or(s(a), s(b)), s(or), "max_or({a},{b})");
            assert_eq!(new_xor(&[s(a), s(b)]).unwrap(), s(xor), "new_xor({a},{b})");
        }
    }

    #[test]
    fn operators_commutative_associative_idempotent() {
        for &a in &ALL {
            assert_eq!(min_and(a, a), a);
            assert_eq!(max_or(a, a), a);
            for &b in &ALL {
                assert_eq!(min_and(a, b), min_and(b, a));
                assert_eq!(max_or(a, b), max_or(b, a));
                for &c in &ALL {
                    assert_eq!(min_and(min_and(a, b), c), min_and(a, min_and(b, c)));
                    assert_eq!(max_or(max_or(a, b), c), max_or(a, max_or(b, c)));
                }
            }
        }
    }

    #[test]
    fn operators_monotone() {
        for &a in &ALL {
            for &a2 in &ALL {
                if a > a2 {
                    continue;
                }
                for &b in &ALL {
                    for &b2 in &ALL {
                        if b > b2 {
                            continue;
                        }
                        assert!(min_and(a, b) <= min_and(a2, b2));
                        assert!(max_or(a, b) <= max_or(a2, b2));
                        assert!(
                            new_xor(&[a, b]).unwrap() <= new_xor(&[a2, b2]).unwrap(),
                            "new_xor not monotone at ({a:?},{b:?}) vs ({a2:?},{b2:?})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn new_xor_left_fold_matches_nary() {
        // Every input sequence of length 1..=4.
        fn sequences(len: usize) -> Vec<Vec<StateValue>> {
            if len == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for tail in sequences(len - 1) {
                for &v in &ALL {
                    let mut seq = vec![v];
                    seq.extend(tail.iter().copied());
                    out.push(seq);
                }
            }
            out
        }
        let mut cases = 0;
        for len in 1..=4 {
            for seq in sequences(len) {
                let folded = seq[1..]
                    .iter()
                    .fold(seq[0], |acc, &v| new_xor(&[acc, v]).unwrap());
                assert_eq!(folded, new_xor(&seq).unwrap(), "sequence {seq:?}");
                cases += 1;
            }
        }
        assert_eq!(cases, 3 + 9 + 27 + 81);
    }

    #[test]
    fn new_xor_singleton_and_empty() {
        for &a in &ALL {
            assert_eq!(new_xor(&[a]).unwrap(), a);
        }
        assert_eq!(new_xor(&[]), Err(EvalError::EmptyOperands));
    }

    fn lookup_of(pairs: &[(&str, u8)]) -> impl Fn(&EntityId) -> Option<StateValue> {
        let map: std::collections::BTreeMap<EntityId, StateValue> = pairs
            .iter()
            .map(|&(id, level)| (EntityId::from(id), s(level)))
            .collect();
        move |id: &EntityId| map.get(id).copied()
    }

    /// ((Cj . Pa) + (Ck . Pb)) ^ Cl
    fn example_miim_idr() -> IdrExpression {
        IdrExpression::NewXor(vec![
            IdrExpression::MaxOr(vec![
                IdrExpression::MinAnd(vec![
                    IdrExpression::entity("Cj"),
                    IdrExpression::entity("Pa"),
                ]),
                IdrExpression::MinAnd(vec![
                    IdrExpression::entity("Ck"),
                    IdrExpression::entity("Pb"),
                ]),
            ]),
            IdrExpression::entity("Cl"),
        ])
    }

    /// ((Cj . Pa) + (Ck . Pb)) . Cl
    fn example_iim_idr() -> IdrExpression {
        IdrExpression::MinAnd(vec![
            IdrExpression::MaxOr(vec![
                IdrExpression::MinAnd(vec![
                    IdrExpression::entity("Cj"),
                    IdrExpression::entity("Pa"),
                ]),
                IdrExpression::MinAnd(vec![
                    IdrExpression::entity("Ck"),
                    IdrExpression::entity("Pb"),
                ]),
            ]),
            IdrExpression::entity("Cl"),
        ])
    }

    #[test]
    fn eval_example_idr_both_modes() {
        let lookup = lookup_of(&[("Cj", 2), ("Pa", 2), ("Ck", 2), ("Pb", 2), ("Cl", 0)]);
        assert_eq!(
            example_miim_idr()
                .eval(&lookup, EvaluationMode::Miim)
                .unwrap(),
            s(1)
        );
        assert_eq!(
            example_iim_idr()
                .eval(&lookup, EvaluationMode::Iim)
                .unwrap(),
            s(0)
        );
    }

    #[test]
    fn eval_single_ref_is_identity() {
        let lookup = lookup_of(&[("X", 2)]);
        for mode in [EvaluationMode::Miim, EvaluationMode::Iim] {
            assert_eq!(
                IdrExpression::entity("X").eval(&lookup, mode).unwrap(),
                s(2)
            );
        }
    }

    #[test]
    fn eval_unknown_entity_names_the_id() {
        let lookup = lookup_of(&[("X", 2)]);
        let err = IdrExpression::entity("Q9")
            .eval(&lookup, EvaluationMode::Miim)
            .unwrap_err();
        assert_eq!(err, EvalError::UnknownEntity(EntityId::from("Q9")));
    }

    #[test]
    fn eval_mode_violations() {
        let lookup = lookup_of(&[("X", 1), ("Y", 2)]);
        let xor =
            IdrExpression::NewXor(vec![IdrExpression::entity("Y"), IdrExpression::entity("Y")]);
        assert_eq!(
            xor.eval(&lookup, EvaluationMode::Iim).unwrap_err(),
            EvalError::XorInIim
        );
        assert_eq!(
            IdrExpression::entity("X")
                .eval(&lookup, EvaluationMode::Iim)
                .unwrap_err(),
            EvalError::ReducedInIim(EntityId::from("X"))
        );
    }

    #[test]
    fn iim_stays_binary() {
        // min/max over {0,2} never produces 1.
        let bin = [StateValue::Failed, StateValue::Full];
        for &a in &bin {
            for &b in &bin {
                for &c in &bin {
                    let lookup = lookup_of(&[("a", a.level()), ("b", b.level()), ("c", c.level())]);
                    let expr = IdrExpression::MaxOr(vec![
                        IdrExpression::MinAnd(vec![
                            IdrExpression::entity("a"),
                            IdrExpression::entity("b"),
                        ]),
                        IdrExpression::entity("c"),
                    ]);
                    let v = expr.eval(&lookup, EvaluationMode::Iim).unwrap();
                    assert!(v != StateValue::Reduced);
                }
            }
        }
    }

    #[test]
    fn prune_drops_failed_branch() {
        let expr = example_miim_idr();
        let failed: BTreeSet<EntityId> = [EntityId::from("Cl")].into();
        let pruned = expr.prune(&failed).unwrap();
        // The outer new-XOR collapses onto its surviving max-OR child.
        assert_eq!(
            pruned,
            IdrExpression::MaxOr(vec![
                IdrExpression::MinAnd(vec![
                    IdrExpression::entity("Cj"),
                    IdrExpression::entity("Pa"),
                ]),
                IdrExpression::MinAnd(vec![
                    IdrExpression::entity("Ck"),
                    IdrExpression::entity("Pb"),
                ]),
            ])
        );
    }

    #[test]
    fn prune_empty_set_is_identity() {
        let expr = example_miim_idr();
        assert_eq!(expr.prune(&BTreeSet::new()), Some(expr));
    }

    #[test]
    fn prune_total_removal() {
        let expr = IdrExpression::entity("Cl");
        let failed: BTreeSet<EntityId> = [EntityId::from("Cl")].into();
        assert_eq!(expr.prune(&failed), None);
    }

    #[test]
    fn prune_cascades_through_empty_connectives() {
        // (a . b) + c with {a, b} failed leaves just c.
        let expr = IdrExpression::MaxOr(vec![
            IdrExpression::MinAnd(vec![IdrExpression::entity("a"), IdrExpression::entity("b")]),
            IdrExpression::entity("c"),
        ]);
        let failed: BTreeSet<EntityId> = [EntityId::from("a"), EntityId::from("b")].into();
        assert_eq!(expr.prune(&failed), Some(IdrExpression::entity("c")));
    }

    #[test]
    fn prune_output_never_references_failed() {
        let expr = example_miim_idr();
        let refs = expr.references();
        for id in &refs {
            let failed: BTreeSet<EntityId> = [id.clone()].into();
            if let Some(pruned) = expr.prune(&failed) {
                assert!(!pruned.references().contains(id));
            }
        }
    }
}
