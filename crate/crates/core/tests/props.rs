//! Property tests for the expression syntax and the operator algebra.

use std::collections::BTreeSet;

use proptest::prelude::*;

use miim_core::algebra::{EntityId, IdrExpression, StateValue};
use miim_core::dsl::{parse_expr, parse_network, serialize_expr, tokenize};
use miim_core::EvaluationMode;

fn arb_expr() -> impl Strategy<Value = IdrExpression> {
    let leaf = "[A-Za-z][A-Za-z0-9_]{0,6}".prop_map(IdrExpression::entity);
    leaf.prop_recursive(4, 32, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(IdrExpression::MinAnd),
            prop::collection::vec(inner.clone(), 2..4).prop_map(IdrExpression::MaxOr),
            prop::collection::vec(inner, 2..4).prop_map(IdrExpression::NewXor),
        ]
    })
}

proptest! {
    #[test]
    fn rendered_expressions_reparse_identically(expr in arb_expr()) {
        let text = serialize_expr(&expr);
        prop_assert_eq!(parse_expr(&text).unwrap(), expr);
    }

    #[test]
    fn tokenizer_is_total(source in ".*") {
        let _ = tokenize(&source);
    }

    #[test]
    fn network_parsing_is_total(source in ".*") {
        let _ = parse_network(&source);
    }

    #[test]
    fn pruning_removes_every_failed_reference(expr in arb_expr(), pick in any::<prop::sample::Index>()) {
        let refs: Vec<EntityId> = expr.references().into_iter().collect();
        let victim = refs[pick.index(refs.len())].clone();
        let failed: BTreeSet<EntityId> = [victim.clone()].into();
        if let Some(pruned) = expr.prune(&failed) {
            prop_assert!(!pruned.references().contains(&victim));
        }
    }

    #[test]
    fn evaluation_is_monotone_in_the_state_lookup(
        expr in arb_expr(),
        seed in any::<u64>(),
    ) {
        // Assign every referenced entity a base level and a raised level;
        // the evaluation must not decrease.
        let refs: Vec<EntityId> = expr.references().into_iter().collect();
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 33) as u8
        };
        let low: Vec<StateValue> = refs.iter().map(|_| StateValue::from_level(next() % 3).unwrap()).collect();
        let high: Vec<StateValue> = low
            .iter()
            .map(|v| StateValue::from_level((v.level() + next() % (3 - v.level())).min(2)).unwrap())
            .collect();
        let table_of = |values: &[StateValue]| {
            let map: std::collections::BTreeMap<EntityId, StateValue> =
                refs.iter().cloned().zip(values.iter().copied()).collect();
            map
        };
        let low_map = table_of(&low);
        let high_map = table_of(&high);
        let a = expr.eval(&|id: &EntityId| low_map.get(id).copied(), EvaluationMode::Miim).unwrap();
        let b = expr.eval(&|id: &EntityId| high_map.get(id).copied(), EvaluationMode::Miim).unwrap();
        prop_assert!(a <= b);
    }
}
