use std::collections::BTreeSet;

use ftbb::treecode::{contract, merge_reports, select_recovery, termination_detected, CompletedTable};
use ftbb::trees::{gen_random_tree, BasicTree, GenParams, NodeIdx};
use ftbb::{sequential_solve, ProblemCode, SelectionRule};
use proptest::prelude::*;
use proptest::sample::subsequence;

fn small_tree(seed: u64) -> BasicTree {
    gen_random_tree(seed, 60, &GenParams::default()).unwrap()
}

/// Independent coverage: a node is done when some completed code sits at or
/// above it, or when both of its children are done.
fn covered_by(tree: &BasicTree, done: &BTreeSet<NodeIdx>, v: NodeIdx) -> bool {
    let mut a = Some(v);
    while let Some(u) = a {
        if done.contains(&u) {
            return true;
        }
        a = tree.parent(u);
    }
    match tree.children(v) {
        Some([l, r]) => covered_by(tree, done, l) && covered_by(tree, done, r),
        None => false,
    }
}

fn tree_and_subset() -> impl Strategy<Value = (BasicTree, Vec<NodeIdx>)> {
    (0u64..500).prop_flat_map(|seed| {
        let t = small_tree(seed);
        let all: Vec<NodeIdx> = (0..t.len()).collect();
        let n = all.len();
        (Just(t), subsequence(all, 0..=n.min(12)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn text_form_round_trips(seed in 0u64..500, pick in any::<prop::sample::Index>()) {
        let t = small_tree(seed);
        let code = t.code_of(pick.index(t.len()));
        let back: ProblemCode = code.to_string().parse().unwrap();
        prop_assert_eq!(back, code);
    }

    #[test]
    fn contraction_matches_coverage_oracle((t, picked) in tree_and_subset()) {
        let done: BTreeSet<NodeIdx> = picked.iter().copied().collect();
        let table = contract(picked.iter().map(|&v| t.code_of(v)));
        for v in 0..t.len() {
            prop_assert_eq!(table.covers(&t.code_of(v)), covered_by(&t, &done, v), "node {}", v);
        }
        prop_assert_eq!(termination_detected(&table), covered_by(&t, &done, t.root()));
    }

    #[test]
    fn table_is_an_antichain_without_sibling_pairs((t, picked) in tree_and_subset()) {
        let table = contract(picked.iter().map(|&v| t.code_of(v)));
        let codes = table.to_vec();
        for a in &codes {
            for b in &codes {
                if a != b {
                    prop_assert!(!a.is_ancestor_of(b));
                }
            }
            if !a.is_root() {
                prop_assert!(!table.contains(&a.sibling().unwrap()));
            }
        }
    }

    #[test]
    fn merge_equals_contract_of_union((t, picked) in tree_and_subset(), split in 0usize..13) {
        let codes: Vec<ProblemCode> = picked.iter().map(|&v| t.code_of(v)).collect();
        let cut = split.min(codes.len());
        let (merged, _) = merge_reports(&contract(codes[..cut].to_vec()), codes[cut..].to_vec());
        prop_assert_eq!(merged, contract(codes.clone()));
        let (again, _) = merge_reports(&contract(codes.clone()), codes.clone());
        prop_assert_eq!(again, contract(codes));
    }

    #[test]
    fn recovery_names_open_work((t, picked) in tree_and_subset(), last in any::<prop::sample::Index>()) {
        let table = contract(picked.iter().map(|&v| t.code_of(v)));
        let last = t.code_of(last.index(t.len()));
        match select_recovery(&table, Some(&last)) {
            Some(code) => {
                prop_assert!(!table.covers(&code));
                prop_assert!(t.lookup(&code).is_some(), "{} is in the tree", code);
            }
            None => prop_assert!(table.is_empty() || termination_detected(&table)),
        }
    }

    #[test]
    fn oracle_agrees_across_rules(seed in 0u64..10_000) {
        let t = gen_random_tree(seed, 300, &GenParams::default()).unwrap();
        let plain = sequential_solve(&t, SelectionRule::DepthFirst, false);
        prop_assert_eq!(plain.expanded_count, t.len());
        for rule in [SelectionRule::DepthFirst, SelectionRule::BestFirst] {
            let pruned = sequential_solve(&t, rule, true);
            prop_assert_eq!(pruned.optimum, plain.optimum);
            prop_assert!(pruned.expanded_count <= plain.expanded_count);
        }
    }
}

#[test]
fn every_leaf_contracts_to_the_root() {
    for seed in 0..20 {
        let t = gen_random_tree(seed, 500, &GenParams::default()).unwrap();
        let table = contract(t.leaves().map(|v| t.code_of(v)));
        assert_eq!(table, CompletedTable::complete());
    }
}
