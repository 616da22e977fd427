//! Branch-and-bound operators over a [`BasicTree`] and the sequential solver.
//!
//! Minimization is the fixed sense: a subproblem is eliminated when its bound
//! is not better than the incumbent (`bound >= best`).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treecode::ProblemCode;
use crate::trees::{BasicTree, NodeIdx};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BnbError {
    #[error("unknown subproblem {0}")]
    UnknownSubproblem(ProblemCode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    #[default]
    DepthFirst,
    BestFirst,
}

impl std::str::FromStr for SelectionRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "depth-first" => Ok(Self::DepthFirst),
            "best-first" => Ok(Self::BestFirst),
            other => Err(format!("unknown selection rule {other:?} (expected depth-first or best-first)")),
        }
    }
}

/// Incumbent value `U` and the process that found it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestKnown {
    pub value: f64,
    pub source: Option<usize>,
}

impl Default for BestKnown {
    fn default() -> Self {
        Self { value: f64::INFINITY, source: None }
    }
}

impl BestKnown {
    /// Adopts `value` if it is strictly better. Returns whether it changed.
    pub fn offer(&mut self, value: f64, source: Option<usize>) -> bool {
        if value < self.value {
            self.value = value;
            self.source = source;
            true
        } else {
            false
        }
    }

    pub fn optimum(&self) -> Option<f64> {
        self.value.is_finite().then_some(self.value)
    }
}

/// True when a subproblem with this bound cannot beat the incumbent.
pub fn eliminate_check(bound: f64, best: &BestKnown) -> bool {
    bound >= best.value
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub code: ProblemCode,
    pub node: NodeIdx,
    pub bound: f64,
    /// Set when the entry was recreated by failure recovery.
    pub recovered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Priority(f64);

impl Eq for Priority {}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Pool of active problems, ordered by the selection rule.
///
/// The first key is the next problem to branch from; the last key is the one
/// this process would pick last, which is what it hands out on work grants.
#[derive(Debug, Clone)]
pub struct ActivePool {
    rule: SelectionRule,
    entries: BTreeMap<(Priority, ProblemCode), PoolEntry>,
}

impl ActivePool {
    pub fn new(rule: SelectionRule) -> Self {
        Self { rule, entries: BTreeMap::new() }
    }

    pub fn rule(&self) -> SelectionRule {
        self.rule
    }

    fn key(&self, code: &ProblemCode, bound: f64) -> (Priority, ProblemCode) {
        let p = match self.rule {
            SelectionRule::DepthFirst => -(code.len() as f64),
            SelectionRule::BestFirst => bound,
        };
        (Priority(p), code.clone())
    }

    /// Adds an entry; returns false if the code is already pooled.
    pub fn insert(&mut self, entry: PoolEntry) -> bool {
        let key = self.key(&entry.code, entry.bound);
        if self.entries.contains_key(&key) {
            return false;
        }
        self.entries.insert(key, entry);
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, code: &ProblemCode, bound: f64) -> bool {
        self.entries.contains_key(&self.key(code, bound))
    }

    pub fn iter(&self) -> impl Iterator<Item = &PoolEntry> + '_ {
        self.entries.values()
    }

    /// Removes and returns the next entry under the selection rule.
    pub fn select_next(&mut self) -> Option<PoolEntry> {
        self.entries.pop_first().map(|(_, e)| e)
    }

    /// Removes up to `count` entries in inverse selection order.
    pub fn take_last(&mut self, count: usize) -> Vec<PoolEntry> {
        let mut out = Vec::with_capacity(count.min(self.entries.len()));
        while out.len() < count {
            match self.entries.pop_last() {
                Some((_, e)) => out.push(e),
                None => break,
            }
        }
        out
    }

    /// Drops every entry for which `pred` holds and returns them.
    pub fn remove_where<F: FnMut(&PoolEntry) -> bool>(&mut self, mut pred: F) -> Vec<PoolEntry> {
        let doomed: Vec<_> = self.entries.iter().filter(|(_, e)| pred(e)).map(|(k, _)| k.clone()).collect();
        doomed.into_iter().filter_map(|k| self.entries.remove(&k)).collect()
    }
}

/// Free-function form of [`ActivePool::select_next`].
pub fn select_next(pool: &mut ActivePool) -> Option<(ProblemCode, NodeIdx)> {
    pool.select_next().map(|e| (e.code, e.node))
}

/// Children of the subproblem named by `code`, or an empty list for a leaf.
pub fn decompose(tree: &BasicTree, code: &ProblemCode) -> Result<Vec<(ProblemCode, NodeIdx)>, BnbError> {
    let v = tree.lookup(code).ok_or_else(|| BnbError::UnknownSubproblem(code.clone()))?;
    Ok(children_of(tree, code, v))
}

pub(crate) fn children_of(tree: &BasicTree, code: &ProblemCode, v: NodeIdx) -> Vec<(ProblemCode, NodeIdx)> {
    match tree.children(v) {
        None => Vec::new(),
        Some(kids) => kids
            .iter()
            .map(|&k| {
                let (var, bit) = tree.node(k).branch.expect("child has a branch");
                (code.child(var, bit), k)
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialOutcome {
    pub optimum: Option<f64>,
    pub expanded_count: usize,
    pub total_time: f64,
}

/// Runs Decompose/Bound/Select/Eliminate on one processor until the pool is
/// exhausted. Elimination applies at insertion and again at selection (the
/// incumbent may have improved). A node's cost is charged when it is bounded
/// and expanded; feasible nodes update the incumbent once charged.
pub fn sequential_solve(tree: &BasicTree, rule: SelectionRule, pruning: bool) -> SequentialOutcome {
    let mut best = BestKnown::default();
    let mut pool = ActivePool::new(rule);
    let root = tree.root();
    pool.insert(PoolEntry { code: ProblemCode::root(), node: root, bound: tree.node(root).bound, recovered: false });
    let mut expanded_count = 0;
    let mut total_time = 0.0;
    while let Some(entry) = pool.select_next() {
        let node = tree.node(entry.node);
        if pruning && eliminate_check(node.bound, &best) {
            continue;
        }
        expanded_count += 1;
        total_time += node.time_cost;
        if node.feasible {
            best.offer(node.bound, None);
        }
        for (code, k) in children_of(tree, &entry.code, entry.node) {
            let bound = tree.node(k).bound;
            if pruning && eliminate_check(bound, &best) {
                continue;
            }
            pool.insert(PoolEntry { code, node: k, bound, recovered: false });
        }
    }
    SequentialOutcome { optimum: best.optimum(), expanded_count, total_time }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{gen_random_tree, parse_basic_tree_str, GenParams};

    const THREE: &str = "bbtree v1\n0 -1 -1 -1 1.0 0.5 0\n1 0 1 0 5.0 0.25 1\n2 0 1 1 3.0 0.25 1\n";

    fn entry(code: &ProblemCode, bound: f64) -> PoolEntry {
        PoolEntry { code: code.clone(), node: 0, bound, recovered: false }
    }

    #[test]
    fn decompose_examples() {
        let t = parse_basic_tree_str(THREE).unwrap();
        let kids = decompose(&t, &ProblemCode::root()).unwrap();
        let codes: Vec<String> = kids.iter().map(|(c, _)| c.to_string()).collect();
        assert_eq!(codes, ["x1=0", "x1=1"]);
        assert!(decompose(&t, &"x1=1".parse().unwrap()).unwrap().is_empty());
        let err = decompose(&t, &"x9=0".parse().unwrap()).unwrap_err();
        assert_eq!(err.to_string(), "unknown subproblem x9=0");
    }

    #[test]
    fn elimination_is_inclusive() {
        let best = BestKnown { value: 10.0, source: Some(0) };
        assert!(eliminate_check(10.0, &best));
        assert!(!eliminate_check(9.5, &best));
        assert!(!eliminate_check(1e300, &BestKnown::default()));
    }

    #[test]
    fn best_known_only_improves() {
        let mut b = BestKnown::default();
        assert!(b.offer(5.0, Some(1)));
        assert!(!b.offer(5.0, Some(2)));
        assert!(!b.offer(7.0, Some(2)));
        assert!(b.offer(4.0, Some(3)));
        assert_eq!(b, BestKnown { value: 4.0, source: Some(3) });
    }

    #[test]
    fn select_next_rules() {
        let shallow = ProblemCode::from_bits(&[(1, 0)]);
        let deep = ProblemCode::from_bits(&[(1, 1), (2, 0)]);
        for (rule, want) in [(SelectionRule::DepthFirst, &deep), (SelectionRule::BestFirst, &shallow)] {
            let mut pool = ActivePool::new(rule);
            pool.insert(entry(&shallow, 5.0));
            pool.insert(entry(&deep, 9.0));
            assert_eq!(select_next(&mut pool).unwrap().0, *want);
        }
        assert!(select_next(&mut ActivePool::new(SelectionRule::DepthFirst)).is_none());
    }

    #[test]
    fn pool_ties_break_by_code_order() {
        let a = ProblemCode::from_bits(&[(1, 0)]);
        let b = ProblemCode::from_bits(&[(1, 1)]);
        let mut pool = ActivePool::new(SelectionRule::BestFirst);
        pool.insert(entry(&b, 2.0));
        pool.insert(entry(&a, 2.0));
        assert!(!pool.insert(entry(&a, 2.0)));
        assert_eq!(pool.select_next().unwrap().code, a);
    }

    #[test]
    fn take_last_is_inverse_order() {
        let mut pool = ActivePool::new(SelectionRule::DepthFirst);
        let codes = [
            ProblemCode::from_bits(&[(1, 1)]),
            ProblemCode::from_bits(&[(1, 0), (2, 1)]),
            ProblemCode::from_bits(&[(1, 0), (2, 0), (3, 1)]),
        ];
        for c in &codes {
            pool.insert(entry(c, 0.0));
        }
        let given: Vec<_> = pool.take_last(2).into_iter().map(|e| e.code).collect();
        assert_eq!(given, vec![codes[0].clone(), codes[1].clone()]);
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn sequential_examples() {
        let t = parse_basic_tree_str(THREE).unwrap();
        for rule in [SelectionRule::DepthFirst, SelectionRule::BestFirst] {
            let out = sequential_solve(&t, rule, true);
            assert_eq!(out.optimum, Some(3.0));
            let full = sequential_solve(&t, rule, false);
            assert_eq!(full.expanded_count, 3);
            assert_eq!(full.total_time, 1.0);
        }
    }

    #[test]
    fn no_feasible_node_means_no_optimum() {
        let t = parse_basic_tree_str("bbtree v1\n0 -1 -1 -1 1.0 0.5 0\n").unwrap();
        assert_eq!(sequential_solve(&t, SelectionRule::DepthFirst, true).optimum, None);
    }

    fn exhaustive_optimum(t: &BasicTree) -> Option<f64> {
        t.nodes().iter().filter(|n| n.feasible).map(|n| n.bound).reduce(f64::min)
    }

    #[test]
    fn pruned_matches_exhaustive_scan() {
        for seed in 0..20 {
            let t = gen_random_tree(seed, 1000, &GenParams::default()).unwrap();
            let want = exhaustive_optimum(&t);
            for rule in [SelectionRule::DepthFirst, SelectionRule::BestFirst] {
                let pruned = sequential_solve(&t, rule, true);
                let full = sequential_solve(&t, rule, false);
                assert_eq!(pruned.optimum, want);
                assert_eq!(full.optimum, want);
                assert_eq!(full.expanded_count, t.len());
                assert!(pruned.expanded_count <= full.expanded_count);
            }
        }
    }
}
