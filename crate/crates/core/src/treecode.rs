//! Subproblem codes and the algebra over sets of completed codes.
//!
//! A [`ProblemCode`] is the root-to-node path of a subproblem: one
//! `(condition variable, bit)` pair per branching decision. Sets of completed
//! codes are kept in contracted form by [`CompletedTable`]: no member is an
//! ancestor of another, and no two members are siblings. A table that
//! contracts to the root code means the whole search tree is complete.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a condition variable.
pub type VarId = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("root has no parent")]
    RootHasNoParent,
    #[error("root has no sibling")]
    RootHasNoSibling,
    #[error("variable x{0} assigned twice along one code")]
    RepeatedVariable(VarId),
    #[error("malformed code text {text:?}: {reason}")]
    Malformed { text: String, reason: String },
}

/// One branching decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub var: VarId,
    pub bit: bool,
}

impl Pair {
    pub fn new(var: VarId, bit: bool) -> Self {
        Self { var, bit }
    }
}

/// Path code of a subproblem. The empty code is the root problem.
///
/// Ordering is lexicographic over `(var, bit)` pairs, so an ancestor always
/// sorts before its descendants and the descendants of a code form one
/// contiguous run directly after it.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProblemCode(Vec<Pair>);

impl ProblemCode {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    /// Builds a code from pairs, rejecting paths that reuse a variable.
    pub fn from_pairs(pairs: Vec<Pair>) -> Result<Self, CodeError> {
        for (i, p) in pairs.iter().enumerate() {
            if pairs[..i].iter().any(|q| q.var == p.var) {
                return Err(CodeError::RepeatedVariable(p.var));
            }
        }
        Ok(Self(pairs))
    }

    /// Convenience constructor for literals such as `[(1, 0), (2, 1)]`.
    ///
    /// Panics on a repeated variable.
    pub fn from_bits(pairs: &[(VarId, u8)]) -> Self {
        Self::from_pairs(pairs.iter().map(|&(v, b)| Pair::new(v, b != 0)).collect())
            .expect("literal code repeats a variable")
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<Pair> {
        self.0.last().copied()
    }

    /// Extends the code by one decision. The caller guarantees `var` is fresh
    /// along this path (tree invariants do).
    pub fn child(&self, var: VarId, bit: bool) -> Self {
        let mut pairs = Vec::with_capacity(self.0.len() + 1);
        pairs.extend_from_slice(&self.0);
        pairs.push(Pair::new(var, bit));
        Self(pairs)
    }

    pub fn parent(&self) -> Result<Self, CodeError> {
        match self.0.split_last() {
            Some((_, rest)) => Ok(Self(rest.to_vec())),
            None => Err(CodeError::RootHasNoParent),
        }
    }

    /// Same path with the final bit flipped.
    pub fn sibling(&self) -> Result<Self, CodeError> {
        let mut pairs = self.0.clone();
        match pairs.last_mut() {
            Some(last) => {
                last.bit = !last.bit;
                Ok(Self(pairs))
            }
            None => Err(CodeError::RootHasNoSibling),
        }
    }

    /// True iff `self` is a strict prefix of `other`.
    pub fn is_ancestor_of(&self, other: &ProblemCode) -> bool {
        self.0.len() < other.0.len() && other.0.starts_with(&self.0)
    }

    /// True iff `self` equals `other` or is one of its ancestors.
    pub fn covers(&self, other: &ProblemCode) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn common_prefix_len(&self, other: &ProblemCode) -> usize {
        self.0.iter().zip(&other.0).take_while(|(a, b)| a == b).count()
    }
}

/// Free-function form of [`ProblemCode::is_ancestor_of`].
pub fn is_ancestor(a: &ProblemCode, b: &ProblemCode) -> bool {
    a.is_ancestor_of(b)
}

impl fmt::Display for ProblemCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ROOT");
        }
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "x{}={}", p.var, u8::from(p.bit))?;
        }
        Ok(())
    }
}

impl FromStr for ProblemCode {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = |reason: &str| CodeError::Malformed { text: s.to_string(), reason: reason.to_string() };
        if s == "ROOT" {
            return Ok(Self::root());
        }
        let mut pairs = Vec::new();
        for part in s.split('.') {
            let rest = part.strip_prefix('x').ok_or_else(|| malformed("pair must start with 'x'"))?;
            let (var, bit) = rest.split_once('=').ok_or_else(|| malformed("missing '='"))?;
            if var.is_empty() || !var.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed("variable id must be decimal"));
            }
            let var: VarId = var.parse().map_err(|_| malformed("variable id out of range"))?;
            let bit = match bit {
                "0" => false,
                "1" => true,
                _ => return Err(malformed("bit must be 0 or 1")),
            };
            pairs.push(Pair::new(var, bit));
        }
        Self::from_pairs(pairs)
    }
}

impl Serialize for ProblemCode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProblemCode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A contracted set of completed codes.
///
/// Every mutating operation maintains the contraction invariants and returns
/// how many codes it touched, which the simulator charges as contraction time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompletedTable {
    codes: BTreeSet<ProblemCode>,
    pairs: usize,
}

impl CompletedTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// The table `{ROOT}`.
    pub fn complete() -> Self {
        let mut t = Self::new();
        t.codes.insert(ProblemCode::root());
        t
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Total number of `(var, bit)` pairs over all codes.
    pub fn pair_count(&self) -> usize {
        self.pairs
    }

    pub fn iter(&self) -> impl Iterator<Item = &ProblemCode> + '_ {
        self.codes.iter()
    }

    pub fn contains(&self, code: &ProblemCode) -> bool {
        self.codes.contains(code)
    }

    pub fn to_vec(&self) -> Vec<ProblemCode> {
        self.codes.iter().cloned().collect()
    }

    /// True iff `code` or one of its ancestors is in the table.
    ///
    /// In an antichain the only member that can sort between a covering
    /// ancestor and `code` is the ancestor itself, so the predecessor lookup
    /// is exact.
    pub fn covers(&self, code: &ProblemCode) -> bool {
        self.codes.range(..=code).next_back().is_some_and(|pred| pred.covers(code))
    }

    /// Inserts one completed code and restores contraction incrementally.
    ///
    /// Returns the code that ended up in the table (the highest ancestor
    /// reached by sibling merges), or `None` if `code` was already covered,
    /// together with the number of codes touched.
    pub fn insert(&mut self, code: ProblemCode) -> (Option<ProblemCode>, usize) {
        if self.covers(&code) {
            return (None, 1);
        }
        let mut touched = 1;
        let descendants: Vec<ProblemCode> = self.codes.range(&code..).take_while(|c| code.covers(c)).cloned().collect();
        for d in descendants {
            touched += 1;
            self.remove_code(&d);
        }
        let mut code = code;
        while let Ok(sib) = code.sibling() {
            if !self.codes.contains(&sib) {
                break;
            }
            touched += 1;
            self.remove_code(&sib);
            code.0.pop();
        }
        self.pairs += code.len();
        self.codes.insert(code.clone());
        (Some(code), touched)
    }

    fn remove_code(&mut self, code: &ProblemCode) {
        if self.codes.remove(code) {
            self.pairs -= code.len();
        }
    }

    /// Removes and returns every code, leaving the table empty.
    pub fn drain(&mut self) -> Vec<ProblemCode> {
        self.pairs = 0;
        std::mem::take(&mut self.codes).into_iter().collect()
    }
}

impl FromIterator<ProblemCode> for CompletedTable {
    fn from_iter<I: IntoIterator<Item = ProblemCode>>(iter: I) -> Self {
        contract(iter)
    }
}

/// Contracts an arbitrary code set to its canonical table.
///
/// Runs the two rewrite rules to a fixpoint: drop codes that have an ancestor
/// in the set, and replace sibling pairs by their parent.
pub fn contract<I: IntoIterator<Item = ProblemCode>>(codes: I) -> CompletedTable {
    let mut set: BTreeSet<ProblemCode> = codes.into_iter().collect();
    loop {
        let mut changed = false;

        // Sorted order puts each ancestor before its descendants.
        let mut kept: Vec<ProblemCode> = Vec::with_capacity(set.len());
        for code in std::mem::take(&mut set) {
            if kept.last().is_some_and(|k| k.covers(&code)) {
                changed = true;
            } else {
                kept.push(code);
            }
        }
        set = kept.into_iter().collect();

        let mut merged = BTreeSet::new();
        let mut consumed = BTreeSet::new();
        for code in &set {
            if consumed.contains(code) {
                continue;
            }
            if let Ok(sib) = code.sibling() {
                if set.contains(&sib) {
                    consumed.insert(sib);
                    consumed.insert(code.clone());
                    merged.insert(code.parent().expect("non-root"));
                }
            }
        }
        if !merged.is_empty() {
            changed = true;
            set.retain(|c| !consumed.contains(c));
            set.extend(merged);
        }

        if !changed {
            break;
        }
    }
    let pairs = set.iter().map(ProblemCode::len).sum();
    CompletedTable { codes: set, pairs }
}

/// Folds `incoming` into `table`, returning the merged table and the number of
/// codes touched. Equals `contract(table ∪ incoming)`.
pub fn merge_reports<I>(table: &CompletedTable, incoming: I) -> (CompletedTable, usize)
where
    I: IntoIterator<Item = ProblemCode>,
{
    let mut merged = table.clone();
    let touched = incoming.into_iter().map(|c| merged.insert(c).1).sum();
    (merged, touched)
}

pub fn termination_detected(table: &CompletedTable) -> bool {
    table.codes.len() == 1 && table.codes.contains(&ProblemCode::root())
}

/// Picks an uncompleted subproblem by complementing a completed code.
///
/// Candidates are ranked by longest shared prefix with `last_local` (when
/// given), then by depth, then by lexicographic order.
pub fn select_recovery(table: &CompletedTable, last_local: Option<&ProblemCode>) -> Option<ProblemCode> {
    if table.is_empty() || termination_detected(table) {
        return None;
    }
    let mut best: Option<(usize, usize, &ProblemCode)> = None;
    for code in table.iter() {
        let shared = last_local.map_or(0, |l| code.common_prefix_len(l));
        let better = match best {
            None => true,
            Some((s, d, _)) => shared > s || (shared == s && code.len() > d),
        };
        if better {
            best = Some((shared, code.len(), code));
        }
    }
    best.map(|(_, _, code)| code.sibling().expect("contracted table without root has no root code"))
}
