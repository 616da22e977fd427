//! Global safety audit.
//!
//! The audit keeps its own node-level record of which subproblems are
//! finished, built only from what processes actually did (expansions and
//! fathomings), and checks protocol decisions against it. It never looks at
//! problem codes except to map them back to tree nodes.

use crate::protocol::Note;
use crate::trees::{BasicTree, NodeIdx};

const MAX_VIOLATIONS: usize = 32;

#[derive(Debug, Clone)]
pub struct Audit {
    expanded: Vec<bool>,
    done: Vec<bool>,
    violations: Vec<String>,
}

impl Audit {
    pub fn new(tree: &BasicTree) -> Self {
        Self { expanded: vec![false; tree.len()], done: vec![false; tree.len()], violations: Vec::new() }
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn into_violations(self) -> Vec<String> {
        self.violations
    }

    pub fn is_done(&self, v: NodeIdx) -> bool {
        self.done[v]
    }

    fn violation(&mut self, msg: String) {
        if self.violations.len() < MAX_VIOLATIONS {
            self.violations.push(msg);
        }
    }

    fn mark_done(&mut self, tree: &BasicTree, mut v: NodeIdx) {
        self.done[v] = true;
        while let Some(p) = tree.parent(v) {
            let [a, b] = tree.children(p).expect("parent has children");
            if self.done[p] || !self.expanded[p] || !self.done[a] || !self.done[b] {
                break;
            }
            self.done[p] = true;
            v = p;
        }
    }

    pub fn observe(&mut self, tree: &BasicTree, process: usize, time: f64, note: &Note) {
        match note {
            Note::Expanded { node, .. } => self.expanded[*node] = true,
            Note::Fathomed { node } => self.mark_done(tree, *node),
            Note::Recorded { code } => match tree.lookup(code) {
                Some(v) if self.done[v] => {}
                Some(_) => {
                    self.violation(format!("t={time}: process {process} recorded {code} before it was finished"))
                }
                None => {
                    self.violation(format!("t={time}: process {process} recorded {code}, which is not in the tree"))
                }
            },
            Note::Terminated => {
                if !self.done[tree.root()] {
                    self.violation(format!("t={time}: process {process} terminated before the search was finished"));
                }
            }
        }
    }

    /// Every unfinished node that was expanded must have each unfinished child
    /// either expanded or held somewhere: covered by a table, pooled,
    /// in flight, or being computed. Nodes still being computed have no
    /// children yet and are skipped.
    pub fn check_coverage<F, G>(&mut self, tree: &BasicTree, time: f64, mut held: F, computing: G)
    where
        F: FnMut(NodeIdx) -> bool,
        G: Fn(NodeIdx) -> bool,
    {
        let root = tree.root();
        if !self.done[root] && !self.expanded[root] && !held(root) {
            self.violation(format!("t={time}: the root problem is held nowhere"));
            return;
        }
        for v in 0..tree.len() {
            if !self.expanded[v] || self.done[v] || computing(v) {
                continue;
            }
            let Some(kids) = tree.children(v) else { continue };
            for c in kids {
                if !self.done[c] && !self.expanded[c] && !held(c) {
                    let code = tree.code_of(c);
                    self.violation(format!("t={time}: open subproblem {code} is held nowhere"));
                    return;
                }
            }
        }
    }
}
