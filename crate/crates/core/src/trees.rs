//! Precomputed search trees used as simulation workload.
//!
//! A basic tree records, for every node the unpruned search would visit, its
//! bound value, the time to bound and expand it, and whether the bound is a
//! feasible solution. Trees are binary; both children of a node branch on the
//! same condition variable.
//!
//! File format (`bbtree v1`): one node per line,
//! `node_id parent_id branch_var branch_bit bound time_cost feasible`, with `-1`
//! for the root's parent, variable, and bit. `#` starts a comment.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treecode::{ProblemCode, VarId};

pub const HEADER: &str = "bbtree v1";

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error reading tree: {0}")]
    Io(#[from] std::io::Error),
    #[error("tree generation failed: {0}")]
    Generation(String),
    #[error("granularity factor must be a positive finite number, got {0}")]
    BadFactor(f64),
}

fn parse_err(line: usize, message: impl Into<String>) -> TreeError {
    TreeError::Parse { line, message: message.into() }
}

/// Dense index of a node inside a [`BasicTree`].
pub type NodeIdx = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicTreeNode {
    pub node_id: i64,
    pub parent_id: Option<i64>,
    /// Variable assigned by the parent's branching, with the bit taken.
    pub branch: Option<(VarId, bool)>,
    pub bound: f64,
    pub time_cost: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicTree {
    nodes: Vec<BasicTreeNode>,
    parent: Vec<Option<NodeIdx>>,
    children: Vec<Option<[NodeIdx; 2]>>,
    depth: Vec<u32>,
    root: NodeIdx,
}

impl BasicTree {
    /// Builds and validates a tree. `lines[i]` is the source line of node `i`,
    /// used for error messages.
    fn build(nodes: Vec<BasicTreeNode>, lines: &[usize]) -> Result<Self, TreeError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.node_id, i).is_some() {
                return Err(parse_err(lines[i], format!("duplicate node id {}", n.node_id)));
            }
        }
        let mut root = None;
        let mut parent = vec![None; nodes.len()];
        let mut slots: Vec<[Option<NodeIdx>; 2]> = vec![[None, None]; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            match (n.parent_id, n.branch) {
                (None, None) => {
                    if root.replace(i).is_some() {
                        return Err(parse_err(lines[i], "more than one root"));
                    }
                }
                (Some(pid), Some((var, bit))) => {
                    let p = *index.get(&pid).ok_or_else(|| parse_err(lines[i], format!("missing parent {pid}")))?;
                    let slot = &mut slots[p][usize::from(bit)];
                    if slot.is_some() {
                        return Err(parse_err(
                            lines[i],
                            format!("non-binary branching: node {pid} already has a child with bit {}", u8::from(bit)),
                        ));
                    }
                    if let Some(other) = slots[p][usize::from(!bit)] {
                        if nodes[other].branch.map(|b| b.0) != Some(var) {
                            return Err(parse_err(lines[i], format!("sibling variable mismatch under node {pid}")));
                        }
                    }
                    slots[p][usize::from(bit)] = Some(i);
                    parent[i] = Some(p);
                }
                _ => return Err(parse_err(lines[i], "root fields must all be -1, non-root fields none")),
            }
        }
        let root = root.ok_or_else(|| parse_err(lines.last().copied().unwrap_or(1), "no root node"))?;
        let mut children = Vec::with_capacity(nodes.len());
        for (i, s) in slots.iter().enumerate() {
            children.push(match s {
                [None, None] => None,
                [Some(a), Some(b)] => Some([*a, *b]),
                _ => {
                    return Err(parse_err(
                        lines[i],
                        format!("non-binary branching: node {} has exactly one child", nodes[i].node_id),
                    ))
                }
            });
        }

        // Walk from the root: checks connectivity and variable reuse along paths.
        let mut depth = vec![u32::MAX; nodes.len()];
        let mut stack = vec![(root, Vec::<VarId>::new())];
        depth[root] = 0;
        let mut seen = 1;
        while let Some((v, path)) = stack.pop() {
            if let Some(kids) = children[v] {
                let var = nodes[kids[0]].branch.expect("child has branch").0;
                if path.contains(&var) {
                    return Err(parse_err(lines[kids[0]], format!("variable x{var} repeats along a path")));
                }
                let mut next = path.clone();
                next.push(var);
                for k in kids {
                    depth[k] = depth[v] + 1;
                    seen += 1;
                    stack.push((k, next.clone()));
                }
            }
        }
        if seen != nodes.len() {
            let orphan = depth.iter().position(|&d| d == u32::MAX).unwrap_or(0);
            return Err(parse_err(lines[orphan], "node not reachable from root (cycle)"));
        }
        Ok(Self { nodes, parent, children, depth, root })
    }

    pub fn root(&self) -> NodeIdx {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, idx: NodeIdx) -> &BasicTreeNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[BasicTreeNode] {
        &self.nodes
    }

    pub fn parent(&self, idx: NodeIdx) -> Option<NodeIdx> {
        self.parent[idx]
    }

    /// Children indexed by branch bit.
    pub fn children(&self, idx: NodeIdx) -> Option<[NodeIdx; 2]> {
        self.children[idx]
    }

    pub fn depth(&self, idx: NodeIdx) -> u32 {
        self.depth[idx]
    }

    pub fn max_depth(&self) -> u32 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn sibling(&self, idx: NodeIdx) -> Option<NodeIdx> {
        let p = self.parent[idx]?;
        let kids = self.children[p]?;
        Some(if kids[0] == idx { kids[1] } else { kids[0] })
    }

    /// Resolves a code to the node it names.
    pub fn lookup(&self, code: &ProblemCode) -> Option<NodeIdx> {
        let mut v = self.root;
        for pair in code.pairs() {
            let kids = self.children[v]?;
            let next = kids[usize::from(pair.bit)];
            if self.nodes[next].branch.map(|b| b.0) != Some(pair.var) {
                return None;
            }
            v = next;
        }
        Some(v)
    }

    pub fn code_of(&self, idx: NodeIdx) -> ProblemCode {
        let mut pairs = Vec::with_capacity(self.depth[idx] as usize);
        let mut v = idx;
        while let Some((var, bit)) = self.nodes[v].branch {
            pairs.push(crate::treecode::Pair::new(var, bit));
            v = self.parent[v].expect("non-root has parent");
        }
        pairs.reverse();
        ProblemCode::from_pairs(pairs).expect("validated tree has no repeated variables")
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        (0..self.nodes.len()).filter(|&i| self.children[i].is_none())
    }

    pub fn mean_cost(&self) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        self.nodes.iter().map(|n| n.time_cost).sum::<f64>() / self.nodes.len() as f64
    }

    pub fn total_cost(&self) -> f64 {
        self.nodes.iter().map(|n| n.time_cost).sum()
    }
}

fn field<'a>(fields: &[&'a str], i: usize, line: usize, name: &str) -> Result<&'a str, TreeError> {
    fields.get(i).copied().ok_or_else(|| parse_err(line, format!("missing field {name}")))
}

fn parse_int(s: &str, line: usize, name: &str) -> Result<i64, TreeError> {
    s.parse().map_err(|_| parse_err(line, format!("{name}: expected integer, got {s:?}")))
}

fn parse_real(s: &str, line: usize, name: &str) -> Result<f64, TreeError> {
    let v: f64 = s.parse().map_err(|_| parse_err(line, format!("{name}: expected number, got {s:?}")))?;
    if v.is_nan() {
        return Err(parse_err(line, format!("{name}: NaN not allowed")));
    }
    Ok(v)
}

/// Parses a `bbtree v1` stream and validates all tree invariants.
pub fn parse_basic_tree<R: BufRead>(reader: R) -> Result<BasicTree, TreeError> {
    let mut header_seen = false;
    let mut nodes = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in reader.lines().enumerate() {
        let lineno = i + 1;
        let raw = raw?;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        if !header_seen {
            if text != HEADER {
                return Err(parse_err(lineno, format!("expected header {HEADER:?}")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(parse_err(lineno, format!("expected 7 fields, found {}", fields.len())));
        }
        let node_id = parse_int(field(&fields, 0, lineno, "node_id")?, lineno, "node_id")?;
        let parent_id = parse_int(fields[1], lineno, "parent_id")?;
        let var = parse_int(fields[2], lineno, "branch_var")?;
        let bit = parse_int(fields[3], lineno, "branch_bit")?;
        let bound = parse_real(fields[4], lineno, "bound")?;
        let time_cost = parse_real(fields[5], lineno, "time_cost")?;
        if !(time_cost.is_finite() && time_cost >= 0.0) {
            return Err(parse_err(lineno, "time_cost must be finite and non-negative"));
        }
        let feasible = match fields[6] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(lineno, format!("feasible must be 0 or 1, got {other:?}"))),
        };
        let (parent_id, branch) = match (parent_id, var, bit) {
            (-1, -1, -1) => (None, None),
            (p, v, b) if p >= 0 && v >= 0 && (b == 0 || b == 1) => {
                let v = VarId::try_from(v).map_err(|_| parse_err(lineno, "branch_var out of range"))?;
                (Some(p), Some((v, b == 1)))
            }
            _ => return Err(parse_err(lineno, "inconsistent parent_id/branch_var/branch_bit")),
        };
        nodes.push(BasicTreeNode { node_id, parent_id, branch, bound, time_cost, feasible });
        lines.push(lineno);
    }
    if !header_seen {
        return Err(parse_err(1, format!("missing header {HEADER:?}")));
    }
    BasicTree::build(nodes, &lines)
}

pub fn parse_basic_tree_str(text: &str) -> Result<BasicTree, TreeError> {
    parse_basic_tree(text.as_bytes())
}

/// Writes a tree in `bbtree v1` form; [`parse_basic_tree`] reads it back exactly.
pub fn render_basic_tree(tree: &BasicTree) -> String {
    let mut out = String::with_capacity(tree.len() * 40);
    out.push_str(HEADER);
    out.push('\n');
    for n in &tree.nodes {
        let (pid, var, bit) = match (n.parent_id, n.branch) {
            (Some(p), Some((v, b))) => (p, i64::from(v), i64::from(b)),
            _ => (-1, -1, -1),
        };
        let _ = writeln!(
            out,
            "{} {} {} {} {:?} {:?} {}",
            n.node_id,
            pid,
            var,
            bit,
            n.bound,
            n.time_cost,
            u8::from(n.feasible)
        );
    }
    out
}

/// Multiplies every node's time cost by `factor`.
pub fn scale_granularity(tree: &BasicTree, factor: f64) -> Result<BasicTree, TreeError> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(TreeError::BadFactor(factor));
    }
    let mut scaled = tree.clone();
    for n in &mut scaled.nodes {
        n.time_cost *= factor;
    }
    Ok(scaled)
}

/// Parameters of the random tree generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenParams {
    /// Expansion probability for frontier nodes at or below `min_depth`.
    pub expand_prob: f64,
    /// Nodes shallower than this always expand while the target is unmet.
    pub min_depth: u32,
    pub cost_median: f64,
    pub cost_sigma: f64,
    pub value_min: f64,
    pub value_max: f64,
    /// Largest gap between an internal node's bound and its subtree optimum.
    pub max_slack: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            expand_prob: 0.45,
            min_depth: 3,
            cost_median: 0.01,
            cost_sigma: 1.0,
            value_min: 0.0,
            value_max: 100.0,
            max_slack: 1.0,
        }
    }
}

const GEN_RETRIES: u64 = 8;
const STALL_LIMIT: usize = 100_000;

/// Grows a random binary tree with about `target_nodes` nodes.
///
/// Frontier nodes are drawn uniformly; a drawn node expands with probability
/// `expand_prob` (always, above `min_depth`). Growth stops at the first node
/// count ≥ `target_nodes`, so the result has `target_nodes` or
/// `target_nodes + 1` nodes. Leaves are feasible with uniform values; each
/// internal bound sits strictly below its subtree's best leaf and never below
/// its parent's bound, so pruning is sound.
pub fn gen_random_tree(seed: u64, target_nodes: usize, params: &GenParams) -> Result<BasicTree, TreeError> {
    if target_nodes == 0 {
        return Err(TreeError::Generation("target_nodes must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&params.expand_prob) {
        return Err(TreeError::Generation("expand_prob must lie in [0, 1]".into()));
    }
    if !(params.cost_median > 0.0 && params.cost_sigma >= 0.0 && params.max_slack > 0.0)
        || !(params.value_max >= params.value_min)
    {
        return Err(TreeError::Generation("invalid cost or value distribution".into()));
    }
    let costs =
        LogNormal::new(params.cost_median.ln(), params.cost_sigma).map_err(|e| TreeError::Generation(e.to_string()))?;
    for attempt in 0..GEN_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        if let Some(tree) = try_grow(&mut rng, target_nodes, params, &costs) {
            return Ok(tree);
        }
    }
    Err(TreeError::Generation(format!(
        "target of {target_nodes} nodes unreachable with expand_prob {} after {GEN_RETRIES} attempts",
        params.expand_prob
    )))
}

fn try_grow(rng: &mut ChaCha8Rng, target: usize, params: &GenParams, costs: &LogNormal<f64>) -> Option<BasicTree> {
    // Shape first: parent links, depth, and branching variable per node.
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut depth: Vec<u32> = vec![0];
    let mut branch: Vec<Option<(VarId, bool)>> = vec![None];
    let mut children: Vec<Option<[usize; 2]>> = vec![None];
    let mut frontier = vec![0usize];
    let mut next_var: VarId = 1;
    let mut stall = 0;
    while parent.len() < target {
        if frontier.is_empty() {
            return None;
        }
        let pick = rng.random_range(0..frontier.len());
        let v = frontier[pick];
        let expand = depth[v] < params.min_depth || rng.random_bool(params.expand_prob);
        if !expand {
            stall += 1;
            if stall > STALL_LIMIT {
                return None;
            }
            continue;
        }
        stall = 0;
        frontier.swap_remove(pick);
        let var = next_var;
        next_var += 1;
        let base = parent.len();
        for bit in [false, true] {
            parent.push(Some(v));
            depth.push(depth[v] + 1);
            branch.push(Some((var, bit)));
            children.push(None);
            frontier.push(parent.len() - 1);
        }
        children[v] = Some([base, base + 1]);
    }

    let n = parent.len();
    let mut value = vec![0.0; n];
    let mut time_cost = vec![0.0; n];
    for i in 0..n {
        time_cost[i] = costs.sample(rng);
        if children[i].is_none() {
            value[i] = rng.random_range(params.value_min..=params.value_max);
        }
    }
    // Children always have larger indices than their parent.
    let mut sub_min = value.clone();
    for i in (0..n).rev() {
        if let Some([a, b]) = children[i] {
            sub_min[i] = sub_min[a].min(sub_min[b]);
        }
    }
    let mut bound = vec![0.0; n];
    for i in 0..n {
        bound[i] = match children[i] {
            None => value[i],
            Some(_) => {
                let slack = rng.random_range(params.max_slack * 1e-3..=params.max_slack);
                let own = sub_min[i] - slack;
                match parent[i] {
                    Some(p) => own.max(bound[p]),
                    None => own,
                }
            }
        };
    }

    let nodes: Vec<BasicTreeNode> = (0..n)
        .map(|i| BasicTreeNode {
            node_id: i as i64,
            parent_id: parent[i].map(|p| p as i64),
            branch: branch[i],
            bound: bound[i],
            time_cost: time_cost[i],
            feasible: children[i].is_none(),
        })
        .collect();
    let lines: Vec<usize> = (1..=n).collect();
    BasicTree::build(nodes, &lines).ok()
}

/// Every full binary tree shape with exactly `internal` internal nodes, as
/// child-pointer arrays rooted at index 0. Used by exhaustive checks.
pub fn enumerate_shapes(internal: usize) -> Vec<BasicTree> {
    fn shapes(k: usize, memo: &mut HashMap<usize, Vec<Vec<Option<[usize; 2]>>>>) -> Vec<Vec<Option<[usize; 2]>>> {
        if let Some(s) = memo.get(&k) {
            return s.clone();
        }
        let mut out = Vec::new();
        if k == 0 {
            out.push(vec![None]);
        } else {
            for left in 0..k {
                let right = k - 1 - left;
                for l in shapes(left, memo) {
                    for r in shapes(right, memo) {
                        let mut s = vec![Some([1, 1 + l.len()])];
                        s.extend(l.iter().map(|c| c.map(|[a, b]| [a + 1, b + 1])));
                        let off = 1 + l.len();
                        s.extend(r.iter().map(|c| c.map(|[a, b]| [a + off, b + off])));
                        out.push(s);
                    }
                }
            }
        }
        memo.insert(k, out.clone());
        out
    }
    let mut memo = HashMap::new();
    shapes(internal, &mut memo).into_iter().map(|kids| tree_from_shape(&kids)).collect()
}

/// Builds a unit-cost tree from child pointers (root at 0). Each internal node
/// gets a fresh variable; leaf `k` (in index order) gets bound `k`.
pub fn tree_from_shape(kids: &[Option<[usize; 2]>]) -> BasicTree {
    let n = kids.len();
    let mut parent = vec![None; n];
    let mut branch = vec![None; n];
    let mut var = 1;
    for (i, k) in kids.iter().enumerate() {
        if let Some([a, b]) = *k {
            parent[a] = Some(i);
            parent[b] = Some(i);
            branch[a] = Some((var, false));
            branch[b] = Some((var, true));
            var += 1;
        }
    }
    let mut leaf_rank = 0.0;
    let nodes = (0..n)
        .map(|i| {
            let leaf = kids[i].is_none();
            let bound = if leaf {
                leaf_rank += 1.0;
                leaf_rank
            } else {
                0.0
            };
            BasicTreeNode {
                node_id: i as i64,
                parent_id: parent[i].map(|p| p as i64),
                branch: branch[i],
                bound,
                time_cost: 1.0,
                feasible: leaf,
            }
        })
        .collect();
    let lines: Vec<usize> = (1..=n).collect();
    BasicTree::build(nodes, &lines).expect("enumerated shape is a valid tree")
}
