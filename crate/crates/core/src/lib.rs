//! Fault-tolerant distributed branch and bound over replayed search trees.
//!
//! The crate is layered bottom-up:
//!
//! - [`treecode`]: problem codes, completed-code tables, contraction, recovery choice.
//! - [`trees`]: the `bbtree v1` tree format, the random tree generator, shape enumeration.
//! - [`bnb`]: active pool, incumbent, and the sequential oracle.
//! - [`membership`]: heartbeat gossip views.
//! - [`protocol`]: the per-process worker state machine and its messages.
//! - [`sim`]: the discrete-event kernel with faults and a global audit.
//! - [`metrics`]: counters, run results, and the sweep table.
//! - [`scenario`]: the TOML scenario format.
//! - [`batch`]: many scenarios at once, in parallel when the `parallel` feature is on.

// `!(x > 0.0)` is used on purpose: it rejects NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod bnb;
pub mod membership;
pub mod metrics;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod treecode;
pub mod trees;

pub use bnb::{sequential_solve, SelectionRule, SequentialOutcome};
pub use metrics::{render_table, Outcome, RunResult, TableRow};
pub use scenario::{ScenarioError, ScenarioFile};
pub use sim::{run, run_traced, Scenario, SimError, Simulation};
pub use treecode::{CompletedTable, ProblemCode};
pub use trees::{BasicTree, GenParams};
