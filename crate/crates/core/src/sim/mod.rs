//! Deterministic discrete-event simulation of a group of workers.
//!
//! A [`Scenario`] fully determines a run. The kernel keeps one global event
//! queue ordered by time and enqueue sequence, meters every message through
//! the latency and loss model, injects crashes, partitions and joins, and
//! feeds the global audit.

mod audit;
mod kernel;
mod network;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::Audit;
pub use kernel::Simulation;
pub use network::{NetworkParams, Partition};

use crate::bnb::SelectionRule;
use crate::membership::{MembershipParams, ProcessId};
use crate::metrics::RunResult;
use crate::protocol::{ProtocolError, ProtocolParams};
use crate::trees::BasicTree;

/// Simulated seconds.
pub type SimTime = f64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("trace output failed: {0}")]
    Trace(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrashEvent {
    pub process: ProcessId,
    pub at: SimTime,
}

/// From `at` on, only processes inside the same group can talk. Processes not
/// named in any group form one more group; no groups heals the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionEvent {
    pub at: SimTime,
    pub groups: Vec<Vec<ProcessId>>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    /// Processes present from time zero. Joiners get the ids after these.
    pub processes: usize,
    pub tree: Arc<BasicTree>,
    pub rule: SelectionRule,
    pub pruning: bool,
    pub network: NetworkParams,
    pub protocol: ProtocolParams,
    pub membership: MembershipParams,
    pub crashes: Vec<CrashEvent>,
    pub partitions: Vec<PartitionEvent>,
    /// Join times of late processes.
    pub joins: Vec<SimTime>,
    pub audit: bool,
    /// Defaults to max(100 × total node cost, one hour).
    pub max_sim_time: Option<SimTime>,
}

impl Scenario {
    pub fn new(tree: Arc<BasicTree>, processes: usize, seed: u64) -> Self {
        Self {
            seed,
            processes,
            tree,
            rule: SelectionRule::default(),
            pruning: true,
            network: NetworkParams::default(),
            protocol: ProtocolParams::default(),
            membership: MembershipParams::default(),
            crashes: Vec::new(),
            partitions: Vec::new(),
            joins: Vec::new(),
            audit: false,
            max_sim_time: None,
        }
    }

    pub fn total_processes(&self) -> usize {
        self.processes + self.joins.len()
    }

    pub fn resolved_max_time(&self) -> SimTime {
        self.max_sim_time.unwrap_or_else(|| (100.0 * self.tree.total_cost()).max(3600.0))
    }

    pub fn resolved_request_timeout(&self) -> f64 {
        self.protocol.request_timeout.unwrap_or_else(|| 10.0 * self.network.latency(72))
    }

    /// True when no fault of any kind is scheduled.
    pub fn is_fault_free(&self) -> bool {
        self.crashes.is_empty() && self.partitions.is_empty() && self.network.loss_prob == 0.0
    }

    /// The same scenario without crashes, partitions, or loss.
    pub fn fault_free(&self) -> Self {
        let mut s = self.clone();
        s.crashes.clear();
        s.partitions.clear();
        s.network.loss_prob = 0.0;
        s
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        let total = self.total_processes();
        if self.processes == 0 {
            return bad("at least one process must be present at start".into());
        }
        if !(0.0..=1.0).contains(&self.network.loss_prob) {
            return bad(format!("loss_prob {} outside [0, 1]", self.network.loss_prob));
        }
        if self.network.base_latency_ms < 0.0 || self.network.per_byte_ms < 0.0 {
            return bad("latencies must be non-negative".into());
        }
        for c in &self.crashes {
            if c.process >= total {
                return bad(format!("crash names process {}, but there are only {total}", c.process));
            }
            if !(c.at >= 0.0) {
                return bad(format!("crash time {} must be non-negative", c.at));
            }
        }
        for p in &self.partitions {
            if !(p.at >= 0.0) {
                return bad(format!("partition time {} must be non-negative", p.at));
            }
            if let Some(&id) = p.groups.iter().flatten().find(|&&id| id >= total) {
                return bad(format!("partition names process {id}, but there are only {total}"));
            }
        }
        if self.joins.iter().any(|&t| !(t >= 0.0)) {
            return bad("join times must be non-negative".into());
        }
        let pp = &self.protocol;
        if pp.report_codes == 0 || pp.fail_threshold == 0 {
            return bad("report_codes and fail_threshold must be positive".into());
        }
        if !(pp.report_interval > 0.0 && pp.table_interval > 0.0) {
            return bad("report and table intervals must be positive".into());
        }
        if pp.request_timeout.is_some_and(|t| !(t > 0.0)) || pp.retry_delay < 0.0 || pp.contraction_cost < 0.0 {
            return bad("timeouts and costs must be non-negative".into());
        }
        let m = &self.membership;
        if m.enabled && !(m.gossip_interval > 0.0 && m.fail_timeout > 0.0 && m.join_retry > 0.0) {
            return bad("membership intervals must be positive".into());
        }
        if self.max_sim_time.is_some_and(|t| !(t > 0.0)) {
            return bad("max_sim_time must be positive".into());
        }
        Ok(())
    }
}

/// Runs a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunResult, SimError> {
    Simulation::new(scenario.clone())?.finish()
}

/// Runs a scenario and writes one trace record per line to `sink`.
pub fn run_traced(scenario: &Scenario, sink: &mut dyn Write) -> Result<RunResult, SimError> {
    Simulation::with_trace(scenario.clone(), sink)?.finish()
}
