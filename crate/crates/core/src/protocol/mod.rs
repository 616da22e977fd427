//! Per-process worker state machine.
//!
//! A [`Worker`] owns its pool, its table of completed codes, the list of
//! completions it has not reported yet, its incumbent, and its membership
//! view. It reacts to one input at a time through a [`Ctx`], which carries the
//! process-local clock and collects the side effects (messages, timers, and
//! notes for the simulator's bookkeeping).

mod message;
mod worker;

pub use message::{Message, MessageKind, Payload, HEADER_BYTES, WORD_BYTES};
pub use worker::{Status, Worker, WorkerConfig};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;
use crate::treecode::ProblemCode;
use crate::trees::{BasicTree, NodeIdx};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("process {process}: subproblem {code} is not in the tree")]
    UnknownSubproblem { process: usize, code: ProblemCode },
}

/// Tunables of the work-sharing, reporting, and recovery protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolParams {
    /// Report once this many codes are waiting in the local list.
    pub report_codes: usize,
    /// Members each work report is sent to.
    pub report_targets: usize,
    /// Report a non-empty list that has not changed for this long (seconds).
    pub report_interval: f64,
    /// Seconds between full-table gossips.
    pub table_interval: f64,
    pub table_gossip: bool,
    /// Consecutive failed work requests before recovery kicks in.
    pub fail_threshold: u32,
    /// A process keeps at least this many entries before granting work.
    pub min_share: usize,
    /// Seconds to wait for a grant or denial. Defaults to ten times the
    /// latency of a work request when absent.
    pub request_timeout: Option<f64>,
    /// Delay before re-requesting after a failed attempt.
    pub retry_delay: f64,
    /// Simulated seconds charged per code touched while contracting.
    pub contraction_cost: f64,
    /// A process that knows of no completed work at all and keeps failing to
    /// get any restarts from the root after starving this long.
    pub root_recovery_delay: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            report_codes: 8,
            report_targets: 2,
            report_interval: 5.0,
            table_interval: 30.0,
            table_gossip: true,
            fail_threshold: 3,
            min_share: 2,
            request_timeout: None,
            retry_delay: 0.0,
            contraction_cost: 10e-6,
            root_recovery_delay: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "timer")]
pub enum Timer {
    /// Flush the local list if it has not changed since `token`.
    ReportCheck {
        token: u64,
    },
    TableGossip,
    RequestTimeout {
        request: u64,
    },
    RetryRequest,
    MemberGossip,
    JoinRetry,
}

impl Timer {
    pub fn name(&self) -> &'static str {
        match self {
            Timer::ReportCheck { .. } => "report-check",
            Timer::TableGossip => "table-gossip",
            Timer::RequestTimeout { .. } => "request-timeout",
            Timer::RetryRequest => "retry-request",
            Timer::MemberGossip => "member-gossip",
            Timer::JoinRetry => "join-retry",
        }
    }
}

/// Observations for the simulator's audit and metrics. They never feed back
/// into protocol decisions.
#[derive(Debug, Clone, PartialEq)]
pub enum Note {
    /// A node's cost was charged and it is being bounded and expanded.
    Expanded {
        node: NodeIdx,
        recovered: bool,
    },
    /// A node left the search without children to explore: a leaf that was
    /// expanded or a node eliminated by its bound.
    Fathomed {
        node: NodeIdx,
    },
    /// A code entered the process's table (after contraction).
    Recorded {
        code: ProblemCode,
    },
    Terminated,
}

#[derive(Debug, Default)]
pub struct Effects {
    pub sends: Vec<(SimTime, Message)>,
    pub timers: Vec<(SimTime, Timer)>,
    pub notes: Vec<Note>,
}

/// Handler context: the local clock, shared inputs, and collected effects.
pub struct Ctx<'a> {
    pub now: SimTime,
    pub tree: &'a BasicTree,
    pub rng: &'a mut ChaCha8Rng,
    pub effects: Effects,
}

impl<'a> Ctx<'a> {
    pub fn new(now: SimTime, tree: &'a BasicTree, rng: &'a mut ChaCha8Rng) -> Self {
        Self { now, tree, rng, effects: Effects::default() }
    }

    pub fn send(&mut self, msg: Message) {
        self.effects.sends.push((self.now, msg));
    }

    pub fn set_timer(&mut self, delay: f64, timer: Timer) {
        self.effects.timers.push((self.now + delay, timer));
    }

    pub fn note(&mut self, note: Note) {
        self.effects.notes.push(note);
    }

    pub fn take_effects(&mut self) -> Effects {
        std::mem::take(&mut self.effects)
    }
}
