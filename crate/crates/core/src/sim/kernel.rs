use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Audit, Partition, Scenario, SimError, SimTime};
use crate::membership::{MembershipView, ProcessId};
use crate::metrics::{derive_row, MetricCounters, Outcome, ProcessFate, ProcessReport, RunResult};
use crate::protocol::{Ctx, Effects, Message, Note, Payload, ProtocolError, Timer, Worker, WorkerConfig};
use crate::treecode::ProblemCode;
use crate::trees::{BasicTree, NodeIdx};

/// Storage is sampled every `4 × processes` processed events, at most this
/// many apart, and once at the end.
const STORAGE_SAMPLE_EVENTS: u64 = 512;

const STREAM_WORKER: u64 = 0;
const STREAM_LOSS: u64 = 1;

fn stream_rng(seed: u64, process: ProcessId, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(process as u64 * 16 + purpose);
    rng
}

#[derive(Debug)]
enum EventKind {
    Deliver(Message),
    Timer(ProcessId, Timer),
    Wake(ProcessId),
    Crash(ProcessId),
    Partition(usize),
    Join(ProcessId),
}

#[derive(Debug)]
struct Event {
    time: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Life {
    Dormant,
    Active,
    Terminated,
    Crashed,
}

enum Input {
    Msg(Message),
    Timer(Timer),
}

struct Proc {
    worker: Worker,
    rng: ChaCha8Rng,
    loss_rng: ChaCha8Rng,
    inbox: VecDeque<Input>,
    busy_until: SimTime,
    wake_pending: bool,
    life: Life,
    started: SimTime,
    ended: Option<SimTime>,
    idle_since: Option<SimTime>,
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    time: SimTime,
    process: ProcessId,
    event: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    peer: Option<ProcessId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    code: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size_bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dropped: Option<bool>,
}

impl<'a> TraceRecord<'a> {
    fn new(time: SimTime, process: ProcessId, event: &'a str) -> Self {
        Self { time, process, event, kind: None, peer: None, code: None, size_bytes: None, dropped: None }
    }

    fn message(mut self, msg: &Message, peer: ProcessId) -> Self {
        self.kind = Some(msg.kind().name());
        self.peer = Some(peer);
        self.size_bytes = Some(msg.size_bytes());
        let codes = msg.codes();
        if !codes.is_empty() {
            let text: Vec<String> = codes.iter().map(ProblemCode::to_string).collect();
            self.code = Some(text.join(","));
        } else if matches!(msg.payload, Payload::TerminationNotice { .. }) {
            self.code = Some(ProblemCode::root().to_string());
        }
        self
    }
}

/// One simulation in progress. [`Simulation::run_until`] lets callers
/// observe intermediate state; [`Simulation::finish`] runs to the end.
pub struct Simulation<'w> {
    scenario: Scenario,
    tree: Arc<BasicTree>,
    now: SimTime,
    seq: u64,
    heap: BinaryHeap<Event>,
    procs: Vec<Proc>,
    partition: Partition,
    expansions: Vec<u32>,
    audit: Option<Audit>,
    coverage_stride: Option<u64>,
    storage_stride: u64,
    in_flight: BTreeMap<NodeIdx, u32>,
    events_processed: u64,
    messages_sent: u64,
    messages_dropped: u64,
    storage_total_bytes: u64,
    storage_redundant_bytes: u64,
    max_time: SimTime,
    outcome: Option<Outcome>,
    trace: Option<&'w mut dyn Write>,
}

impl Simulation<'static> {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        Simulation::build(scenario, None)
    }
}

impl<'w> Simulation<'w> {
    pub fn with_trace(scenario: Scenario, sink: &'w mut dyn Write) -> Result<Self, SimError> {
        Simulation::build(scenario, Some(sink))
    }

    fn build(scenario: Scenario, trace: Option<&'w mut dyn Write>) -> Result<Self, SimError> {
        scenario.validate()?;
        let tree = Arc::clone(&scenario.tree);
        let total = scenario.total_processes();
        let config = WorkerConfig {
            params: scenario.protocol.clone(),
            membership: scenario.membership.clone(),
            rule: scenario.rule,
            pruning: scenario.pruning,
            request_timeout: scenario.resolved_request_timeout(),
        };
        let procs = (0..total)
            .map(|p| {
                let view = if !scenario.membership.enabled {
                    MembershipView::with_members(p, 0..total, 0.0)
                } else if p < scenario.processes {
                    MembershipView::with_members(p, 0..scenario.processes, 0.0)
                } else {
                    MembershipView::singleton(p, 0.0)
                };
                Proc {
                    worker: Worker::new(p, config.clone(), view),
                    rng: stream_rng(scenario.seed, p, STREAM_WORKER),
                    loss_rng: stream_rng(scenario.seed, p, STREAM_LOSS),
                    inbox: VecDeque::new(),
                    busy_until: 0.0,
                    wake_pending: false,
                    life: Life::Dormant,
                    started: 0.0,
                    ended: None,
                    idle_since: None,
                }
            })
            .collect();
        let coverage_stride =
            (scenario.audit && scenario.is_fault_free()).then(|| (tree.len() as u64 * total as u64 / 8192).max(1));
        let mut sim = Simulation {
            audit: scenario.audit.then(|| Audit::new(&tree)),
            coverage_stride,
            storage_stride: (4 * total as u64).clamp(1, STORAGE_SAMPLE_EVENTS),
            partition: Partition::healed(total),
            expansions: vec![0; tree.len()],
            max_time: scenario.resolved_max_time(),
            tree,
            now: 0.0,
            seq: 0,
            heap: BinaryHeap::new(),
            procs,
            in_flight: BTreeMap::new(),
            events_processed: 0,
            messages_sent: 0,
            messages_dropped: 0,
            storage_total_bytes: 0,
            storage_redundant_bytes: 0,
            outcome: None,
            trace,
            scenario,
        };
        for c in sim.scenario.crashes.clone() {
            sim.push(c.at, EventKind::Crash(c.process));
        }
        for i in 0..sim.scenario.partitions.len() {
            let at = sim.scenario.partitions[i].at;
            sim.push(at, EventKind::Partition(i));
        }
        for (j, at) in sim.scenario.joins.clone().into_iter().enumerate() {
            sim.push(at, EventKind::Join(sim.scenario.processes + j));
        }
        for p in 0..sim.scenario.processes {
            sim.procs[p].life = Life::Active;
            sim.activate(p, 0.0, |w, ctx| {
                w.start(ctx);
                if p == 0 {
                    w.seed_root(ctx);
                }
                Ok(())
            })?;
        }
        Ok(sim)
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn worker(&self, p: ProcessId) -> &Worker {
        &self.procs[p].worker
    }

    /// Whether `p` has started and has not crashed.
    pub fn is_live(&self, p: ProcessId) -> bool {
        matches!(self.procs[p].life, Life::Active | Life::Terminated)
    }

    /// Membership views of all live processes.
    pub fn live_views(&self) -> Vec<&MembershipView> {
        (0..self.procs.len()).filter(|&p| self.is_live(p)).map(|p| self.procs[p].worker.view()).collect()
    }

    fn push(&mut self, time: SimTime, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event { time, seq: self.seq, kind });
    }

    fn write_trace(&mut self, record: TraceRecord<'_>) -> Result<(), SimError> {
        if let Some(sink) = self.trace.as_mut() {
            serde_json::to_writer(&mut **sink, &record).map_err(std::io::Error::from)?;
            sink.write_all(b"\n")?;
        }
        Ok(())
    }

    fn target_of(kind: &EventKind) -> Option<ProcessId> {
        match kind {
            EventKind::Deliver(m) => Some(m.receiver),
            EventKind::Timer(p, _) | EventKind::Wake(p) => Some(*p),
            _ => None,
        }
    }

    /// Processes events up to and including `until`. Returns false once the
    /// run has ended.
    pub fn run_until(&mut self, until: SimTime) -> Result<bool, SimError> {
        while self.outcome.is_none() {
            let Some(top) = self.heap.peek() else {
                self.outcome = Some(Outcome::Timeout);
                break;
            };
            if top.time > until {
                self.now = self.now.max(until);
                return Ok(true);
            }
            if top.time > self.max_time {
                self.now = self.max_time;
                self.outcome = Some(Outcome::Timeout);
                break;
            }
            let ev = self.heap.pop().expect("peeked");
            self.now = ev.time;
            if let Some(p) = Self::target_of(&ev.kind) {
                if self.procs[p].life != Life::Active {
                    self.release_grant(&ev.kind);
                    continue;
                }
            }
            self.handle(ev)?;
            self.events_processed += 1;
            if self.events_processed.is_multiple_of(self.storage_stride) {
                self.sample_storage();
            }
            if let Some(stride) = self.coverage_stride {
                if self.events_processed.is_multiple_of(stride) {
                    self.check_coverage();
                }
            }
            self.check_global();
        }
        Ok(false)
    }

    pub fn finish(mut self) -> Result<RunResult, SimError> {
        self.run_until(f64::INFINITY)?;
        self.sample_storage();
        if self.coverage_stride.is_some() && self.outcome != Some(Outcome::Terminated) {
            self.check_coverage();
        }
        if let Some(sink) = self.trace.as_mut() {
            sink.flush()?;
        }
        Ok(self.result())
    }

    fn check_global(&mut self) {
        let mut active = 0;
        let mut terminated = 0;
        for p in &self.procs {
            match p.life {
                Life::Active => active += 1,
                Life::Terminated => terminated += 1,
                _ => {}
            }
        }
        if active == 0 {
            self.outcome = Some(if terminated > 0 { Outcome::Terminated } else { Outcome::TotalFailure });
        }
    }

    fn release_grant(&mut self, kind: &EventKind) {
        if let EventKind::Deliver(msg) = kind {
            if matches!(msg.payload, Payload::WorkGrant { .. }) {
                self.untrack(msg);
            }
        }
    }

    fn track(&mut self, msg: &Message) {
        if self.coverage_stride.is_none() {
            return;
        }
        for code in msg.codes() {
            if let Some(v) = self.tree.lookup(code) {
                *self.in_flight.entry(v).or_default() += 1;
            }
        }
    }

    fn untrack(&mut self, msg: &Message) {
        if self.coverage_stride.is_none() {
            return;
        }
        for code in msg.codes() {
            if let Some(v) = self.tree.lookup(code) {
                if let Some(n) = self.in_flight.get_mut(&v) {
                    *n -= 1;
                    if *n == 0 {
                        self.in_flight.remove(&v);
                    }
                }
            }
        }
    }

    fn handle(&mut self, ev: Event) -> Result<(), SimError> {
        let t = ev.time;
        match ev.kind {
            EventKind::Deliver(msg) => {
                let p = msg.receiver;
                let rec = TraceRecord::new(t, p, "deliver").message(&msg, msg.sender);
                self.write_trace(rec)?;
                self.enqueue(p, t, Input::Msg(msg))?;
            }
            EventKind::Timer(p, timer) => {
                let mut rec = TraceRecord::new(t, p, "timer");
                rec.kind = Some(timer.name());
                self.write_trace(rec)?;
                self.enqueue(p, t, Input::Timer(timer))?;
            }
            EventKind::Wake(p) => {
                self.write_trace(TraceRecord::new(t, p, "wake"))?;
                self.procs[p].wake_pending = false;
                self.activate(p, t, |_, _| Ok(()))?;
            }
            EventKind::Crash(p) => {
                self.write_trace(TraceRecord::new(t, p, "crash"))?;
                self.crash(p, t);
            }
            EventKind::Partition(i) => {
                let groups = self.scenario.partitions[i].groups.clone();
                let mut rec = TraceRecord::new(t, 0, "partition");
                rec.kind = Some(if groups.is_empty() { "heal" } else { "split" });
                self.write_trace(rec)?;
                self.partition = Partition::from_groups(self.procs.len(), &groups);
            }
            EventKind::Join(p) => {
                self.write_trace(TraceRecord::new(t, p, "join"))?;
                if self.procs[p].life == Life::Dormant {
                    let proc = &mut self.procs[p];
                    proc.life = Life::Active;
                    proc.started = t;
                    proc.busy_until = t;
                    let membership = self.scenario.membership.enabled;
                    self.activate(p, t, |w, ctx| {
                        w.start(ctx);
                        if membership {
                            w.join(ctx);
                        }
                        Ok(())
                    })?;
                }
            }
        }
        Ok(())
    }

    /// Membership traffic is served by a daemon beside the search, so it is
    /// handled at once even while the process is computing. Everything else
    /// waits for the current node to finish.
    fn enqueue(&mut self, p: ProcessId, t: SimTime, input: Input) -> Result<(), SimError> {
        let membership = match &input {
            Input::Msg(m) => matches!(m.payload, Payload::Join { .. } | Payload::ViewGossip { .. }),
            Input::Timer(timer) => matches!(timer, Timer::MemberGossip | Timer::JoinRetry),
        };
        if !membership || self.procs[p].busy_until <= t {
            self.procs[p].inbox.push_back(input);
            return self.poke(p, t);
        }
        let tree = Arc::clone(&self.tree);
        let proc = &mut self.procs[p];
        let mut ctx = Ctx::new(t, &tree, &mut proc.rng);
        match input {
            Input::Msg(msg) => proc.worker.on_message(msg, &mut ctx)?,
            Input::Timer(timer) => proc.worker.on_timer(timer, &mut ctx)?,
        }
        let effects = ctx.take_effects();
        self.apply(p, t, effects)
    }

    /// Runs `p` now if it is free, otherwise makes sure it wakes when it is.
    fn poke(&mut self, p: ProcessId, t: SimTime) -> Result<(), SimError> {
        let proc = &mut self.procs[p];
        if proc.wake_pending {
            return Ok(());
        }
        if proc.busy_until <= t {
            self.activate(p, t, |_, _| Ok(()))
        } else {
            proc.wake_pending = true;
            let at = proc.busy_until;
            self.push(at, EventKind::Wake(p));
            Ok(())
        }
    }

    fn crash(&mut self, p: ProcessId, t: SimTime) {
        let proc = &mut self.procs[p];
        if proc.life == Life::Crashed {
            return;
        }
        if proc.life == Life::Active {
            if let Some(s) = proc.idle_since.take() {
                proc.worker.counters.idle_time += (t - s).max(0.0);
            }
            if proc.worker.computing().is_some() && proc.busy_until > t {
                // Only the part of the node that was actually computed counts.
                proc.worker.counters.bnb_time -= proc.busy_until - t;
            }
        }
        proc.life = Life::Crashed;
        proc.ended = Some(t);
        proc.inbox.clear();
        proc.worker.mark_crashed();
    }

    /// One activation of process `p` at time `t`: finish the node being
    /// computed, drain the inbox, report, check termination, then start the
    /// next node or go looking for work.
    fn activate<F>(&mut self, p: ProcessId, t: SimTime, pre: F) -> Result<(), SimError>
    where
        F: FnOnce(&mut Worker, &mut Ctx<'_>) -> Result<(), ProtocolError>,
    {
        let tree = Arc::clone(&self.tree);
        let proc = &mut self.procs[p];
        if proc.life != Life::Active {
            return Ok(());
        }
        if let Some(s) = proc.idle_since.take() {
            proc.worker.counters.idle_time += (t - s).max(0.0);
        }
        let mut ctx = Ctx::new(t, &tree, &mut proc.rng);
        let worker = &mut proc.worker;
        let mut grants = Vec::new();
        let outcome = (|| -> Result<Option<f64>, ProtocolError> {
            pre(worker, &mut ctx)?;
            if worker.computing().is_some() {
                worker.finish_step(&mut ctx);
            }
            while let Some(input) = proc.inbox.pop_front() {
                match input {
                    Input::Msg(msg) => {
                        if matches!(msg.payload, Payload::WorkGrant { .. }) {
                            grants.push(msg.clone());
                        }
                        worker.on_message(msg, &mut ctx)?;
                    }
                    Input::Timer(timer) => worker.on_timer(timer, &mut ctx)?,
                }
            }
            loop {
                worker.maybe_emit_report(&mut ctx);
                worker.check_termination(&mut ctx);
                if !worker.is_running() {
                    return Ok(None);
                }
                if let Some(cost) = worker.begin_step(&mut ctx) {
                    return Ok(Some(cost));
                }
                if !worker.is_running() {
                    continue;
                }
                let known = worker.table().len();
                worker.idle_action(&mut ctx)?;
                if worker.pool().is_empty() && worker.table().len() == known {
                    return Ok(None);
                }
            }
        })();
        let cost = outcome?;
        let end = ctx.now;
        let effects = ctx.take_effects();
        drop(ctx);
        proc.busy_until = end + cost.unwrap_or(0.0);
        let storage = proc.worker.storage_bytes();
        let counters = &mut proc.worker.counters;
        counters.storage_peak_bytes = counters.storage_peak_bytes.max(storage);
        if cost.is_some() {
            proc.wake_pending = true;
            let at = proc.busy_until;
            self.push(at, EventKind::Wake(p));
        } else if proc.worker.is_running() {
            proc.idle_since = Some(end);
        }
        for g in &grants {
            self.untrack(g);
        }
        self.apply(p, end, effects)
    }

    fn apply(&mut self, p: ProcessId, end: SimTime, effects: Effects) -> Result<(), SimError> {
        let tree = Arc::clone(&self.tree);
        for note in &effects.notes {
            match note {
                Note::Expanded { node, .. } => {
                    self.expansions[*node] += 1;
                    if self.expansions[*node] > 1 {
                        self.procs[p].worker.counters.redundant_work_time += tree.node(*node).time_cost;
                    }
                }
                Note::Terminated => {
                    let proc = &mut self.procs[p];
                    proc.life = Life::Terminated;
                    proc.ended = Some(end);
                    proc.idle_since = None;
                }
                _ => {}
            }
            if let Some(audit) = self.audit.as_mut() {
                audit.observe(&tree, p, end, note);
            }
        }
        for (at, timer) in effects.timers {
            self.push(at, EventKind::Timer(p, timer));
        }
        for (at, msg) in effects.sends {
            self.transmit(at, msg)?;
        }
        Ok(())
    }

    fn transmit(&mut self, at: SimTime, msg: Message) -> Result<(), SimError> {
        self.messages_sent += 1;
        let loss = self.scenario.network.loss_prob;
        let sender = msg.sender;
        let cut = !self.partition.connected(sender, msg.receiver);
        let lost = loss > 0.0 && self.procs[sender].loss_rng.random::<f64>() < loss;
        let dropped = cut || lost;
        let mut rec = TraceRecord::new(at, sender, "send").message(&msg, msg.receiver);
        rec.dropped = Some(dropped);
        self.write_trace(rec)?;
        if dropped {
            self.messages_dropped += 1;
            return Ok(());
        }
        if matches!(msg.payload, Payload::WorkGrant { .. }) {
            self.track(&msg);
        }
        let arrival = at + self.scenario.network.latency(msg.size_bytes());
        self.push(arrival, EventKind::Deliver(msg));
        Ok(())
    }

    fn sample_storage(&mut self) {
        let mut holders: BTreeMap<&ProblemCode, u64> = BTreeMap::new();
        let mut total = 0;
        for proc in self.procs.iter().filter(|p| matches!(p.life, Life::Active | Life::Terminated)) {
            total += proc.worker.storage_bytes();
            let own: BTreeSet<&ProblemCode> =
                proc.worker.table().iter().chain(proc.worker.local_list().iter()).collect();
            for code in own {
                *holders.entry(code).or_default() += 1;
            }
        }
        if total > self.storage_total_bytes {
            self.storage_total_bytes = total;
            self.storage_redundant_bytes = holders.iter().map(|(code, &n)| (n - 1) * 8 * code.len() as u64).sum();
        }
    }

    fn check_coverage(&mut self) {
        let Some(audit) = self.audit.as_mut() else { return };
        let tree = &self.tree;
        let mut held: BTreeSet<NodeIdx> = self.in_flight.keys().copied().collect();
        let mut computing = BTreeSet::new();
        for proc in self.procs.iter().filter(|p| p.life == Life::Active) {
            held.extend(proc.worker.pool().iter().map(|e| e.node));
            computing.extend(proc.worker.computing().map(|e| e.node));
            for input in &proc.inbox {
                if let Input::Msg(m) = input {
                    held.extend(m.codes().iter().filter_map(|c| tree.lookup(c)));
                }
            }
        }
        let live: Vec<&Worker> = self
            .procs
            .iter()
            .filter(|p| matches!(p.life, Life::Active | Life::Terminated))
            .map(|p| &p.worker)
            .collect();
        audit.check_coverage(
            tree,
            self.now,
            |v| {
                held.contains(&v) || computing.contains(&v) || {
                    let code = tree.code_of(v);
                    live.iter().any(|w| w.table().covers(&code))
                }
            },
            |v| computing.contains(&v),
        );
    }

    fn result(&self) -> RunResult {
        let outcome = self.outcome.unwrap_or(Outcome::Timeout);
        let processes: Vec<ProcessReport> = self
            .procs
            .iter()
            .enumerate()
            .map(|(id, p)| ProcessReport {
                id,
                started: p.started,
                fate: match p.life {
                    Life::Dormant => ProcessFate::NeverJoined,
                    Life::Active => ProcessFate::Running,
                    Life::Terminated => ProcessFate::Terminated { at: p.ended.unwrap_or(self.now) },
                    Life::Crashed => ProcessFate::Crashed { at: p.ended.unwrap_or(self.now) },
                },
                best: p.worker.best().optimum(),
                counters: p.worker.counters.clone(),
            })
            .collect();
        let terminated: Vec<&ProcessReport> =
            processes.iter().filter(|p| matches!(p.fate, ProcessFate::Terminated { .. })).collect();
        let (optimum, execution_time) = if outcome == Outcome::Terminated {
            let opt = terminated.iter().filter_map(|p| p.best).min_by(f64::total_cmp);
            let end = terminated
                .iter()
                .map(|p| match p.fate {
                    ProcessFate::Terminated { at } => at,
                    _ => unreachable!(),
                })
                .fold(0.0, f64::max);
            (opt, end)
        } else {
            (None, self.now)
        };
        let mut aggregate = MetricCounters::default();
        for p in &processes {
            aggregate.absorb(&p.counters);
        }
        let row =
            derive_row(&processes, execution_time, self.storage_total_bytes, self.storage_redundant_bytes, &aggregate);
        let mut audit_violations = self.audit.as_ref().map(|a| a.violations().to_vec()).unwrap_or_default();
        if self.audit.is_some() && outcome == Outcome::Terminated {
            let expected = crate::bnb::sequential_solve(&self.tree, self.scenario.rule, false).optimum;
            if terminated.iter().any(|p| p.best != expected) {
                audit_violations.push("a terminated process holds a non-optimal incumbent".into());
            }
        }
        RunResult {
            outcome,
            optimum,
            execution_time,
            execution_hours: execution_time / 3600.0,
            processes,
            aggregate,
            storage_total_bytes: self.storage_total_bytes,
            storage_redundant_bytes: self.storage_redundant_bytes,
            events_processed: self.events_processed,
            messages_sent: self.messages_sent,
            messages_dropped: self.messages_dropped,
            audit_violations,
            row,
        }
    }
}
