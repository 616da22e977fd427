use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Ctx, Message, Note, Payload, ProtocolError, ProtocolParams, Timer};
use crate::bnb::{children_of, eliminate_check, ActivePool, BestKnown, PoolEntry, SelectionRule};
use crate::membership::{MembershipParams, MembershipView, ProcessId};
use crate::metrics::MetricCounters;
use crate::sim::SimTime;
use crate::treecode::{select_recovery, termination_detected, CompletedTable, ProblemCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Running,
    Terminated,
    Crashed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerConfig {
    pub params: ProtocolParams,
    pub membership: MembershipParams,
    pub rule: SelectionRule,
    pub pruning: bool,
    /// Resolved request timeout in seconds.
    pub request_timeout: f64,
}

#[derive(Debug, Clone)]
pub struct Worker {
    id: ProcessId,
    config: WorkerConfig,
    pool: ActivePool,
    /// Completions not yet sent in a work report, contracted.
    local_list: CompletedTable,
    /// Everything this process knows to be completed, including `local_list`.
    table: CompletedTable,
    /// Codes branched here whose completion has not been established yet.
    solved_marks: BTreeSet<ProblemCode>,
    best: BestKnown,
    view: MembershipView,
    computing: Option<PoolEntry>,
    pending_request: Option<u64>,
    next_request: u64,
    failures: u32,
    retry_armed: bool,
    list_token: u64,
    last_update: SimTime,
    last_completed: Option<ProblemCode>,
    starved_since: Option<SimTime>,
    status: Status,
    pub counters: MetricCounters,
}

impl Worker {
    pub fn new(id: ProcessId, config: WorkerConfig, view: MembershipView) -> Self {
        Self {
            id,
            pool: ActivePool::new(config.rule),
            config,
            local_list: CompletedTable::new(),
            table: CompletedTable::new(),
            solved_marks: BTreeSet::new(),
            best: BestKnown::default(),
            view,
            computing: None,
            pending_request: None,
            next_request: 0,
            failures: 0,
            retry_armed: false,
            list_token: 0,
            last_update: 0.0,
            last_completed: None,
            starved_since: None,
            status: Status::Running,
            counters: MetricCounters::default(),
        }
    }

    pub fn id(&self) -> ProcessId {
        self.id
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }

    pub fn pool(&self) -> &ActivePool {
        &self.pool
    }

    pub fn table(&self) -> &CompletedTable {
        &self.table
    }

    pub fn local_list(&self) -> &CompletedTable {
        &self.local_list
    }

    pub fn solved_marks(&self) -> &BTreeSet<ProblemCode> {
        &self.solved_marks
    }

    pub fn best(&self) -> BestKnown {
        self.best
    }

    pub fn view(&self) -> &MembershipView {
        &self.view
    }

    pub fn computing(&self) -> Option<&PoolEntry> {
        self.computing.as_ref()
    }

    pub fn pending_request(&self) -> Option<u64> {
        self.pending_request
    }

    pub fn is_idle(&self) -> bool {
        self.is_running() && self.computing.is_none() && self.pool.is_empty()
    }

    /// Bytes held in the table plus the unreported list, under the message byte model.
    pub fn storage_bytes(&self) -> u64 {
        8 * (self.table.pair_count() + self.local_list.pair_count()) as u64
    }

    pub(crate) fn mark_crashed(&mut self) {
        self.status = Status::Crashed;
        self.computing = None;
    }

    fn params(&self) -> &ProtocolParams {
        &self.config.params
    }

    fn charge_contraction(&mut self, ctx: &mut Ctx<'_>, touched: usize) {
        let dt = touched as f64 * self.config.params.contraction_cost;
        self.counters.contraction_time += dt;
        ctx.now += dt;
    }

    fn send(&mut self, ctx: &mut Ctx<'_>, receiver: ProcessId, payload: Payload) {
        let msg = Message::new(self.id, receiver, payload);
        self.counters.comm_bytes_sent += msg.size_bytes();
        *self.counters.messages_by_kind.entry(msg.kind()).or_default() += 1;
        ctx.send(msg);
    }

    fn random_other(&self, ctx: &mut Ctx<'_>) -> Option<ProcessId> {
        self.view.others().choose(ctx.rng).copied()
    }

    /// Arms the periodic timers. Table-gossip phases are staggered per process.
    pub fn start(&mut self, ctx: &mut Ctx<'_>) {
        if self.params().table_gossip {
            let phase = ctx.rng.random::<f64>() * self.params().table_interval;
            ctx.set_timer(phase, Timer::TableGossip);
        }
        if self.config.membership.enabled {
            let phase = ctx.rng.random::<f64>() * self.config.membership.gossip_interval;
            ctx.set_timer(phase, Timer::MemberGossip);
        }
    }

    /// Gives this process the root problem.
    pub fn seed_root(&mut self, ctx: &mut Ctx<'_>) {
        let root = ctx.tree.root();
        self.pool.insert(PoolEntry {
            code: ProblemCode::root(),
            node: root,
            bound: ctx.tree.node(root).bound,
            recovered: false,
        });
    }

    /// Announces a newly started process to the gossip servers.
    pub fn join(&mut self, ctx: &mut Ctx<'_>) {
        let hb = self.view.heartbeat();
        let servers: Vec<ProcessId> =
            self.config.membership.servers.iter().copied().filter(|&s| s != self.id).collect();
        for s in servers {
            self.send(ctx, s, Payload::Join { heartbeat: hb });
        }
        let retry = self.config.membership.join_retry;
        ctx.set_timer(retry, Timer::JoinRetry);
    }

    /// Records a fathomed or derived completion and propagates it upward.
    ///
    /// The table insert merges completed siblings into their parent, so the
    /// code that lands in the local list is the highest ancestor now known to
    /// be complete.
    pub fn complete_problem(&mut self, code: ProblemCode, ctx: &mut Ctx<'_>) {
        let (placed, touched) = self.table.insert(code);
        let mut touched = touched;
        if let Some(placed) = placed {
            touched += self.local_list.insert(placed.clone()).1;
            let done: Vec<ProblemCode> =
                self.solved_marks.range(&placed..).take_while(|c| placed.covers(c)).cloned().collect();
            for c in done {
                self.solved_marks.remove(&c);
            }
            self.last_update = ctx.now;
            self.list_token += 1;
            let interval = self.params().report_interval;
            ctx.set_timer(interval, Timer::ReportCheck { token: self.list_token });
            ctx.note(Note::Recorded { code: placed.clone() });
            self.last_completed = Some(placed);
        }
        self.charge_contraction(ctx, touched);
    }

    /// Sends the local list as a work report when it is full or stale.
    pub fn maybe_emit_report(&mut self, ctx: &mut Ctx<'_>) {
        if self.local_list.is_empty() {
            return;
        }
        let full = self.local_list.len() >= self.params().report_codes;
        let stale = ctx.now - self.last_update >= self.params().report_interval;
        if !(full || stale) {
            return;
        }
        let codes = self.local_list.drain();
        let others = self.view.others();
        let m = self.params().report_targets.min(others.len());
        let targets: Vec<ProcessId> = others.choose_multiple(ctx.rng, m).copied().collect();
        for t in targets {
            let best = self.best.value;
            self.send(ctx, t, Payload::WorkReport { codes: codes.clone(), best });
        }
    }

    fn adopt_best(&mut self, value: f64, source: ProcessId) {
        self.best.offer(value, Some(source));
    }

    /// Folds completed codes from another process into the table and drops
    /// pooled work they cover.
    pub fn on_work_report(&mut self, codes: Vec<ProblemCode>, best: f64, source: ProcessId, ctx: &mut Ctx<'_>) {
        self.adopt_best(best, source);
        let mut touched = 0;
        let mut grew = false;
        for code in codes {
            let (placed, t) = self.table.insert(code);
            touched += t;
            if let Some(placed) = placed {
                grew = true;
                ctx.note(Note::Recorded { code: placed });
            }
        }
        self.charge_contraction(ctx, touched);
        if grew {
            self.drop_covered_work(ctx);
        }
    }

    fn drop_covered_work(&mut self, ctx: &mut Ctx<'_>) {
        let table = &self.table;
        let removed = self.pool.remove_where(|e| table.covers(&e.code));
        let stale: Vec<ProblemCode> = self.solved_marks.iter().filter(|c| table.covers(c)).cloned().collect();
        for c in stale {
            self.solved_marks.remove(&c);
        }
        self.counters.interrupted_entries += removed.len() as u64;
        self.charge_contraction(ctx, removed.len());
    }

    /// Sends the full table to one random member.
    pub fn gossip_table(&mut self, ctx: &mut Ctx<'_>) {
        if let Some(target) = self.random_other(ctx) {
            let codes = self.table.to_vec();
            let best = self.best.value;
            self.send(ctx, target, Payload::TableGossip { codes, best });
        }
    }

    /// Asks a random member for work. With nobody else in the view the attempt
    /// fails immediately and goes straight to recovery.
    pub fn request_work(&mut self, ctx: &mut Ctx<'_>) -> Result<(), ProtocolError> {
        if !self.is_idle() || self.pending_request.is_some() {
            return Ok(());
        }
        match self.random_other(ctx) {
            Some(target) => {
                self.next_request += 1;
                let request = self.next_request;
                self.pending_request = Some(request);
                self.send(ctx, target, Payload::WorkRequest { request });
                let timeout = self.config.request_timeout;
                ctx.set_timer(timeout, Timer::RequestTimeout { request });
                Ok(())
            }
            None => {
                self.failures = self.failures.max(self.params().fail_threshold.saturating_sub(1));
                self.on_request_failed(ctx)
            }
        }
    }

    /// Grants half the pool (the entries this process would pick last) when it
    /// holds more than `min_share`, otherwise denies.
    pub fn on_work_request(&mut self, requester: ProcessId, request: u64, ctx: &mut Ctx<'_>) {
        if self.pool.len() > self.params().min_share {
            let give = self.pool.len().div_ceil(2);
            let codes: Vec<ProblemCode> = self.pool.take_last(give).into_iter().map(|e| e.code).collect();
            let best = self.best.value;
            self.send(ctx, requester, Payload::WorkGrant { request, codes, best });
        } else {
            self.send(ctx, requester, Payload::WorkDenied { request });
        }
    }

    fn on_work_grant(
        &mut self,
        request: u64,
        codes: Vec<ProblemCode>,
        best: f64,
        source: ProcessId,
        ctx: &mut Ctx<'_>,
    ) -> Result<(), ProtocolError> {
        self.adopt_best(best, source);
        if self.pending_request == Some(request) {
            self.pending_request = None;
        }
        self.failures = 0;
        for code in codes {
            self.admit(code, false, ctx)?;
        }
        Ok(())
    }

    /// Puts a subproblem into the pool unless it is already known complete or
    /// its bound is eliminated, in which case it is fathomed on the spot.
    fn admit(&mut self, code: ProblemCode, recovered: bool, ctx: &mut Ctx<'_>) -> Result<(), ProtocolError> {
        if self.table.covers(&code) {
            self.counters.interrupted_entries += 1;
            return Ok(());
        }
        let node = ctx
            .tree
            .lookup(&code)
            .ok_or_else(|| ProtocolError::UnknownSubproblem { process: self.id, code: code.clone() })?;
        let bound = ctx.tree.node(node).bound;
        if self.config.pruning && eliminate_check(bound, &self.best) {
            ctx.note(Note::Fathomed { node });
            self.complete_problem(code, ctx);
        } else {
            self.pool.insert(PoolEntry { code, node, bound, recovered });
        }
        Ok(())
    }

    /// A denial or timeout. After `fail_threshold` consecutive failures the
    /// process recreates work by complementing a completed code.
    pub fn on_request_failed(&mut self, ctx: &mut Ctx<'_>) -> Result<(), ProtocolError> {
        self.failures += 1;
        self.counters.failed_requests += 1;
        if self.table.is_empty() {
            self.starved_since.get_or_insert(ctx.now);
        }
        if self.failures >= self.params().fail_threshold {
            self.failures = 0;
            match select_recovery(&self.table, self.last_completed.as_ref()) {
                Some(code) => {
                    self.counters.recoveries += 1;
                    self.admit(code, true, ctx)?;
                    return Ok(());
                }
                None if termination_detected(&self.table) => {
                    self.check_termination(ctx);
                    return Ok(());
                }
                None if self.table.is_empty() => {
                    let since = self.starved_since.unwrap_or(ctx.now);
                    if ctx.now - since >= self.params().root_recovery_delay {
                        self.starved_since = None;
                        self.counters.recoveries += 1;
                        self.admit(ProblemCode::root(), true, ctx)?;
                        return Ok(());
                    }
                }
                None => {}
            }
        }
        let delay = if self.view.others().is_empty() { self.config.request_timeout } else { self.params().retry_delay };
        if delay > 0.0 {
            self.retry_armed = true;
            ctx.set_timer(delay, Timer::RetryRequest);
        }
        Ok(())
    }

    /// Detects termination from the table and broadcasts the root code to
    /// every member of the view.
    pub fn check_termination(&mut self, ctx: &mut Ctx<'_>) -> bool {
        if !self.is_running() || !termination_detected(&self.table) {
            return false;
        }
        let best = self.best.value;
        for member in self.view.others() {
            self.send(ctx, member, Payload::TerminationNotice { best });
        }
        self.local_list.drain();
        self.pool = ActivePool::new(self.config.rule);
        self.status = Status::Terminated;
        ctx.note(Note::Terminated);
        true
    }

    /// Handles one incoming message.
    pub fn on_message(&mut self, msg: Message, ctx: &mut Ctx<'_>) -> Result<(), ProtocolError> {
        if !self.is_running() {
            return Ok(());
        }
        let from = msg.sender;
        match msg.payload {
            Payload::WorkRequest { request } => self.on_work_request(from, request, ctx),
            Payload::WorkGrant { request, codes, best } => self.on_work_grant(request, codes, best, from, ctx)?,
            Payload::WorkDenied { request } => {
                if self.pending_request == Some(request) {
                    self.pending_request = None;
                    if self.is_idle() {
                        self.on_request_failed(ctx)?;
                    }
                }
            }
            Payload::WorkReport { codes, best } | Payload::TableGossip { codes, best } => {
                self.on_work_report(codes, best, from, ctx)
            }
            Payload::TerminationNotice { best } => {
                self.on_work_report(vec![ProblemCode::root()], best, from, ctx);
            }
            Payload::Join { heartbeat } => {
                self.view.heard_from(from, heartbeat, ctx.now);
                if self.config.membership.enabled {
                    let entries = self.view.digest();
                    self.send(ctx, from, Payload::ViewGossip { entries });
                }
            }
            Payload::ViewGossip { entries } => {
                self.view.merge(entries, ctx.now);
            }
        }
        Ok(())
    }

    pub fn on_timer(&mut self, timer: Timer, ctx: &mut Ctx<'_>) -> Result<(), ProtocolError> {
        if !self.is_running() {
            return Ok(());
        }
        match timer {
            Timer::ReportCheck { token } => {
                if token == self.list_token {
                    self.maybe_emit_report(ctx);
                }
            }
            Timer::TableGossip => {
                self.gossip_table(ctx);
                let interval = self.params().table_interval;
                ctx.set_timer(interval, Timer::TableGossip);
            }
            Timer::RequestTimeout { request } => {
                if self.pending_request == Some(request) {
                    self.pending_request = None;
                    if self.is_idle() {
                        self.on_request_failed(ctx)?;
                    }
                }
            }
            Timer::RetryRequest => {
                self.retry_armed = false;
            }
            Timer::MemberGossip => {
                self.gossip_view(ctx);
                let interval = self.config.membership.gossip_interval;
                ctx.set_timer(interval, Timer::MemberGossip);
            }
            Timer::JoinRetry => {
                if self.view.others().is_empty() {
                    self.join(ctx);
                }
            }
        }
        Ok(())
    }

    /// One membership round: bump the heartbeat, push the view to a random
    /// member, and drop members that have gone quiet.
    pub fn gossip_view(&mut self, ctx: &mut Ctx<'_>) {
        let entries = self.view.prepare_gossip(ctx.now);
        let fail_timeout = self.config.membership.fail_timeout;
        self.view.suspect_failures(ctx.now, fail_timeout);
        if let Some(target) = self.random_other(ctx) {
            self.send(ctx, target, Payload::ViewGossip { entries });
        }
    }

    /// Selects the next subproblem and charges its cost. Entries that became
    /// covered or eliminated since insertion are dropped without cost.
    /// Returns the compute time of the selected node.
    pub fn begin_step(&mut self, ctx: &mut Ctx<'_>) -> Option<f64> {
        if !self.is_running() || self.computing.is_some() {
            return None;
        }
        while let Some(entry) = self.pool.select_next() {
            if self.table.covers(&entry.code) {
                self.counters.interrupted_entries += 1;
                continue;
            }
            if self.config.pruning && eliminate_check(entry.bound, &self.best) {
                ctx.note(Note::Fathomed { node: entry.node });
                self.complete_problem(entry.code, ctx);
                if !self.is_running() {
                    return None;
                }
                continue;
            }
            let cost = ctx.tree.node(entry.node).time_cost;
            self.counters.bnb_time += cost;
            self.counters.nodes_expanded += 1;
            ctx.note(Note::Expanded { node: entry.node, recovered: entry.recovered });
            self.computing = Some(entry);
            self.failures = 0;
            self.starved_since = None;
            return Some(cost);
        }
        None
    }

    /// Applies the result of the node charged by [`Worker::begin_step`].
    pub fn finish_step(&mut self, ctx: &mut Ctx<'_>) {
        let Some(entry) = self.computing.take() else {
            return;
        };
        let tree = ctx.tree;
        let node = tree.node(entry.node);
        if node.feasible {
            self.best.offer(node.bound, Some(self.id));
        }
        if self.table.covers(&entry.code) {
            self.counters.discarded_results += 1;
            return;
        }
        let children = children_of(tree, &entry.code, entry.node);
        if children.is_empty() {
            ctx.note(Note::Fathomed { node: entry.node });
            self.complete_problem(entry.code, ctx);
            return;
        }
        self.solved_marks.insert(entry.code.clone());
        for (code, k) in children {
            if self.table.covers(&code) {
                continue;
            }
            let bound = tree.node(k).bound;
            if self.config.pruning && eliminate_check(bound, &self.best) {
                ctx.note(Note::Fathomed { node: k });
                self.complete_problem(code, ctx);
            } else {
                self.pool.insert(PoolEntry { code, node: k, bound, recovered: entry.recovered });
            }
        }
    }

    /// Work-request bookkeeping for an idle process: request unless a request
    /// or a delayed retry is already outstanding.
    pub fn idle_action(&mut self, ctx: &mut Ctx<'_>) -> Result<(), ProtocolError> {
        if self.is_idle() && self.pending_request.is_none() && !self.retry_armed {
            self.request_work(ctx)?;
        }
        Ok(())
    }

    /// Full synchronous iteration: expand one node, handle queued messages,
    /// then report and check termination.
    pub fn step<I>(&mut self, ctx: &mut Ctx<'_>, pending: I) -> Result<(), ProtocolError>
    where
        I: IntoIterator<Item = Message>,
    {
        if let Some(cost) = self.begin_step(ctx) {
            ctx.now += cost;
            self.finish_step(ctx);
        }
        for msg in pending {
            self.on_message(msg, ctx)?;
        }
        self.maybe_emit_report(ctx);
        self.check_termination(ctx);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::protocol::{Effects, MessageKind};
    use crate::trees::{parse_basic_tree_str, BasicTree};

    const THREE: &str = "bbtree v1\n0 -1 -1 -1 1.0 0.5 0\n1 0 1 0 5.0 0.25 1\n2 0 1 1 3.0 0.25 1\n";
    // Root on x1; x1=0 is a leaf (bound 2); x1=1 branches on x2 into leaves 4 and 9.
    const FIVE: &str = "bbtree v1\n0 -1 -1 -1 1 1 0\n1 0 1 0 2 1 1\n2 0 1 1 3 1 0\n3 2 2 0 4 1 1\n4 2 2 1 9 1 1\n";

    fn config(pruning: bool) -> WorkerConfig {
        WorkerConfig {
            params: ProtocolParams::default(),
            membership: MembershipParams::default(),
            rule: SelectionRule::DepthFirst,
            pruning,
            request_timeout: 0.02,
        }
    }

    fn worker(id: ProcessId, n: usize, pruning: bool) -> Worker {
        Worker::new(id, config(pruning), MembershipView::with_members(id, 0..n, 0.0))
    }

    struct Harness {
        tree: BasicTree,
        rng: ChaCha8Rng,
        now: f64,
    }

    impl Harness {
        fn new(text: &str) -> Self {
            Self { tree: parse_basic_tree_str(text).unwrap(), rng: ChaCha8Rng::seed_from_u64(1), now: 0.0 }
        }

        fn run<R>(&mut self, f: impl FnOnce(&mut Ctx<'_>) -> R) -> (R, Effects) {
            let mut ctx = Ctx::new(self.now, &self.tree, &mut self.rng);
            let r = f(&mut ctx);
            self.now = ctx.now;
            (r, ctx.take_effects())
        }
    }

    fn code(s: &str) -> ProblemCode {
        s.parse().unwrap()
    }

    fn kinds(e: &Effects) -> Vec<MessageKind> {
        e.sends.iter().map(|(_, m)| m.kind()).collect()
    }

    #[test]
    fn sibling_completions_contract() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 1, true);
        h.run(|ctx| w.complete_problem(code("x1=0"), ctx));
        assert_eq!(w.local_list().to_vec(), vec![code("x1=0")]);
        h.run(|ctx| w.complete_problem(code("x1=1"), ctx));
        assert_eq!(w.local_list().to_vec(), vec![ProblemCode::root()]);
        assert!(w.counters.contraction_time > 0.0);
    }

    #[test]
    fn lone_completion_adds_one_code() {
        let mut h = Harness::new(FIVE);
        let mut w = worker(0, 1, true);
        h.run(|ctx| w.complete_problem(code("x1=1.x2=0"), ctx));
        assert_eq!(w.local_list().to_vec(), vec![code("x1=1.x2=0")]);
    }

    #[test]
    fn report_when_list_is_full() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 5, true);
        for v in 1..=8 {
            h.run(|ctx| w.complete_problem(ProblemCode::from_bits(&[(v, 0)]), ctx));
        }
        let (_, e) = h.run(|ctx| w.maybe_emit_report(ctx));
        assert_eq!(kinds(&e), vec![MessageKind::WorkReport; 2]);
        let targets: BTreeSet<_> = e.sends.iter().map(|(_, m)| m.receiver).collect();
        assert_eq!(targets.len(), 2);
        assert!(!targets.contains(&0));
        assert!(w.local_list().is_empty());
        assert_eq!(w.table().len(), 8);
    }

    #[test]
    fn no_report_before_threshold_or_timeout() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 5, true);
        for v in 1..=3 {
            h.run(|ctx| w.complete_problem(ProblemCode::from_bits(&[(v, 0)]), ctx));
        }
        let (_, e) = h.run(|ctx| w.maybe_emit_report(ctx));
        assert!(e.sends.is_empty());
        h.now += 5.0;
        let (_, e) = h.run(|ctx| w.maybe_emit_report(ctx));
        assert_eq!(e.sends.len(), 2);
    }

    #[test]
    fn report_with_singleton_view_folds_locally() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 1, true);
        for v in 1..=8 {
            h.run(|ctx| w.complete_problem(ProblemCode::from_bits(&[(v, 1)]), ctx));
        }
        let (_, e) = h.run(|ctx| w.maybe_emit_report(ctx));
        assert!(e.sends.is_empty());
        assert!(w.local_list().is_empty());
        assert_eq!(w.table().len(), 8);
    }

    #[test]
    fn report_interrupts_covered_work() {
        let mut h = Harness::new(FIVE);
        let mut w = worker(1, 2, true);
        h.run(|ctx| {
            w.admit(code("x1=1.x2=0"), false, ctx).unwrap();
            w.admit(code("x1=0"), false, ctx).unwrap();
        });
        assert_eq!(w.pool().len(), 2);
        h.run(|ctx| w.on_work_report(vec![code("x1=1")], 7.0, 0, ctx));
        assert_eq!(w.pool().len(), 1);
        assert_eq!(w.best().value, 7.0);
        h.run(|ctx| w.on_work_report(vec![], 8.0, 0, ctx));
        assert_eq!(w.best().value, 7.0, "worse incumbent ignored");
        h.run(|ctx| w.on_work_report(vec![code("x1=0")], 8.0, 0, ctx));
        assert!(termination_detected(w.table()));
    }

    #[test]
    fn table_gossip_carries_incumbent_even_when_empty() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 4, true);
        let (_, e) = h.run(|ctx| w.on_timer(Timer::TableGossip, ctx).unwrap());
        assert_eq!(kinds(&e), vec![MessageKind::TableGossip]);
        match &e.sends[0].1.payload {
            Payload::TableGossip { codes, best } => {
                assert!(codes.is_empty());
                assert!(best.is_infinite());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(e.timers, vec![(30.0, Timer::TableGossip)]);
    }

    #[test]
    fn idle_worker_requests_work() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 4, true);
        let (_, e) = h.run(|ctx| w.idle_action(ctx).unwrap());
        assert_eq!(kinds(&e), vec![MessageKind::WorkRequest]);
        assert_eq!(w.pending_request(), Some(1));
        assert!(matches!(e.timers[0].1, Timer::RequestTimeout { request: 1 }));
        let (_, e) = h.run(|ctx| w.idle_action(ctx).unwrap());
        assert!(e.sends.is_empty(), "one outstanding request at a time");
    }

    #[test]
    fn lone_worker_goes_to_recovery() {
        let mut h = Harness::new(FIVE);
        let mut w = worker(0, 1, true);
        h.run(|ctx| w.complete_problem(code("x1=0"), ctx));
        let (_, e) = h.run(|ctx| w.idle_action(ctx).unwrap());
        assert!(e.sends.is_empty());
        assert_eq!(w.pool().iter().map(|e| e.code.clone()).collect::<Vec<_>>(), vec![code("x1=1")]);
        assert_eq!(w.counters.recoveries, 1);
    }

    #[test]
    fn terminated_worker_does_not_request() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 3, true);
        h.run(|ctx| w.on_work_report(vec![ProblemCode::root()], 1.0, 1, ctx));
        h.run(|ctx| w.check_termination(ctx));
        let (_, e) = h.run(|ctx| w.idle_action(ctx).unwrap());
        assert!(e.sends.is_empty());
    }

    #[test]
    fn grant_half_of_a_large_pool() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 2, false);
        for v in 1..=6 {
            w.pool.insert(PoolEntry { code: ProblemCode::from_bits(&[(v, 0)]), node: 0, bound: 0.0, recovered: false });
        }
        let (_, e) = h.run(|ctx| w.on_work_request(1, 9, ctx));
        match &e.sends[0].1.payload {
            Payload::WorkGrant { request, codes, .. } => {
                assert_eq!(*request, 9);
                assert_eq!(codes.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(w.pool().len(), 3);
    }

    #[test]
    fn deny_from_small_pool() {
        let mut h = Harness::new(THREE);
        for size in [0, 1] {
            let mut w = worker(0, 2, false);
            for v in 0..size {
                w.pool.insert(PoolEntry {
                    code: ProblemCode::from_bits(&[(v, 0)]),
                    node: 0,
                    bound: 0.0,
                    recovered: false,
                });
            }
            let (_, e) = h.run(|ctx| w.on_work_request(1, 1, ctx));
            assert_eq!(kinds(&e), vec![MessageKind::WorkDenied]);
            assert_eq!(w.pool().len(), size as usize);
        }
    }

    fn deny(w: &mut Worker, h: &mut Harness) -> Effects {
        h.run(|ctx| {
            w.idle_action(ctx).unwrap();
            let request = w.pending_request().unwrap();
            w.on_message(Message::new(1, 0, Payload::WorkDenied { request }), ctx).unwrap();
        })
        .1
    }

    #[test]
    fn third_denial_recovers_sibling() {
        let mut h = Harness::new(FIVE);
        let mut w = worker(0, 3, true);
        h.run(|ctx| w.on_work_report(vec![code("x1=0")], 50.0, 1, ctx));
        deny(&mut w, &mut h);
        assert!(w.pool().is_empty(), "first denial only retries");
        deny(&mut w, &mut h);
        deny(&mut w, &mut h);
        assert_eq!(w.pool().iter().map(|e| e.code.clone()).collect::<Vec<_>>(), vec![code("x1=1")]);
        assert!(w.pool().iter().all(|e| e.recovered));
    }

    #[test]
    fn starving_empty_table_restarts_from_root() {
        let mut h = Harness::new(THREE);
        let mut w = worker(1, 1, true);
        for _ in 0..3 {
            h.run(|ctx| w.on_request_failed(ctx).unwrap());
        }
        assert!(w.pool().is_empty(), "no recovery before the delay");
        h.now += 61.0;
        for _ in 0..3 {
            h.run(|ctx| w.on_request_failed(ctx).unwrap());
        }
        assert_eq!(w.pool().iter().map(|e| e.code.clone()).collect::<Vec<_>>(), vec![ProblemCode::root()]);
    }

    #[test]
    fn recovery_on_root_table_terminates() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 3, true);
        h.run(|ctx| w.on_work_report(vec![ProblemCode::root()], 3.0, 1, ctx));
        for _ in 0..3 {
            h.run(|ctx| w.on_request_failed(ctx).unwrap());
        }
        assert_eq!(w.status(), Status::Terminated);
    }

    #[test]
    fn termination_broadcasts_to_view() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 10, true);
        h.run(|ctx| w.on_work_report(vec![ProblemCode::root()], 3.0, 1, ctx));
        let (done, e) = h.run(|ctx| w.check_termination(ctx));
        assert!(done);
        assert_eq!(kinds(&e), vec![MessageKind::TerminationNotice; 9]);
        assert_eq!(w.status(), Status::Terminated);
        let (_, e) = h.run(|ctx| {
            w.on_message(Message::new(3, 0, Payload::WorkRequest { request: 1 }), ctx).unwrap();
            w.on_timer(Timer::TableGossip, ctx).unwrap();
            w.idle_action(ctx).unwrap();
        });
        assert!(e.sends.is_empty(), "terminated process stays silent");
    }

    #[test]
    fn no_termination_on_partial_table() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 3, true);
        h.run(|ctx| w.on_work_report(vec![code("x1=0")], 3.0, 1, ctx));
        assert!(!h.run(|ctx| w.check_termination(ctx)).0);
        assert_eq!(w.status(), Status::Running);
    }

    #[test]
    fn notice_leads_to_local_detection() {
        let mut h = Harness::new(THREE);
        let mut w = worker(2, 3, true);
        let (_, e) = h.run(|ctx| {
            w.step(ctx, [Message::new(0, 2, Payload::TerminationNotice { best: 3.0 })]).unwrap();
        });
        assert_eq!(w.status(), Status::Terminated);
        assert_eq!(w.best().value, 3.0);
        assert_eq!(kinds(&e), vec![MessageKind::TerminationNotice; 2]);
    }

    #[test]
    fn feasible_leaf_improves_incumbent() {
        let mut h = Harness::new(FIVE);
        let mut w = worker(0, 1, true);
        h.run(|ctx| w.admit(code("x1=0"), false, ctx).unwrap());
        h.run(|ctx| w.step(ctx, []).unwrap());
        assert_eq!(w.best().value, 2.0);
    }

    #[test]
    fn eliminated_children_are_never_pooled() {
        let mut h = Harness::new(FIVE);
        let mut w = worker(0, 1, true);
        w.best.offer(3.5, None);
        h.run(|ctx| w.admit(code("x1=1"), false, ctx).unwrap());
        h.run(|ctx| w.step(ctx, []).unwrap());
        // x1=1.x2=0 (bound 4) and x1=1.x2=1 (bound 9) both fathomed, so x1=1 completes.
        assert!(w.pool().is_empty());
        assert_eq!(w.table().to_vec(), vec![code("x1=1")]);
        assert!(w.solved_marks().is_empty());
    }

    #[test]
    fn single_process_solves_three_node_tree() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 1, true);
        h.run(|ctx| w.seed_root(ctx));
        for _ in 0..3 {
            h.run(|ctx| w.step(ctx, []).unwrap());
        }
        assert_eq!(w.status(), Status::Terminated);
        assert_eq!(w.best().optimum(), Some(3.0));
        assert_eq!(w.counters.bnb_time, 1.0);
    }

    #[test]
    fn corrupt_grant_is_an_error() {
        let mut h = Harness::new(THREE);
        let mut w = worker(0, 2, true);
        let msg = Message::new(1, 0, Payload::WorkGrant { request: 1, codes: vec![code("x7=1")], best: 1.0 });
        let (r, _) = h.run(|ctx| w.on_message(msg, ctx));
        assert!(matches!(r, Err(ProtocolError::UnknownSubproblem { .. })));
    }
}
