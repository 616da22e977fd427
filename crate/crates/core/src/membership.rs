//! Gossip-based group membership.
//!
//! Each member keeps a view mapping known process ids to the heartbeat
//! counter it last saw and the local time that counter last increased. Views
//! are pushed to one random member per gossip round and merged by max
//! heartbeat. A member whose heartbeat has not increased for `fail_timeout` is
//! dropped locally; the drop is remembered so stale gossip cannot resurrect
//! it, but a genuinely newer heartbeat re-adds it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::SimTime;

pub type ProcessId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub last_heard: SimTime,
    pub heartbeat: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MembershipParams {
    pub enabled: bool,
    /// Seconds between view gossip rounds.
    pub gossip_interval: f64,
    /// Silence after which a member is suspected and dropped.
    pub fail_timeout: f64,
    /// Processes that bootstrap joins. At least one must never crash.
    pub servers: Vec<ProcessId>,
    /// Seconds a joiner waits for any view before resending its Join.
    pub join_retry: f64,
}

impl Default for MembershipParams {
    fn default() -> Self {
        Self { enabled: false, gossip_interval: 1.0, fail_timeout: 30.0, servers: vec![0, 1], join_retry: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipView {
    self_id: ProcessId,
    entries: BTreeMap<ProcessId, ViewEntry>,
    /// Heartbeat at which a member was dropped.
    suspected: BTreeMap<ProcessId, u64>,
}

impl MembershipView {
    /// A view containing only `self_id`.
    pub fn singleton(self_id: ProcessId, now: SimTime) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(self_id, ViewEntry { last_heard: now, heartbeat: 0 });
        Self { self_id, entries, suspected: BTreeMap::new() }
    }

    /// A view that already knows every id in `members`.
    pub fn with_members<I: IntoIterator<Item = ProcessId>>(self_id: ProcessId, members: I, now: SimTime) -> Self {
        let mut view = Self::singleton(self_id, now);
        for id in members {
            view.entries.entry(id).or_insert(ViewEntry { last_heard: now, heartbeat: 0 });
        }
        view
    }

    pub fn self_id(&self) -> ProcessId {
        self.self_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: ProcessId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn get(&self, id: ProcessId) -> Option<&ViewEntry> {
        self.entries.get(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.entries.keys().copied()
    }

    /// Every known member except self, in id order.
    pub fn others(&self) -> Vec<ProcessId> {
        self.entries.keys().copied().filter(|&id| id != self.self_id).collect()
    }

    pub fn heartbeat(&self) -> u64 {
        self.entries[&self.self_id].heartbeat
    }

    /// Bumps the local heartbeat and returns the `(id, heartbeat)` pairs to gossip.
    pub fn prepare_gossip(&mut self, now: SimTime) -> Vec<(ProcessId, u64)> {
        let me = self.entries.get_mut(&self.self_id).expect("self always present");
        me.heartbeat += 1;
        me.last_heard = now;
        self.digest()
    }

    pub fn digest(&self) -> Vec<(ProcessId, u64)> {
        self.entries.iter().map(|(&id, e)| (id, e.heartbeat)).collect()
    }

    /// Max-merges incoming heartbeats. Returns ids that were newly added.
    pub fn merge<I: IntoIterator<Item = (ProcessId, u64)>>(&mut self, incoming: I, now: SimTime) -> Vec<ProcessId> {
        let mut added = Vec::new();
        for (id, hb) in incoming {
            if id == self.self_id {
                continue;
            }
            match self.entries.get_mut(&id) {
                Some(e) => {
                    if hb > e.heartbeat {
                        e.heartbeat = hb;
                        e.last_heard = e.last_heard.max(now);
                    }
                }
                None => {
                    if self.suspected.get(&id).is_some_and(|&dead| hb <= dead) {
                        continue;
                    }
                    self.suspected.remove(&id);
                    self.entries.insert(id, ViewEntry { last_heard: now, heartbeat: hb });
                    added.push(id);
                }
            }
        }
        added
    }

    /// Records direct contact from `id` (a Join): adds it or refreshes it.
    pub fn heard_from(&mut self, id: ProcessId, heartbeat: u64, now: SimTime) {
        if id == self.self_id {
            return;
        }
        self.suspected.remove(&id);
        let e = self.entries.entry(id).or_insert(ViewEntry { last_heard: now, heartbeat });
        e.heartbeat = e.heartbeat.max(heartbeat);
        e.last_heard = e.last_heard.max(now);
    }

    /// Drops members silent for longer than `fail_timeout`; never drops self.
    pub fn suspect_failures(&mut self, now: SimTime, fail_timeout: f64) -> Vec<ProcessId> {
        let dead: Vec<ProcessId> = self
            .entries
            .iter()
            .filter(|(&id, e)| id != self.self_id && now - e.last_heard > fail_timeout)
            .map(|(&id, _)| id)
            .collect();
        for id in &dead {
            let e = self.entries.remove(id).expect("present");
            self.suspected.insert(*id, e.heartbeat);
        }
        dead
    }
}
