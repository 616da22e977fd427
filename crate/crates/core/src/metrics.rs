//! Run measurements and the processor-sweep table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::protocol::MessageKind;

const MB: f64 = 1e6;

/// Per-process counters. Times are simulated seconds, sizes are bytes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricCounters {
    pub bnb_time: f64,
    pub contraction_time: f64,
    pub idle_time: f64,
    /// Cost of expanding nodes that some process had already expanded.
    pub redundant_work_time: f64,
    pub comm_bytes_sent: u64,
    pub messages_by_kind: BTreeMap<MessageKind, u64>,
    /// Peak size of table plus unreported list.
    pub storage_peak_bytes: u64,
    pub nodes_expanded: u64,
    pub recoveries: u64,
    /// Pool entries dropped because a table learned they were complete.
    pub interrupted_entries: u64,
    /// Expansion results thrown away because the node became covered meanwhile.
    pub discarded_results: u64,
    pub failed_requests: u64,
}

impl MetricCounters {
    pub fn messages_sent(&self) -> u64 {
        self.messages_by_kind.values().sum()
    }

    /// Adds `other` into `self`; the storage peak takes the maximum.
    pub fn absorb(&mut self, other: &MetricCounters) {
        self.bnb_time += other.bnb_time;
        self.contraction_time += other.contraction_time;
        self.idle_time += other.idle_time;
        self.redundant_work_time += other.redundant_work_time;
        self.comm_bytes_sent += other.comm_bytes_sent;
        for (k, v) in &other.messages_by_kind {
            *self.messages_by_kind.entry(*k).or_default() += v;
        }
        self.storage_peak_bytes = self.storage_peak_bytes.max(other.storage_peak_bytes);
        self.nodes_expanded += other.nodes_expanded;
        self.recoveries += other.recoveries;
        self.interrupted_entries += other.interrupted_entries;
        self.discarded_results += other.discarded_results;
        self.failed_requests += other.failed_requests;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Terminated,
    TotalFailure,
    Timeout,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Terminated => "terminated",
            Outcome::TotalFailure => "total-failure",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessFate {
    Terminated { at: f64 },
    Crashed { at: f64 },
    Running,
    NeverJoined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessReport {
    pub id: usize,
    pub started: f64,
    pub fate: ProcessFate,
    /// Incumbent held when the run ended.
    pub best: Option<f64>,
    pub counters: MetricCounters,
}

/// One row of the sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub processors: usize,
    pub execution_hours: f64,
    pub bnb_pct: f64,
    pub contraction_pct: f64,
    pub storage_total_mb: f64,
    pub storage_redundant_mb: f64,
    /// Total MB sent per execution hour per process.
    pub comm_mb_per_hour: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub outcome: Outcome,
    pub optimum: Option<f64>,
    /// Simulated time at which the run ended, in seconds.
    pub execution_time: f64,
    pub execution_hours: f64,
    pub processes: Vec<ProcessReport>,
    pub aggregate: MetricCounters,
    /// Largest sampled sum of per-process storage.
    pub storage_total_bytes: u64,
    /// Bytes of codes held by more than one process, at the same sample.
    pub storage_redundant_bytes: u64,
    pub events_processed: u64,
    pub messages_sent: u64,
    pub messages_dropped: u64,
    pub audit_violations: Vec<String>,
    pub row: TableRow,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("run results always serialize")
    }
}

/// Busy+idle accounting: percentages are taken over the summed lifetime of
/// the processes that terminated, or of every process if none did.
pub(crate) fn derive_row(
    processes: &[ProcessReport],
    execution_time: f64,
    storage_total_bytes: u64,
    storage_redundant_bytes: u64,
    aggregate: &MetricCounters,
) -> TableRow {
    let terminated: Vec<&ProcessReport> =
        processes.iter().filter(|p| matches!(p.fate, ProcessFate::Terminated { .. })).collect();
    let pool: Vec<&ProcessReport> = if terminated.is_empty() {
        processes.iter().filter(|p| p.fate != ProcessFate::NeverJoined).collect()
    } else {
        terminated
    };
    let mut wall = 0.0;
    let mut bnb = 0.0;
    let mut contraction = 0.0;
    for p in &pool {
        let end = match p.fate {
            ProcessFate::Terminated { at } | ProcessFate::Crashed { at } => at,
            _ => execution_time,
        };
        wall += (end - p.started).max(0.0);
        bnb += p.counters.bnb_time;
        contraction += p.counters.contraction_time;
    }
    let pct = |x: f64| if wall > 0.0 { 100.0 * x / wall } else { 0.0 };
    let hours = execution_time / 3600.0;
    let n = processes.len();
    let comm_mb = aggregate.comm_bytes_sent as f64 / MB;
    let comm_mb_per_hour = if hours > 0.0 && n > 0 { comm_mb / hours / n as f64 } else { 0.0 };
    TableRow {
        processors: n,
        execution_hours: hours,
        bnb_pct: pct(bnb),
        contraction_pct: pct(contraction),
        storage_total_mb: storage_total_bytes as f64 / MB,
        storage_redundant_mb: storage_redundant_bytes as f64 / MB,
        comm_mb_per_hour,
    }
}

pub const TABLE_COLUMNS: [&str; 7] = [
    "processors",
    "execution hours",
    "B&B time",
    "contraction time",
    "storage total MB",
    "storage redundant MB",
    "comm MB/hour/processor",
];

fn cells(row: &TableRow) -> [String; 7] {
    [
        row.processors.to_string(),
        format!("{:.2}", row.execution_hours),
        format!("{:.2}%", row.bnb_pct),
        format!("{:.2}%", row.contraction_pct),
        format!("{:.2}", row.storage_total_mb),
        format!("{:.2}", row.storage_redundant_mb),
        format!("{:.2}", row.comm_mb_per_hour),
    ]
}

/// Column-aligned rows joined by ` | `, each column right-aligned to its
/// widest value, after a `# columns:` legend line.
pub fn render_rows(rows: &[TableRow]) -> String {
    let cells: Vec<[String; 7]> = rows.iter().map(cells).collect();
    let mut widths = [0usize; 7];
    for r in &cells {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = format!("# columns: {}\n", TABLE_COLUMNS.join(" | "));
    for r in &cells {
        let line: Vec<String> = r.iter().zip(widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", line.join(" | "));
    }
    out
}

pub fn render_table(results: &[RunResult]) -> String {
    let rows: Vec<TableRow> = results.iter().map(|r| r.row).collect();
    render_rows(&rows)
}
