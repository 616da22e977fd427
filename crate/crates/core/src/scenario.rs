//! Scenario files.
//!
//! A scenario is one TOML document. Keys are order-insensitive and unknown
//! keys are rejected. Every section except `[tree]` is optional:
//!
//! ```toml
//! seed = 7
//! processes = 3
//! pruning = true                 # default true
//! selection = "depth-first"      # or "best-first"
//! audit = false
//! max_sim_time = 3600.0          # seconds; default max(100 x total node cost, 3600)
//! expect_optimum = 12.5          # oracle value for trees too large to solve here
//!
//! [tree]
//! file = "sample.bbt"            # relative to the scenario file
//! # generate = { seed = 2, nodes = 1000 }
//! granularity = 2.0              # multiply every node cost
//! # target_mean_cost = 3.47      # or rescale to this mean node cost
//!
//! [network]
//! base_latency_ms = 1.5
//! per_byte_ms = 0.005
//! loss_prob = 0.0
//!
//! [protocol]
//! report_codes = 8
//! report_targets = 2
//! report_interval = 5.0
//! table_interval = 30.0
//! table_gossip = true
//! fail_threshold = 3
//! min_share = 2
//! # request_timeout = 0.02       # default: ten request latencies
//! retry_delay = 0.0
//! contraction_cost = 1e-5
//! root_recovery_delay = 60.0
//!
//! [membership]
//! enabled = false
//! gossip_interval = 1.0
//! fail_timeout = 30.0
//! servers = [0, 1]
//! join_retry = 5.0
//!
//! [[crash]]
//! process = 1
//! at_fraction = 0.85             # or `at = <seconds>`
//!
//! [[partition]]
//! at_fraction = 0.2
//! groups = [[0, 1, 2]]           # `groups = []` heals
//!
//! [[join]]
//! at = 5.0                       # joiners take ids processes, processes + 1, ...
//! ```
//!
//! `at_fraction` times are fractions of the completion time of the same
//! scenario run without faults; that run happens during resolution.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnb::SelectionRule;
use crate::membership::{MembershipParams, ProcessId};
use crate::protocol::ProtocolParams;
use crate::sim::{run, CrashEvent, NetworkParams, PartitionEvent, Scenario, SimError};
use crate::trees::{gen_random_tree, parse_basic_tree, scale_granularity, BasicTree, GenParams, TreeError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("tree: {0}")]
    Tree(#[from] TreeError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub seed: u64,
    pub nodes: usize,
    #[serde(default)]
    pub params: GenParams,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub granularity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_mean_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashSpec {
    pub process: ProcessId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at_fraction: Option<f64>,
    pub groups: Vec<Vec<ProcessId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinSpec {
    pub at: f64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    pub processes: usize,
    #[serde(default = "yes")]
    pub pruning: bool,
    #[serde(default)]
    pub selection: SelectionRule,
    #[serde(default)]
    pub audit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sim_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_optimum: Option<f64>,
    pub tree: TreeSpec,
    #[serde(default)]
    pub network: NetworkParams,
    #[serde(default)]
    pub protocol: ProtocolParams,
    #[serde(default)]
    pub membership: MembershipParams,
    #[serde(default, rename = "crash", skip_serializing_if = "Vec::is_empty")]
    pub crashes: Vec<CrashSpec>,
    #[serde(default, rename = "partition", skip_serializing_if = "Vec::is_empty")]
    pub partitions: Vec<PartitionSpec>,
    #[serde(default, rename = "join", skip_serializing_if = "Vec::is_empty")]
    pub joins: Vec<JoinSpec>,
}

fn pick_time(at: Option<f64>, fraction: Option<f64>, what: &str) -> Result<Time, ScenarioError> {
    match (at, fraction) {
        (Some(t), None) => Ok(Time::Absolute(t)),
        (None, Some(f)) if (0.0..=1.0).contains(&f) => Ok(Time::Fraction(f)),
        (None, Some(f)) => Err(ScenarioError::Invalid(format!("{what}: at_fraction {f} outside [0, 1]"))),
        _ => Err(ScenarioError::Invalid(format!("{what}: give exactly one of `at` and `at_fraction`"))),
    }
}

#[derive(Clone, Copy)]
enum Time {
    Absolute(f64),
    Fraction(f64),
}

impl Time {
    fn resolve(self, horizon: f64) -> f64 {
        match self {
            Time::Absolute(t) => t,
            Time::Fraction(f) => f * horizon,
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    /// Loads or generates the tree and applies cost scaling. Relative tree
    /// paths are taken from `base_dir`.
    pub fn load_tree(&self, base_dir: &Path) -> Result<BasicTree, ScenarioError> {
        let spec = &self.tree;
        let tree = match (&spec.file, &spec.generate) {
            (Some(file), None) => {
                let path = base_dir.join(file);
                let f =
                    std::fs::File::open(&path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
                parse_basic_tree(std::io::BufReader::new(f))?
            }
            (None, Some(g)) => gen_random_tree(g.seed, g.nodes, &g.params)?,
            _ => return Err(ScenarioError::Invalid("[tree] needs exactly one of `file` and `generate`".into())),
        };
        let tree = match (spec.granularity, spec.target_mean_cost) {
            (None, None) => tree,
            (Some(g), None) => scale_granularity(&tree, g)?,
            (None, Some(m)) => {
                let mean = tree.mean_cost();
                if !(mean > 0.0) {
                    return Err(ScenarioError::Invalid("cannot rescale a tree whose costs are all zero".into()));
                }
                scale_granularity(&tree, m / mean)?
            }
            (Some(_), Some(_)) => {
                return Err(ScenarioError::Invalid("give at most one of `granularity` and `target_mean_cost`".into()))
            }
        };
        Ok(tree)
    }

    /// Builds the runnable scenario around an already loaded tree.
    pub fn resolve_with_tree(&self, tree: Arc<BasicTree>) -> Result<Scenario, ScenarioError> {
        let mut scenario = Scenario::new(tree, self.processes, self.seed);
        scenario.rule = self.selection;
        scenario.pruning = self.pruning;
        scenario.audit = self.audit;
        scenario.max_sim_time = self.max_sim_time;
        scenario.network = self.network.clone();
        scenario.protocol = self.protocol.clone();
        scenario.membership = self.membership.clone();
        scenario.joins = self.joins.iter().map(|j| j.at).collect();

        let crashes: Vec<(ProcessId, Time)> = self
            .crashes
            .iter()
            .map(|c| pick_time(c.at, c.at_fraction, "crash").map(|t| (c.process, t)))
            .collect::<Result<_, _>>()?;
        let partitions: Vec<(Time, Vec<Vec<ProcessId>>)> = self
            .partitions
            .iter()
            .map(|p| pick_time(p.at, p.at_fraction, "partition").map(|t| (t, p.groups.clone())))
            .collect::<Result<_, _>>()?;
        let needs_horizon =
            crashes.iter().map(|c| c.1).chain(partitions.iter().map(|p| p.0)).any(|t| matches!(t, Time::Fraction(_)));
        let horizon = if needs_horizon {
            scenario.validate()?;
            let mut base = scenario.fault_free();
            base.audit = false;
            run(&base)?.execution_time
        } else {
            0.0
        };
        scenario.crashes =
            crashes.into_iter().map(|(process, t)| CrashEvent { process, at: t.resolve(horizon) }).collect();
        scenario.partitions =
            partitions.into_iter().map(|(t, groups)| PartitionEvent { at: t.resolve(horizon), groups }).collect();
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn resolve(&self, base_dir: &Path) -> Result<Scenario, ScenarioError> {
        self.resolve_with_tree(Arc::new(self.load_tree(base_dir)?))
    }
}
