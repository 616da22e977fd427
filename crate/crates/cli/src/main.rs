use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use ftbb::metrics::{render_rows, RunResult, TableRow};
use ftbb::scenario::ScenarioError;
use ftbb::trees::{gen_random_tree, parse_basic_tree, render_basic_tree, BasicTree, GenParams, TreeError};
use ftbb::{sequential_solve, Outcome, Scenario, ScenarioFile, SelectionRule, SimError};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "ftbb", version, about = "Simulate fault-tolerant distributed branch and bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random basic tree.
    GenTree {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        expand_prob: Option<f64>,
        #[arg(long)]
        min_depth: Option<u32>,
        #[arg(long)]
        cost_median: Option<f64>,
    },
    /// Solve a tree sequentially and print the uniprocessor baseline.
    Oracle {
        tree: PathBuf,
        #[arg(long, default_value = "depth-first")]
        rule: SelectionRule,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        pruning: bool,
    },
    /// Run one scenario.
    Run {
        scenario: PathBuf,
        /// Write a newline-delimited trace (`.ndtrace`).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Enable the global safety audit.
        #[arg(long)]
        audit: bool,
        /// Print the result as a sweep-table row.
        #[arg(long)]
        table: bool,
        /// Optimum to compare against instead of solving the tree here.
        #[arg(long)]
        expect_optimum: Option<f64>,
        /// Largest tree the built-in oracle is run on.
        #[arg(long, default_value_t = 1_000_000)]
        oracle_budget: usize,
        /// Also write the full result as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a scenario across process counts and seeds.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        processors: Vec<usize>,
        /// Defaults to the scenario's own seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Results file (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the table of a results file written by `sweep`.
    Report { results: PathBuf },
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }
}

const EXIT_TREE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_TOTAL_FAILURE: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;
const EXIT_WRONG_OPTIMUM: u8 = 5;

fn tree_failure(e: TreeError) -> Failure {
    Failure::new(EXIT_TREE, e)
}

fn scenario_failure(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::Tree(t) => tree_failure(t),
        ScenarioError::Sim(SimError::Protocol(p)) => Failure::new(EXIT_TREE, p),
        other => Failure::new(EXIT_USAGE, other),
    }
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Protocol(p) => Failure::new(EXIT_TREE, p),
        other => Failure::new(EXIT_USAGE, other),
    }
}

fn read_tree(path: &Path) -> Result<BasicTree, Failure> {
    let f = File::open(path)
        .with_context(|| format!("cannot open tree {}", path.display()))
        .map_err(|e| Failure::new(EXIT_TREE, e))?;
    parse_basic_tree(BufReader::new(f)).map_err(tree_failure)
}

fn gen_tree(
    seed: u64,
    nodes: usize,
    out: &Path,
    expand_prob: Option<f64>,
    min_depth: Option<u32>,
    cost_median: Option<f64>,
) -> Result<(), Failure> {
    let mut params = GenParams::default();
    if let Some(p) = expand_prob {
        params.expand_prob = p;
    }
    if let Some(d) = min_depth {
        params.min_depth = d;
    }
    if let Some(c) = cost_median {
        params.cost_median = c;
    }
    let tree = gen_random_tree(seed, nodes, &params).map_err(|e| Failure::new(EXIT_USAGE, e))?;
    std::fs::write(out, render_basic_tree(&tree))
        .with_context(|| format!("cannot write {}", out.display()))
        .map_err(|e| Failure::new(EXIT_USAGE, e))?;
    let leaves = tree.leaves().count();
    let mean_depth = tree.leaves().map(|v| tree.depth(v) as f64).sum::<f64>() / leaves as f64;
    println!("wrote {}", out.display());
    println!(
        "nodes {}  leaves {}  max depth {}  mean leaf depth {:.2}",
        tree.len(),
        leaves,
        tree.max_depth(),
        mean_depth
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

fn oracle(path: &Path, rule: SelectionRule, pruning: bool) -> Result<(), Failure> {
    let tree = read_tree(path)?;
    let out = sequential_solve(&tree, rule, pruning);
    println!("optimum {}", fmt_opt(out.optimum));
    println!("expanded {} of {} nodes", out.expanded_count, tree.len());
    println!("sequential time {:.6} s ({:.4} h)", out.total_time, out.total_time / 3600.0);
    Ok(())
}

fn load_scenario(path: &Path) -> Result<(ScenarioFile, PathBuf), Failure> {
    let file = ScenarioFile::load(path).map_err(scenario_failure)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((file, base))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

fn print_header(s: &Scenario) {
    println!("# seed {}", s.seed);
    println!("# processes {} (+{} joining)", s.processes, s.joins.len());
    println!("# tree {} nodes, total cost {:.6} s", s.tree.len(), s.tree.total_cost());
    println!("# selection {:?}  pruning {}  audit {}", s.rule, s.pruning, s.audit);
    println!("# max_sim_time {} s  request_timeout {} s", s.resolved_max_time(), s.resolved_request_timeout());
    println!("# network {}", json(&s.network));
    println!("# protocol {}", json(&s.protocol));
    println!("# membership {}", json(&s.membership));
    println!("# crashes {}", json(&s.crashes));
    println!("# partitions {}", json(&s.partitions));
    println!("# joins {}", json(&s.joins));
}

fn optimum_matches(found: Option<f64>, expected: Option<f64>) -> bool {
    match (found, expected) {
        (Some(a), Some(b)) => a == b || (a - b).abs() <= 1e-9 * b.abs().max(1.0),
        (None, None) => true,
        _ => false,
    }
}

fn print_summary(r: &RunResult, expected: Option<Option<f64>>) {
    println!("outcome {}", r.outcome.name());
    println!("optimum {}", fmt_opt(r.optimum));
    if let Some(e) = expected {
        println!("expected {}", fmt_opt(e));
    }
    println!("execution time {:.6} s ({:.4} h)", r.execution_time, r.execution_hours);
    println!(
        "B&B time {:.2}%  contraction {:.2}%  idle {:.6} s  redundant work {:.6} s",
        r.row.bnb_pct, r.row.contraction_pct, r.aggregate.idle_time, r.aggregate.redundant_work_time
    );
    println!(
        "storage total {} B  redundant {} B  communication {} B",
        r.storage_total_bytes, r.storage_redundant_bytes, r.aggregate.comm_bytes_sent
    );
    println!(
        "events {}  messages {} ({} dropped)  expanded {}  recoveries {}",
        r.events_processed, r.messages_sent, r.messages_dropped, r.aggregate.nodes_expanded, r.aggregate.recoveries
    );
    for v in &r.audit_violations {
        println!("audit violation: {v}");
    }
}

#[allow(clippy::too_many_arguments)]
fn run_cmd(
    path: &Path,
    trace: Option<&Path>,
    audit: bool,
    table: bool,
    expect: Option<f64>,
    budget: usize,
    json: Option<&Path>,
) -> Result<(), Failure> {
    let (file, base) = load_scenario(path)?;
    let mut scenario = file.resolve(&base).map_err(scenario_failure)?;
    scenario.audit |= audit;
    print_header(&scenario);
    let expected = match expect.or(file.expect_optimum) {
        Some(v) => Some(Some(v)),
        None if scenario.tree.len() <= budget => {
            Some(sequential_solve(&scenario.tree, scenario.rule, scenario.pruning).optimum)
        }
        None => None,
    };
    let result = match trace {
        Some(p) => {
            let f = File::create(p)
                .with_context(|| format!("cannot create {}", p.display()))
                .map_err(|e| Failure::new(EXIT_USAGE, e))?;
            let mut sink = BufWriter::new(f);
            ftbb::run_traced(&scenario, &mut sink).map_err(sim_failure)?
        }
        None => ftbb::run(&scenario).map_err(sim_failure)?,
    };
    print_summary(&result, expected);
    if table {
        print!("{}", ftbb::render_table(std::slice::from_ref(&result)));
    }
    if let Some(p) = json {
        std::fs::write(p, result.to_json() + "\n")
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(|e| Failure::new(EXIT_USAGE, e))?;
    }
    match result.outcome {
        Outcome::TotalFailure => Err(Failure::new(EXIT_TOTAL_FAILURE, anyhow!("every process crashed"))),
        Outcome::Timeout => Err(Failure::new(EXIT_TIMEOUT, anyhow!("simulation hit its time limit"))),
        Outcome::Terminated => match expected {
            Some(e) if !optimum_matches(result.optimum, e) => Err(Failure::new(
                EXIT_WRONG_OPTIMUM,
                anyhow!("optimum {} differs from expected {}", fmt_opt(result.optimum), fmt_opt(e)),
            )),
            _ => Ok(()),
        },
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Cell {
    processors: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<RunResult>,
}

fn sweep(path: &Path, processors: &[usize], seeds: &[u64], out: Option<&Path>) -> Result<(), Failure> {
    let (file, base) = load_scenario(path)?;
    let tree = Arc::new(file.load_tree(&base).map_err(scenario_failure)?);
    let seeds = if seeds.is_empty() { vec![file.seed] } else { seeds.to_vec() };
    let plan: Vec<(usize, u64)> = processors.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    println!("# sweep {} over processors {:?} and seeds {:?}", path.display(), processors, seeds);
    let cells: Vec<Cell> = ftbb::batch::map(&plan, |&(processors, seed)| {
        let mut f = file.clone();
        f.processes = processors;
        f.seed = seed;
        let outcome = f
            .resolve_with_tree(Arc::clone(&tree))
            .map_err(|e| e.to_string())
            .and_then(|s| ftbb::run(&s).map_err(|e| e.to_string()));
        match outcome {
            Ok(r) => Cell { processors, seed, error: None, result: Some(r) },
            Err(e) => Cell { processors, seed, error: Some(e), result: None },
        }
    });
    for c in &cells {
        if let Some(e) = &c.error {
            println!("# cell processors={} seed={} failed: {e}", c.processors, c.seed);
        } else if let Some(r) = &c.result {
            if r.outcome != Outcome::Terminated {
                println!("# cell processors={} seed={} ended with {}", c.processors, c.seed, r.outcome.name());
            }
        }
    }
    print!("{}", table_of(&cells));
    if let Some(out) = out {
        let text = serde_json::to_string_pretty(&cells).map_err(|e| Failure::new(EXIT_USAGE, e))? + "\n";
        std::fs::write(out, text)
            .with_context(|| format!("cannot write {}", out.display()))
            .map_err(|e| Failure::new(EXIT_USAGE, e))?;
    }
    Ok(())
}

fn table_of(cells: &[Cell]) -> String {
    let rows: Vec<TableRow> = cells.iter().filter_map(|c| c.result.as_ref().map(|r| r.row)).collect();
    render_rows(&rows)
}

fn report(path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(|e| Failure::new(EXIT_USAGE, e))?;
    let cells: Vec<Cell> = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a sweep results file", path.display()))
        .map_err(|e| Failure::new(EXIT_USAGE, e))?;
    print!("{}", table_of(&cells));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenTree { seed, nodes, out, expand_prob, min_depth, cost_median } => {
            gen_tree(seed, nodes, &out, expand_prob, min_depth, cost_median)
        }
        Command::Oracle { tree, rule, pruning } => oracle(&tree, rule, pruning),
        Command::Run { scenario, trace, audit, table, expect_optimum, oracle_budget, json } => {
            run_cmd(&scenario, trace.as_deref(), audit, table, expect_optimum, oracle_budget, json.as_deref())
        }
        Command::Sweep { scenario, processors, seeds, out } => sweep(&scenario, &processors, &seeds, out.as_deref()),
        Command::Report { results } => report(&results),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
