use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ftbb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftbb")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scenario(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "seed = 1\nprocesses = 3\n\n[tree]\ngenerate = { seed = 2, nodes = 600 }\n";

#[test]
fn gen_tree_writes_a_readable_tree() {
    let dir = TempDir::new().unwrap();
    let tree = dir.path().join("t.bbtree");
    let out = ftbb(&["gen-tree", "--seed", "2", "--nodes", "1000", "--out", s(&tree)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&tree).unwrap().starts_with("bbtree v1\n"));

    let pruned = stdout(&ftbb(&["oracle", s(&tree)]));
    let full = stdout(&ftbb(&["oracle", s(&tree), "--pruning", "false"]));
    let optimum = |text: &str| text.lines().find(|l| l.starts_with("optimum")).unwrap().to_string();
    assert_eq!(optimum(&pruned), optimum(&full));
    let nodes = fs::read_to_string(&tree).unwrap().lines().count() - 1;
    assert!(full.contains(&format!("expanded {nodes} of {nodes} nodes")), "{full}");
}

#[test]
fn single_node_tree() {
    let dir = TempDir::new().unwrap();
    let tree = dir.path().join("root.bbtree");
    assert_eq!(code(&ftbb(&["gen-tree", "--seed", "0", "--nodes", "1", "--out", s(&tree)])), 0);
    assert_eq!(fs::read_to_string(&tree).unwrap().lines().count(), 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&ftbb(&["gen-tree", "--seed", "2", "--nodes", "10"])), 2);
    let dir = TempDir::new().unwrap();
    let bad =
        scenario(&dir, "bad.toml", "seed = 1\nprocesses = 3\nbogus = 4\n[tree]\ngenerate = { seed = 1, nodes = 10 }\n");
    assert_eq!(code(&ftbb(&["run", s(&bad)])), 2);
    let zero = scenario(&dir, "zero.toml", "seed = 1\nprocesses = 0\n[tree]\ngenerate = { seed = 1, nodes = 10 }\n");
    assert_eq!(code(&ftbb(&["run", s(&zero)])), 2);
}

#[test]
fn malformed_tree_exits_one() {
    let dir = TempDir::new().unwrap();
    let tree = dir.path().join("broken.bbtree");
    fs::write(&tree, "bbtree v1\n0 -1 -1 -1 oops 1 0\n").unwrap();
    assert_eq!(code(&ftbb(&["oracle", s(&tree)])), 1);
}

#[test]
fn run_exit_codes_follow_the_outcome() {
    let dir = TempDir::new().unwrap();
    let ok = scenario(&dir, "ok.toml", SMALL);
    let out = ftbb(&["run", s(&ok), "--audit", "--table"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("# seed 1\n"), "reproducibility header first:\n{text}");
    assert!(text.contains("outcome terminated"));
    assert!(text.contains("# columns: processors"));

    assert_eq!(code(&ftbb(&["run", s(&ok), "--expect-optimum=-1"])), 5);

    let crash_all = format!("{SMALL}\n[[crash]]\nprocess = 0\nat = 0.01\n\n[[crash]]\nprocess = 1\nat = 0.01\n\n[[crash]]\nprocess = 2\nat = 0.01\n");
    let crash_all = scenario(&dir, "crash.toml", &crash_all);
    assert_eq!(code(&ftbb(&["run", s(&crash_all)])), 3);

    let short = scenario(&dir, "short.toml", &SMALL.replace("processes = 3\n", "processes = 3\nmax_sim_time = 0.01\n"));
    assert_eq!(code(&ftbb(&["run", s(&short)])), 4);
}

#[test]
fn two_of_three_crash_late_and_the_survivor_finishes() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        "{}audit = true\n\n[tree]\ngenerate = {{ seed = 2, nodes = 2000 }}\n\n\
         [[crash]]\nprocess = 0\nat_fraction = 0.85\n\n[[crash]]\nprocess = 1\nat_fraction = 0.85\n",
        "seed = 4\nprocesses = 3\n"
    );
    let p = scenario(&dir, "two.toml", &body);
    let out = ftbb(&["run", s(&p)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(!stdout(&out).contains("audit violation"));
}

#[test]
fn trace_and_json_outputs() {
    let dir = TempDir::new().unwrap();
    let p = scenario(&dir, "ok.toml", SMALL);
    let trace = dir.path().join("run.ndtrace");
    let json = dir.path().join("run.json");
    assert_eq!(code(&ftbb(&["run", s(&p), "--trace", s(&trace), "--json", s(&json)])), 0);
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let expected = result["events_processed"].as_u64().unwrap() + result["messages_sent"].as_u64().unwrap();
    let lines = fs::read_to_string(&trace).unwrap().lines().count() as u64;
    assert_eq!(lines, expected);
}

#[test]
fn sweep_is_repeatable_and_reportable() {
    let dir = TempDir::new().unwrap();
    let p = scenario(&dir, "base.toml", SMALL);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let run = ftbb(&["sweep", s(&p), "--processors", "1,2,4", "--seeds", "5,6", "--out", s(out)]);
        assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let report = stdout(&ftbb(&["report", s(&a)]));
    let rows: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 6, "{report}");
    assert!(rows[0].trim_start().starts_with("1 |"));
}

#[test]
fn single_cell_sweep_matches_run() {
    let dir = TempDir::new().unwrap();
    let p = scenario(&dir, "base.toml", SMALL);
    let cells = dir.path().join("cells.json");
    let json = dir.path().join("run.json");
    assert_eq!(code(&ftbb(&["sweep", s(&p), "--processors", "3", "--out", s(&cells)])), 0);
    assert_eq!(code(&ftbb(&["run", s(&p), "--json", s(&json)])), 0);
    let cells: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cells).unwrap()).unwrap();
    let single: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(cells[0]["result"], single);
}

#[test]
fn shipped_scenarios_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let file = ftbb::ScenarioFile::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            file.load_tree(&dir).unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
