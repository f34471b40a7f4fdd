use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn opdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opdyn"))
        .args(args)
        .env_remove("OPDYN_MEMORY_CAP_BITS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(out)))
}

/// Parses `out` as JSON and checks it against a shipped schema.
fn valid(out: &Output, schema: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(schema);
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let value = json(out);
    let errors: Vec<String> = validator
        .iter_errors(&value)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{errors:?} in {value}");
    value
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Fixture {
            dir: TempDir::new().unwrap(),
        }
    }

    fn file(&self, name: &str, text: &str) -> String {
        let p: PathBuf = self.dir.path().join(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    }

    fn oscillator(&self) -> String {
        self.file("p2.g", "graph undirected 2\nedge 0 1 +\n")
    }

    fn path3(&self) -> String {
        self.file("p3.g", "graph undirected 3\nedge 0 1 +\nedge 1 2 +\n")
    }
}

#[test]
fn generate_path_and_determinism() {
    let out = opdyn(&["generate", "--family", "path", "--n", "3"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "graph undirected 3\nedge 0 1 +\nedge 1 2 +\n");

    let args = [
        "generate", "--family", "gnp", "--n", "10", "--p", "0.3", "--neg", "0.5", "--seed", "7",
    ];
    let a = opdyn(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&opdyn(&args)));
    assert!(stdout(&a).starts_with("graph undirected 10\n"));
}

#[test]
fn generate_rejects_bad_flags() {
    assert_eq!(
        code(&opdyn(&["generate", "--family", "gnp", "--p", "1.5"])),
        2
    );
    assert_eq!(code(&opdyn(&["generate", "--family", "torus"])), 2);
    assert_eq!(code(&opdyn(&["generate", "--n", "0"])), 2);
}

#[test]
fn simulate_oscillator_and_path() {
    let f = Fixture::new();
    let out = opdyn(&["simulate", "--graph", &f.oscillator(), "--init", "+-"]);
    assert_eq!(code(&out), 0);
    let v = valid(&out, "cycle_summary.schema.json");
    assert_eq!((v["T"].as_u64(), v["h"].as_u64()), (Some(2), Some(1)));
    assert_eq!(v["equilibrium"], false);

    let out = opdyn(&[
        "simulate",
        "--graph",
        &f.path3(),
        "--init",
        "++-",
        "--record",
    ]);
    assert_eq!(code(&out), 0);
    let v = valid(&out, "trajectory.schema.json");
    assert_eq!((v["T"].as_u64(), v["h"].as_u64()), (Some(2), Some(2)));
    assert_eq!(v["equilibrium"], true);
    assert_eq!(v["configs"], serde_json::json!(["110", "111"]));

    // 0/1 rendering is accepted too
    let out = opdyn(&["simulate", "--graph", &f.path3(), "--init", "110"]);
    assert_eq!(valid(&out, "cycle_summary.schema.json")["T"], 2);
}

#[test]
fn simulate_usage_and_budget_errors() {
    let f = Fixture::new();
    let g = f.path3();
    assert_eq!(
        code(&opdyn(&["simulate", "--graph", &g, "--init", "++"])),
        2
    );
    assert_eq!(
        code(&opdyn(&["simulate", "--graph", &g, "--init", "+0-"])),
        2
    );
    assert_eq!(
        code(&opdyn(&[
            "simulate",
            "--graph",
            "/nonexistent",
            "--init",
            "+"
        ])),
        2
    );
    assert_eq!(
        code(&opdyn(&[
            "simulate",
            "--graph",
            &g,
            "--init",
            "++-",
            "--dynamics",
            "bogus"
        ])),
        2
    );

    for record in [false, true] {
        let mut args = vec!["simulate", "--graph", &g, "--init", "++-", "--budget", "1"];
        if record {
            args.push("--record");
        }
        let out = opdyn(&args);
        assert_eq!(code(&out), 1);
        let v = valid(&out, "budget_exceeded.schema.json");
        assert_eq!(v["budget"], 1);
    }
}

#[test]
fn memory_cap_comes_from_environment_or_flag() {
    let f = Fixture::new();
    let g = f.path3();
    let args = ["simulate", "--graph", &g, "--init", "++-", "--record"];
    let out = Command::new(env!("CARGO_BIN_EXE_opdyn"))
        .args(args)
        .env("OPDYN_MEMORY_CAP_BITS", "10")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bits"));
    let out = Command::new(env!("CARGO_BIN_EXE_opdyn"))
        .args(args)
        .args(["--memory-cap", "100000"])
        .env("OPDYN_MEMORY_CAP_BITS", "10")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}

#[test]
fn threshold_table_files() {
    let f = Fixture::new();
    // majority on degree <= 2, written out as tables
    let table = f.file("maj.t", "thresholds 3\n0 0 1\n1 1 1\n2 1 2\n");
    let out = opdyn(&[
        "simulate",
        "--graph",
        &f.oscillator(),
        "--init",
        "+-",
        "--dynamics",
        &format!("table:{table}"),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(valid(&out, "cycle_summary.schema.json")["T"], 2);

    let out = opdyn(&[
        "simulate",
        "--graph",
        &f.path3(),
        "--init",
        "+--",
        "--dynamics",
        "underpopulation:1,1",
    ]);
    assert_eq!(code(&out), 0);
    valid(&out, "cycle_summary.schema.json");
}

#[test]
fn decide_problems() {
    let f = Fixture::new();
    let osc = f.oscillator();
    let out = opdyn(&[
        "decide",
        "--graph",
        &osc,
        "--init",
        "+-",
        "--problem",
        "equilibrium",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(valid(&out, "decision.schema.json")["answer"], "no");

    let out = opdyn(&[
        "decide",
        "--graph",
        &osc,
        "--init",
        "+-",
        "--problem",
        "reach",
        "--target",
        "+-",
    ]);
    let v = valid(&out, "decision.schema.json");
    assert_eq!(
        (v["answer"].as_str(), v["witness_step"].as_u64()),
        (Some("yes"), Some(1))
    );

    let out = opdyn(&[
        "decide",
        "--graph",
        &osc,
        "--init",
        "+-",
        "--problem",
        "target",
        "--set",
        "0",
    ]);
    let v = valid(&out, "decision.schema.json");
    assert_eq!(
        (v["answer"].as_str(), v["witness_step"].as_u64()),
        (Some("yes"), Some(1))
    );

    // the oscillator never agrees
    let out = opdyn(&[
        "decide",
        "--graph",
        &osc,
        "--init",
        "+-",
        "--problem",
        "target",
        "--set",
        "0,1",
    ]);
    assert_eq!(valid(&out, "decision.schema.json")["answer"], "no");

    let p3 = f.path3();
    let out = opdyn(&[
        "decide",
        "--graph",
        &p3,
        "--init",
        "++-",
        "--problem",
        "target",
        "--set",
        "0,1,2",
        "--opinion",
        "+",
        "--trace",
    ]);
    let v = valid(&out, "decision.schema.json");
    assert_eq!(v["witness_step"], 2);
    assert_eq!(v["trace"], serde_json::json!(["110", "111"]));
    let out = opdyn(&[
        "decide",
        "--graph",
        &p3,
        "--init",
        "++-",
        "--problem",
        "target",
        "--set",
        "0,1,2",
        "--opinion",
        "0",
    ]);
    assert_eq!(valid(&out, "decision.schema.json")["answer"], "no");

    let out = opdyn(&[
        "decide",
        "--graph",
        &p3,
        "--init",
        "++-",
        "--problem",
        "equilibrium",
        "--format",
        "tsv",
    ]);
    assert_eq!(
        stdout(&out),
        "problem\tanswer\twitness_step\tsteps_used\nreach_equilibrium\tyes\t2\t2\n"
    );
}

#[test]
fn decide_budget_and_usage() {
    let f = Fixture::new();
    let osc = f.oscillator();
    let out = opdyn(&[
        "decide",
        "--graph",
        &osc,
        "--init",
        "+-",
        "--problem",
        "equilibrium",
        "--budget",
        "1",
    ]);
    assert_eq!(code(&out), 1);
    let v = valid(&out, "decision.schema.json");
    assert_eq!(
        (v["answer"].as_str(), v["steps_used"].as_u64()),
        (Some("budget_exceeded"), Some(1))
    );

    assert_eq!(
        code(&opdyn(&[
            "decide",
            "--graph",
            &osc,
            "--init",
            "+-",
            "--problem",
            "reach"
        ])),
        2
    );
    assert_eq!(
        code(&opdyn(&[
            "decide",
            "--graph",
            &osc,
            "--init",
            "+-",
            "--problem",
            "target"
        ])),
        2
    );
    assert_eq!(
        code(&opdyn(&[
            "decide",
            "--graph",
            &osc,
            "--init",
            "+-",
            "--problem",
            "target",
            "--set",
            "5"
        ])),
        2
    );
}

#[test]
fn atlas_lists_attractors() {
    let f = Fixture::new();
    let out = opdyn(&["atlas", "--graph", &f.path3()]);
    assert_eq!(code(&out), 0);
    let v = valid(&out, "atlas.schema.json");
    assert_eq!(v["configurations"], 8);
    let basins: u64 = v["attractors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["basin_size"].as_u64().unwrap())
        .sum();
    assert_eq!(basins, 8);

    let big = f.file("big.g", "graph undirected 30\n");
    assert_eq!(
        code(&opdyn(&["atlas", "--graph", &big, "--max-nodes", "10"])),
        2
    );
}

#[test]
fn verify_campaigns() {
    let out = opdyn(&["verify", "--trials", "150", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = valid(&out, "campaign.schema.json");
    assert_eq!(v["trials"], 150);
    assert_eq!(v["violations"], serde_json::json!([]));
    assert_eq!(v["records"].as_array().unwrap().len(), 150);

    let out = opdyn(&[
        "verify",
        "--trials",
        "50",
        "--families",
        "gnp:0.3",
        "--dynamics",
        "random",
        "--summary-only",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        valid(&out, "campaign.schema.json")["records"],
        serde_json::json!([])
    );

    let out = opdyn(&["verify", "--trials", "20", "--format", "tsv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().count(), 21);

    // determinism
    let a = opdyn(&["verify", "--trials", "40", "--seed", "9"]);
    assert_eq!(
        stdout(&a),
        stdout(&opdyn(&["verify", "--trials", "40", "--seed", "9"]))
    );
}

#[test]
fn verify_refuses_bad_campaigns() {
    assert_eq!(code(&opdyn(&["verify", "--trials", "0"])), 2);
    assert_eq!(
        code(&opdyn(&[
            "verify",
            "--directed",
            "--assert",
            "length-bound"
        ])),
        2
    );
    assert_eq!(code(&opdyn(&["verify", "--neg", "0.5"])), 2);
    assert_eq!(code(&opdyn(&["verify", "--n-min", "5", "--n-max", "3"])), 2);
    assert_eq!(code(&opdyn(&["verify", "--assert", "everything"])), 2);
    // without assertions, directed and signed campaigns just run
    let out = opdyn(&[
        "verify",
        "--directed",
        "--neg",
        "0.5",
        "--assert",
        "none",
        "--trials",
        "30",
    ]);
    assert_eq!(code(&out), 0);
    valid(&out, "campaign.schema.json");
}

#[test]
fn stats_patterns() {
    let f = Fixture::new();
    let osc = f.oscillator();
    let out = opdyn(&["stats", "--graph", &osc, "--init", "+-"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("pattern\ttotal\tstarts\tends"));
    for y in ["110", "100", "011", "001"] {
        assert_eq!(lines.next(), Some(format!("{y}\t0\t0\t0").as_str()));
    }
    let report: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(report["T"], 2);
    assert_eq!(report["holds"], true);
    assert_eq!(
        report["rhs"].as_u64().unwrap() + 2,
        report["bound"].as_u64().unwrap()
    );

    let out = opdyn(&[
        "stats",
        "--graph",
        &f.path3(),
        "--init",
        "+-+",
        "--patterns",
        "?,1?",
        "--format",
        "json",
    ]);
    let v = valid(&out, "stats.schema.json");
    let t = v["report"]["T"].as_u64().unwrap();
    assert_eq!(v["patterns"][0]["total"].as_u64().unwrap(), 3 * t);
}

#[test]
fn stats_refuses_signed_and_directed() {
    let f = Fixture::new();
    let signed = f.file("s.g", "graph undirected 2\nedge 0 1 -\n");
    assert_eq!(
        code(&opdyn(&["stats", "--graph", &signed, "--init", "+-"])),
        2
    );
    let directed = f.file("d.g", "graph directed 2\nedge 0 1 +\n");
    assert_eq!(
        code(&opdyn(&["stats", "--graph", &directed, "--init", "+-"])),
        2
    );
    assert_eq!(
        code(&opdyn(&[
            "stats",
            "--graph",
            &f.oscillator(),
            "--init",
            "+-",
            "--patterns",
            "12"
        ])),
        2
    );
}

#[test]
fn graph_from_stdin() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_opdyn"))
        .args(["simulate", "--graph", "-", "--init", "+-"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"graph undirected 2\nedge 0 1 +\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(valid(&out, "cycle_summary.schema.json")["T"], 2);
}
