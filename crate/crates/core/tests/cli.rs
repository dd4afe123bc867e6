use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use mc_budget::io::AssignmentFile;
use mc_budget::stats::Summary;

const EXAMPLE: &str = r#"{
  "tv_kind": "vwcet",
  "tasks": [
    {"id": 0, "criticality": "LO", "D": 6, "T": 6, "samples": [[1, 10], [2, 20], [3, 70]]},
    {"id": 1, "criticality": "LO", "D": 9, "T": 9, "samples": [[1, 40], [2, 50], [3, 10]]},
    {"id": 2, "criticality": "HI", "D": 12, "T": 12, "samples": [[1, 10], [2, 10], [3, 80]]}
  ]
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mc-budget"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn assign_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ex.json");
    let assignment = dir.path().join("a.json");
    let report = dir.path().join("r.json");
    fs::write(&input, EXAMPLE).unwrap();

    ok(&[
        "assign",
        "--algo",
        "vwcet",
        "--sched",
        "rm",
        "--input",
        p(&input),
        "--output",
        p(&assignment),
    ]);
    let a: AssignmentFile =
        serde_json::from_str(&fs::read_to_string(&assignment).unwrap()).unwrap();
    assert_eq!(a.budgets, Some(vec![3, 1, 3]));
    assert!((a.score_lo.unwrap() - 0.4).abs() < 1e-12);
    assert_eq!(a.score_hi, Some(1.0));
    assert_eq!(a.sched_test_calls, 4);

    ok(&[
        "simulate",
        "--input",
        p(&input),
        "--assignment",
        p(&assignment),
        "--policy",
        "rm",
        "--duration-ticks",
        "90000",
        "--seed",
        "1",
        "--out",
        p(&report),
    ]);
    let r = read_json(&report);
    assert_eq!(r["duration"], 90000);
    let tau2 = &r["tasks"][1];
    assert_eq!(tau2["budget"], 1);
    assert_eq!(tau2["released"], 10000);
    let ratio = tau2["stop_ratio"].as_f64().unwrap();
    assert!((1.0 - ratio - 0.4).abs() <= 3.0 * (0.24f64 / 10000.0).sqrt());
}

#[test]
fn assign_reports_infeasible_medians() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ex.json");
    fs::write(&input, EXAMPLE).unwrap();
    let out: AssignmentFile = serde_json::from_str(&ok(&[
        "assign",
        "--algo",
        "medians",
        "--sched",
        "rm",
        "--input",
        p(&input),
    ]))
    .unwrap();
    assert!(!out.feasible);
    assert_eq!(out.budgets, None);
    let out: AssignmentFile = serde_json::from_str(&ok(&[
        "assign",
        "--algo",
        "medians",
        "--sched",
        "edf",
        "--input",
        p(&input),
    ]))
    .unwrap();
    assert_eq!(out.budgets, Some(vec![3, 2, 3]));
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.json");
    fs::write(
        &input,
        r#"{"tv_kind": "vwcet", "tasks": [{"id": 1, "criticality": "LO", "D": 4, "T": 4, "samples": [[1, 1]]}]}"#,
    )
    .unwrap();
    let out = run(&["assign", "--input", p(&input)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = run(&["assign", "--algo", "fastest", "--input", p(&input)]);
    assert!(!out.status.success());
}

#[test]
fn dist_reports_percent_vwcet() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("samples.txt");
    fs::write(&log, "# measured\n1\n2\n2\n3\n3\n3\n3\n3\n3\n3\n").unwrap();
    let v: Value = serde_json::from_str(&ok(&["dist", "--input", p(&log)])).unwrap();
    assert_eq!(v["max"], 3);
    assert_eq!(v["samples"], 10);
    let pct = v["vwcet_percent"].as_f64().unwrap();
    assert!((pct - 100.0 * 0.6f64.sqrt() / 3.0).abs() < 1e-9);
}

#[test]
fn gen_writes_kept_sets_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sets");
    ok(&[
        "gen",
        "--n",
        "6",
        "--scenario",
        "1",
        "--trials",
        "30",
        "--seed",
        "2",
        "--out-dir",
        p(&out),
    ]);
    let manifest = read_json(&out.join("manifest.json"));
    let kept = manifest["kept_trials"].as_u64().unwrap() as usize;
    let discarded: u64 = manifest["discarded"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(kept as u64 + discarded, 30);
    assert_eq!(manifest["bucket_counts"], serde_json::json!([5, 0, 1]));
    let sets: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            name.starts_with("trial_").then_some(name)
        })
        .collect();
    assert_eq!(sets.len(), kept);
    assert!(kept > 0);
    let set = mc_budget::io::read_taskset(&out.join(&sets[0])).unwrap();
    assert_eq!(set.len(), 6);
    // The first five tasks are right-skewed, the last left-skewed.
    for t in &set.tasks()[..5] {
        assert!(t.dist.skewness().unwrap() > 2.0);
    }
    assert!(set.tasks()[5].dist.skewness().unwrap() < -2.0);
}

fn summaries(path: &Path) -> BTreeMap<String, Summary> {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn experiment_outputs_are_consistent_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        ok(&[
            "experiment",
            "--campaign",
            "scores",
            "--scenario",
            "3",
            "--trials",
            "60",
            "--seed",
            "11",
            "--jobs",
            jobs,
            "--no-wall-time",
            "--out-dir",
            p(out),
        ]);
    }
    let raw = fs::read_to_string(a.join("raw.csv")).unwrap();
    assert_eq!(raw, fs::read_to_string(b.join("raw.csv")).unwrap());
    assert_eq!(
        raw.lines().next().unwrap(),
        "trial,algo,feasible,score_lo,test_calls,wall_ns"
    );

    // Summaries recompute from the raw rows.
    let mut scores: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut by_trial: BTreeMap<u64, BTreeMap<String, f64>> = BTreeMap::new();
    let mut reader = csv::Reader::from_reader(raw.as_bytes());
    for rec in reader.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[5], "0");
        if rec[3].is_empty() {
            assert_eq!(&rec[2], "false");
            continue;
        }
        let score: f64 = rec[3].parse().unwrap();
        scores.entry(rec[1].to_string()).or_default().push(score);
        by_trial
            .entry(rec[0].parse().unwrap())
            .or_default()
            .insert(rec[1].to_string(), score);
    }
    let summary = summaries(&a.join("summary.json"));
    assert_eq!(summary.len(), scores.len());
    for (algo, values) in &scores {
        assert_eq!(
            Some(&summary[algo]),
            Summary::from_values(values).as_ref(),
            "{algo}"
        );
    }
    // Row-wise dominance of the exhaustive search.
    for scores in by_trial.values() {
        if let Some(&opt) = scores.get("opt") {
            for (algo, &s) in scores {
                assert!(s <= opt + 1e-12, "{algo} {s} above opt {opt}");
            }
        }
    }

    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["tool"], "mc-budget");
    assert_eq!(manifest["utilization_sampler"], "uunifast");
    assert_eq!(manifest["config"]["trials"], 60);
    assert_eq!(manifest["config"]["seed"], 11);
    let discards = fs::read_to_string(a.join("discards.csv")).unwrap();
    assert_eq!(
        discards.lines().count() - 1 + manifest["kept_trials"].as_u64().unwrap() as usize,
        60
    );
}

#[test]
fn runtime_and_stop_ratio_campaigns_run() {
    let dir = tempfile::tempdir().unwrap();
    let rt = dir.path().join("rt");
    ok(&[
        "experiment",
        "--campaign",
        "runtime",
        "--trials",
        "3",
        "--task-counts",
        "3,4",
        "--algos",
        "vwcet,opt",
        "--out-dir",
        p(&rt),
    ]);
    let summary = read_json(&rt.join("summary.json"));
    assert!(summary.get("opt/n=4/calls").is_some());
    assert!(summary.get("vwcet/n=3/wall_ns").is_some());

    let sr = dir.path().join("sr");
    ok(&[
        "experiment",
        "--campaign",
        "stopratio",
        "--trials",
        "40",
        "--algos",
        "vwcet",
        "--seed",
        "4",
        "--out-dir",
        p(&sr),
    ]);
    let raw = fs::read_to_string(sr.join("raw.csv")).unwrap();
    assert!(raw.starts_with("trial,algo,task,budget,p_meet,observed_meet"));
    assert!(raw.lines().count() > 1);
}
