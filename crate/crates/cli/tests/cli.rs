//! End-to-end tests that drive the `cgp` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cgp_core::{FunctionSet, Genotype, GraphParams};
use serde_json::Value;

fn cgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn records(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join("results.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_one_record_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("koza");
    let o = cgp(&[
        "run", "--bench", "koza3", "--variant", "leftskew", "--nodes", "40", "--p-reorder", "0.7",
        "--seeds", "0..2", "--max-iterations", "300", "-o", path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let recs = records(&out);
    assert_eq!(recs.len(), 3);
    for (i, r) in recs.iter().enumerate() {
        assert_eq!(r["config"]["p_reorder"], 0.7);
        assert_eq!(r["config"]["variant"], "leftskew");
        assert_eq!(r["result"]["seed"], i as u64);
        let it = r["result"]["iterations"].as_u64().unwrap();
        assert_eq!(r["result"]["evaluations"].as_u64().unwrap(), 4 * it);
    }
    for seed in 0..3 {
        let trace = fs::read_to_string(out.join(format!("traces/seed_{seed}.csv"))).unwrap();
        assert!(trace.starts_with("# config: {"));
        assert!(trace.contains("\niteration,best_fitness\n"));
    }
    assert!(out.join("datasets/koza3_seed0_train.csv").exists());
    assert!(out.join("meta.json").exists());
    let summary = String::from_utf8(o.stdout).unwrap();
    assert!(summary.contains("mean I2S"), "{summary}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = cgp(&["run", "--bench", "parity3", "--variant", "uniform", "--nodes", "60", "--seeds", "0..3", "-o", path(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("results.jsonl")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = cgp(&["run", "--bench", "parity3", "--nodes", "40", "--seeds", "3..6", "--workers", workers, "-o", path(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("results.jsonl")).unwrap()
    };
    assert_eq!(run("one", "1"), run("three", "3"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = cgp(&["run", "--bench", "parity4", "--nodes", "10", "-o", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("parity4"));

    let o = cgp(&["run", "--bench", "parity3", "--variant", "equidistant", "--p-reorder", "0.5", "--nodes", "10", "-o", path(&out)]);
    assert_eq!(o.status.code(), Some(1));

    let o = cgp(&["run", "--bench", "parity3", "--nodes", "10", "--seeds", "5..1", "-o", path(&out)]);
    assert_eq!(o.status.code(), Some(1));

    let o = cgp(&["run", "--bogus-flag"]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "bench = \"parity3\"\nnodes = 10\nseedz = \"0..1\"\n").unwrap();
    let o = cgp(&["run", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cfg");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "bench = \"parity3\"\nvariant = \"negbias\"\np_reorder = 0.3\nnodes = 30\nseeds = \"0..1\"\noutput = \"{}\"\n",
            path(&out)
        ),
    )
    .unwrap();
    let o = cgp(&["run", "--config", path(&cfg), "--nodes", "45"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let recs = records(&out);
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["config"]["nodes"], 45);
    assert_eq!(recs[0]["config"]["p_reorder"], 0.3);
    assert_eq!(recs[0]["result"]["active_bitmap"].as_str().unwrap().len(), 45);
}

#[test]
fn unwritable_output_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("sub");
    let o = cgp(&["run", "--bench", "parity3", "--nodes", "20", "-o", path(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn analyze_single_run_histogram_is_its_bitmap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one");
    assert!(cgp(&["run", "--bench", "parity3", "--nodes", "25", "--seeds", "4", "-o", path(&out)]).status.success());
    let o = cgp(&["analyze", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let bitmap = records(&out)[0]["result"]["active_bitmap"].as_str().unwrap().to_string();
    let hist = fs::read_to_string(out.join("histogram_parity3_none_p1.csv")).unwrap();
    let rows: Vec<&str> = hist.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 25);
    for (row, bit) in rows.iter().zip(bitmap.chars()) {
        let prob = row.rsplit(',').next().unwrap();
        assert_eq!(prob, if bit == '1' { "1" } else { "0" });
    }
    let conv = fs::read_to_string(out.join("convergence_parity3_none_p1.csv")).unwrap();
    assert!(conv.contains("iteration,mean_fitness,sd"));
    let summary = fs::read_to_string(out.join("summary.jsonl")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn analyze_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = cgp(&["analyze", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let o = cgp(&["analyze", path(&dir.path().join("missing"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_rejects_mixed_node_counts_naming_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(cgp(&["run", "--bench", "parity3", "--nodes", "20", "-o", path(&a)]).status.success());
    assert!(cgp(&["run", "--bench", "parity3", "--nodes", "30", "-o", path(&b)]).status.success());
    let mixed = dir.path().join("mixed");
    fs::create_dir(&mixed).unwrap();
    fs::copy(a.join("results.jsonl"), mixed.join("results_a.jsonl")).unwrap();
    fs::copy(b.join("results.jsonl"), mixed.join("results_b.jsonl")).unwrap();
    let o = cgp(&["analyze", path(&mixed)]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("results_a.jsonl") && msg.contains("results_b.jsonl"), "{msg}");
}

#[test]
fn analyze_emits_training_activity_when_tracked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    assert!(cgp(&["run", "--bench", "parity3", "--nodes", "20", "--seeds", "0..1", "--track-activity", "-o", path(&out)]).status.success());
    assert!(cgp(&["analyze", path(&out)]).status.success());
    assert!(out.join("training_activity_parity3_none_p1.csv").exists());
}

#[test]
fn grid_runs_every_cell_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid");
    let args = [
        "grid", "--bench", "parity3", "--variant", "negbias", "--grid-nodes", "50,100", "--grid-p", "0,1",
        "--seeds", "0..1", "-o", path(&out),
    ];
    let o = cgp(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("4 cells run, 0 already complete"), "{stdout}");

    let lines: Vec<Value> = fs::read_to_string(out.join("grid_summary.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    let runs: u64 = lines.iter().map(|l| l["summary"]["runs"].as_u64().unwrap()).sum();
    assert_eq!(runs, 8);
    let i2s: Vec<f64> = lines.iter().map(|l| l["summary"]["mean_i2s"].as_f64().unwrap()).collect();
    assert!(i2s.windows(2).all(|w| w[0] <= w[1]), "{i2s:?}");
    for cell in ["n50_p0", "n50_p1", "n100_p0", "n100_p1"] {
        assert!(out.join(cell).join(".complete").exists(), "{cell}");
    }

    let before = fs::read(out.join("grid_summary.jsonl")).unwrap();
    let o = cgp(&args);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("0 cells run, 4 already complete"));
    assert_eq!(fs::read(out.join("grid_summary.jsonl")).unwrap(), before);
}

#[test]
fn grid_rejects_probability_for_plain_variants() {
    let dir = tempfile::tempdir().unwrap();
    let o = cgp(&[
        "grid", "--bench", "parity3", "--variant", "equidistant", "--grid-nodes", "20", "--grid-p", "0.5",
        "-o", path(&dir.path().join("g")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dump_genome_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = cgp(&["run", "--bench", "parity3", "--nodes", "30", "--seeds", "2..3", "--dump-genome", "-o", path(&out)]);
    assert!(o.status.success());
    let dumped = fs::read_to_string(out.join("genomes/seed_3.txt")).unwrap();

    let o = cgp(&["dump-genome", "--bench", "parity3", "--nodes", "30", "--seeds", "2..3", "--seed", "3", "-o", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(printed, dumped);

    let params = GraphParams::new(3, 1, 30, FunctionSet::Boolean).unwrap();
    let genome = Genotype::from_flat(params, &printed).unwrap();
    let bitmap = records(&out)[1]["result"]["active_bitmap"].as_str().unwrap().to_string();
    let active: String = genome
        .decode_active()
        .bitmap()
        .iter()
        .map(|&b| if b { '1' } else { '0' })
        .collect();
    assert_eq!(active, bitmap);
}
