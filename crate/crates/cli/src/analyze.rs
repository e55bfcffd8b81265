//! `analyze`: histograms, convergence curves and summaries from result files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cgp_core::analysis::{
    active_distribution, convergence_mean, iteration_grid, summarize, PositionalBiasHistogram,
    SummaryRow,
};
use cgp_core::RunResult;
use serde::Serialize;

use crate::batch::{variant_meta, RunRecord};
use crate::config::Settings;
use crate::error::{csv_error, CliError};

/// Results sharing benchmark, variant and p_reorder.
#[derive(Debug)]
pub struct Group {
    pub records: Vec<(PathBuf, RunRecord)>,
}

impl Group {
    fn settings(&self) -> &Settings {
        &self.records[0].1.config
    }

    fn results(&self) -> Vec<RunResult> {
        self.records.iter().map(|(_, r)| r.result.clone()).collect()
    }

    fn stem(&self) -> String {
        let s = self.settings();
        format!("{}_{}_p{}", s.bench, s.variant, s.p_reorder)
    }

    /// Distinct configs in the group, in first-seen order.
    fn configs(&self) -> Vec<&Settings> {
        let mut seen: Vec<&Settings> = Vec::new();
        for (_, r) in &self.records {
            if !seen.contains(&&r.config) {
                seen.push(&r.config);
            }
        }
        seen
    }

    fn check_node_counts(&self) -> Result<(), CliError> {
        let (first_path, first) = &self.records[0];
        let n = first.result.num_computational();
        if let Some((path, other)) = self
            .records
            .iter()
            .find(|(_, r)| r.result.num_computational() != n)
        {
            return Err(CliError::Config(format!(
                "cannot aggregate {}: {} has N={} but {} has N={}",
                self.stem(),
                first_path.display(),
                n,
                path.display(),
                other.result.num_computational()
            )));
        }
        Ok(())
    }
}

/// `results*.jsonl` files directly inside `dir`, sorted by name.
pub fn result_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(CliError::io(dir))? {
        let path = entry.map_err(CliError::io(dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if path.is_file() && name.starts_with("results") && name.ends_with(".jsonl") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| CliError::malformed(path, format!("line {}: {e}", i + 1)))?;
        records.push(record);
    }
    Ok(records)
}

pub fn group_records(files: &[PathBuf]) -> Result<Vec<Group>, CliError> {
    let mut groups: BTreeMap<(String, String, u64), Group> = BTreeMap::new();
    for path in files {
        for record in read_records(path)? {
            let key = (
                record.config.bench.to_string(),
                record.config.variant.to_string(),
                record.config.p_reorder.to_bits(),
            );
            groups
                .entry(key)
                .or_insert_with(|| Group { records: Vec::new() })
                .records
                .push((path.clone(), record));
        }
    }
    Ok(groups.into_values().collect())
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    configs: Vec<&'a Settings>,
    summary: &'a SummaryRow,
}

fn write_csv_file(
    path: &Path,
    comments: &[String],
    write: impl FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
) -> Result<(), CliError> {
    let mut file = File::create(path).map(BufWriter::new).map_err(CliError::io(path))?;
    for c in comments {
        writeln!(file, "# {c}").map_err(CliError::io(path))?;
    }
    write(&mut file).map_err(|e| csv_error(path, e))?;
    file.flush().map_err(CliError::io(path))
}

fn comments(group: &Group, extra: &str) -> Vec<String> {
    let mut lines: Vec<String> = group
        .configs()
        .iter()
        .map(|c| format!("config: {}", c.to_json()))
        .collect();
    lines.push(format!("runs: {}", group.records.len()));
    lines.push(extra.to_string());
    lines
}

pub struct AnalyzeOutcome {
    pub rows: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

/// Aggregates every group found in `dir` and writes the outputs to `out`.
pub fn cmd_analyze(dir: &Path, out: &Path, points: usize) -> Result<AnalyzeOutcome, CliError> {
    let files = result_files(dir)?;
    let groups = group_records(&files)?;
    if groups.is_empty() {
        return Err(CliError::Config(format!(
            "no run records found in {} (expected results*.jsonl)",
            dir.display()
        )));
    }
    for g in &groups {
        g.check_node_counts()?;
    }
    fs::create_dir_all(out).map_err(CliError::io(out))?;

    let mut written = Vec::new();
    let mut rows = Vec::new();
    let summary_path = out.join("summary.jsonl");
    let mut summary = File::create(&summary_path)
        .map(BufWriter::new)
        .map_err(CliError::io(&summary_path))?;
    for group in &groups {
        let results = group.results();
        let stem = group.stem();

        let hist = active_distribution(&results)?;
        let path = out.join(format!("histogram_{stem}.csv"));
        write_csv_file(
            &path,
            &comments(group, "probability: fraction of runs with the position active in the final solution"),
            |w| hist.write_csv(w),
        )?;
        written.push(path);

        if results.iter().all(|r| r.activity_over_training.is_some()) {
            let n = results.len() as f64;
            let mut probabilities = vec![0.0; hist.len()];
            for r in &results {
                for (p, a) in probabilities.iter_mut().zip(r.activity_over_training.as_ref().unwrap()) {
                    *p += a / n;
                }
            }
            let training = PositionalBiasHistogram {
                probabilities,
                run_count: results.len(),
            };
            let path = out.join(format!("training_activity_{stem}.csv"));
            write_csv_file(
                &path,
                &comments(group, "probability: mean fraction of iterations with the position active in the parent"),
                |w| training.write_csv(w),
            )?;
            written.push(path);
        }

        let last = results.iter().map(|r| r.iterations).max().unwrap_or(0);
        let curve = convergence_mean(
            &results.iter().map(|r| r.trace.clone()).collect::<Vec<_>>(),
            &iteration_grid(last, points),
        );
        let path = out.join(format!("convergence_{stem}.csv"));
        write_csv_file(
            &path,
            &comments(group, "sd: population standard deviation over runs (divisor n)"),
            |w| curve.write_csv(w),
        )?;
        written.push(path);

        let row = summarize(&results, &variant_meta(group.settings()))?;
        let line = serde_json::to_string(&SummaryLine {
            configs: group.configs(),
            summary: &row,
        })
        .expect("summary serializes");
        writeln!(summary, "{line}").map_err(CliError::io(&summary_path))?;
        rows.push(row);
    }
    summary.flush().map_err(CliError::io(&summary_path))?;
    written.push(summary_path);
    Ok(AnalyzeOutcome {
        rows,
        files: written,
    })
}
