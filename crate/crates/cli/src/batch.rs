//! Seed batches, grids and the files they produce.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cgp_core::analysis::{summarize, SummaryRow, VariantMeta};
use cgp_core::{
    build_boolean, build_regression, dataset_rng, run_es, run_rng, Benchmark, BenchmarkName,
    Dataset, Genotype, RegressionBenchmark, RunResult,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Resolved, Settings};
use crate::error::{csv_error, dataset_error, CliError};

/// One line of `results.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: Settings,
    pub result: RunResult,
}

#[derive(Serialize, Deserialize)]
struct SummaryFile {
    config: Settings,
    summary: SummaryRow,
}

pub const COMPLETE_MARKER: &str = ".complete";

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(CliError::io(path))
}

/// Writes `# config: {...}` so CSV consumers can skip it as a comment.
pub fn write_config_comment<W: Write>(w: &mut W, json: &str, path: &Path) -> Result<(), CliError> {
    writeln!(w, "# config: {json}").map_err(CliError::io(path))
}

fn cached_dataset(path: &Path, fresh: &Dataset) -> Result<Dataset, CliError> {
    if path.exists() {
        let file = File::open(path).map_err(CliError::io(path))?;
        let data = Dataset::read_csv(file).map_err(|e| dataset_error(path, e))?;
        if data.num_vars != fresh.num_vars {
            return Err(CliError::malformed(
                path,
                format!("expected {} input columns, found {}", fresh.num_vars, data.num_vars),
            ));
        }
        Ok(data)
    } else {
        let file = create_file(path)?;
        fresh.write_csv(file).map_err(|e| dataset_error(path, e))?;
        Ok(fresh.clone())
    }
}

/// Builds the benchmark; regression datasets are read from (or first written
/// to) `cache_dir`, keyed by benchmark name and data seed.
pub fn load_benchmark(settings: &Settings, cache_dir: &Path) -> Result<Benchmark, CliError> {
    match settings.bench {
        BenchmarkName::Boolean(b) => Ok(Benchmark::Boolean(build_boolean(b))),
        BenchmarkName::Regression(r) => {
            create_dir(cache_dir)?;
            let fresh = build_regression(r, &mut dataset_rng(settings.data_seed));
            let stem = format!("{}_seed{}", settings.bench, settings.data_seed);
            let train = cached_dataset(&cache_dir.join(format!("{stem}_train.csv")), &fresh.train)?;
            let test = fresh
                .test
                .as_ref()
                .map(|t| cached_dataset(&cache_dir.join(format!("{stem}_test.csv")), t))
                .transpose()?;
            Ok(Benchmark::Regression(RegressionBenchmark { name: r, train, test }))
        }
    }
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}

/// Runs every seed; results come back in seed order.
pub fn execute(
    settings: &Settings,
    bench: &Benchmark,
    workers: Option<usize>,
) -> Result<Vec<(RunResult, Genotype)>, CliError> {
    let seeds: Vec<u64> = settings.seeds.iter().collect();
    let configs = seeds
        .iter()
        .map(|&seed| settings.es_config(bench, seed))
        .collect::<Result<Vec<_>, _>>()?;
    thread_pool(workers)?.install(|| {
        configs
            .into_par_iter()
            .map(|config| {
                let mut rng = run_rng(settings.master_seed, config.seed);
                let out = run_es(&config, bench, &mut rng)?;
                Ok((out.result, out.best))
            })
            .collect()
    })
}

pub fn variant_meta(settings: &Settings) -> VariantMeta {
    VariantMeta {
        benchmark: settings.bench.to_string(),
        variant: settings.variant.to_string(),
        p_reorder: settings.p_reorder,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

pub fn format_summary(row: &SummaryRow) -> String {
    format!(
        "benchmark    {}\nvariant      {}\nnodes        {}\np_reorder    {}\nruns         {}\n\
         success      {:.3}\nmean I2S     {:.1} (sd {:.1})\nmean active  {:.2}\n\
         train        {:.6}\ntest         {}\n",
        row.benchmark,
        row.variant,
        row.num_computational,
        row.p_reorder,
        row.runs,
        row.success_rate,
        row.mean_i2s,
        row.sd_i2s,
        row.mean_active,
        row.mean_train_fitness,
        opt(row.mean_test_fitness),
    )
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn write_trace(path: &Path, json: &str, result: &RunResult) -> Result<(), CliError> {
    let mut file = create_file(path)?;
    write_config_comment(&mut file, json, path)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["iteration", "best_fitness"]).map_err(|e| csv_error(path, e))?;
    for &(it, f) in &result.trace.samples {
        w.write_record([it.to_string(), f.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(CliError::io(path))
}

fn write_genome(path: &Path, json: &str, result: &RunResult, genome: &Genotype) -> Result<(), CliError> {
    write_text(path, &genome_text(json, result, genome))
}

pub fn genome_text(json: &str, result: &RunResult, genome: &Genotype) -> String {
    let p = genome.params();
    format!(
        "# config: {json}\n# seed: {}\n# train_fitness: {}\n# active: {}\n\
         # inputs: {} outputs: {} nodes: {} arity: {} functions: {}\n# lines: `position function connection...` per node, `out_i source` per output\n{}",
        result.seed,
        result.final_train_fitness,
        result.active_count,
        p.num_inputs,
        p.num_outputs,
        p.num_computational,
        p.arity,
        p.function_set,
        genome.to_flat()
    )
}

/// Writes results, traces, optional genomes and the summary into `dir`.
pub fn write_run_dir(
    dir: &Path,
    settings: &Settings,
    outputs: &[(RunResult, Genotype)],
    dump_genome: bool,
    started: u64,
) -> Result<SummaryRow, CliError> {
    let json = settings.to_json();
    create_dir(dir)?;

    let results_path = dir.join("results.jsonl");
    let mut results = create_file(&results_path)?;
    for (result, _) in outputs {
        let record = RunRecord {
            config: settings.clone(),
            result: result.clone(),
        };
        let line = serde_json::to_string(&record).expect("records serialize");
        writeln!(results, "{line}").map_err(CliError::io(&results_path))?;
    }
    results.flush().map_err(CliError::io(&results_path))?;

    let traces = dir.join("traces");
    create_dir(&traces)?;
    for (result, _) in outputs {
        write_trace(&traces.join(format!("seed_{}.csv", result.seed)), &json, result)?;
    }

    if dump_genome {
        let genomes = dir.join("genomes");
        create_dir(&genomes)?;
        for (result, genome) in outputs {
            write_genome(&genomes.join(format!("seed_{}.txt", result.seed)), &json, result, genome)?;
        }
    }

    let results: Vec<RunResult> = outputs.iter().map(|(r, _)| r.clone()).collect();
    let row = summarize(&results, &variant_meta(settings))?;
    let summary = SummaryFile {
        config: settings.clone(),
        summary: row.clone(),
    };
    write_text(
        &dir.join("summary.json"),
        &(serde_json::to_string(&summary).expect("summary serializes") + "\n"),
    )?;
    write_text(
        &dir.join("summary.txt"),
        &format!("# config: {json}\n{}", format_summary(&row)),
    )?;
    let meta = serde_json::json!({
        "started_unix": started,
        "finished_unix": unix_seconds(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_text(&dir.join("meta.json"), &format!("{meta}\n"))?;
    Ok(row)
}

pub fn cmd_run(resolved: &Resolved) -> Result<SummaryRow, CliError> {
    let started = unix_seconds();
    let settings = &resolved.settings;
    let bench = load_benchmark(settings, &resolved.output.join("datasets"))?;
    let outputs = execute(settings, &bench, resolved.workers)?;
    write_run_dir(&resolved.output, settings, &outputs, resolved.dump_genome, started)
}

fn cell_dir(root: &Path, nodes: usize, p: f64) -> PathBuf {
    root.join(format!("n{nodes}_p{p}"))
}

fn read_cell(dir: &Path, settings: &Settings) -> Result<Option<SummaryRow>, CliError> {
    let marker = dir.join(COMPLETE_MARKER);
    let Ok(done) = fs::read_to_string(&marker) else {
        return Ok(None);
    };
    if done.trim() != settings.to_json() {
        return Ok(None);
    }
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    let file: SummaryFile = serde_json::from_str(&text).map_err(|e| CliError::malformed(&path, e))?;
    Ok(Some(file.summary))
}

/// Boolean cells rank by mean I2S, regression cells by mean test fitness
/// (training fitness when there is no test set). Lower is better for both.
pub fn rank_rows<T>(rows: &mut [T], boolean: bool, row: impl Fn(&T) -> &SummaryRow) {
    let key = |t: &T| {
        let r = row(t);
        if boolean {
            r.mean_i2s
        } else {
            r.mean_test_fitness.unwrap_or(r.mean_train_fitness)
        }
    };
    rows.sort_by(|a, b| key(a).total_cmp(&key(b)));
}

pub struct GridOutcome {
    pub rows: Vec<SummaryRow>,
    pub executed: usize,
    pub skipped: usize,
}

/// Runs every `(N, p_reorder)` cell not already marked complete.
pub fn cmd_grid(resolved: &Resolved, nodes: &[usize], ps: &[f64]) -> Result<GridOutcome, CliError> {
    if nodes.is_empty() || ps.is_empty() {
        return Err(CliError::Config("grid axes must not be empty".into()));
    }
    let root = &resolved.output;
    let bench = load_benchmark(&resolved.settings, &root.join("datasets"))?;
    let mut cells = Vec::new();
    for &n in nodes {
        for &p in ps {
            let settings = Settings {
                nodes: n,
                p_reorder: p,
                ..resolved.settings.clone()
            };
            settings.strategy()?;
            cells.push(settings);
        }
    }

    let mut ranked = Vec::with_capacity(cells.len());
    let (mut executed, mut skipped) = (0, 0);
    for settings in cells {
        let dir = cell_dir(root, settings.nodes, settings.p_reorder);
        if let Some(row) = read_cell(&dir, &settings)? {
            skipped += 1;
            ranked.push(SummaryFile {
                config: settings,
                summary: row,
            });
            continue;
        }
        let started = unix_seconds();
        let outputs = execute(&settings, &bench, resolved.workers)?;
        let row = write_run_dir(&dir, &settings, &outputs, resolved.dump_genome, started)?;
        write_text(&dir.join(COMPLETE_MARKER), &(settings.to_json() + "\n"))?;
        executed += 1;
        ranked.push(SummaryFile {
            config: settings,
            summary: row,
        });
    }

    rank_rows(&mut ranked, resolved.settings.bench.is_boolean(), |c| &c.summary);
    let path = root.join("grid_summary.jsonl");
    let mut out = create_file(&path)?;
    for cell in &ranked {
        let line = serde_json::to_string(cell).expect("rows serialize");
        writeln!(out, "{line}").map_err(CliError::io(&path))?;
    }
    out.flush().map_err(CliError::io(&path))?;
    let rows: Vec<SummaryRow> = ranked.into_iter().map(|c| c.summary).collect();
    write_text(
        &root.join("grid_summary.txt"),
        &format!("# config: {}\n{}", resolved.settings.to_json(), format_table(&rows)),
    )?;
    Ok(GridOutcome {
        rows,
        executed,
        skipped,
    })
}

pub fn format_table(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:>4} {:>6} {:>6} {:>5} {:>12} {:>12} {:>9} {:>12} {:>12}\n",
        "rank", "N", "p", "runs", "mean_i2s", "sd_i2s", "success", "train", "test"
    );
    for (i, r) in rows.iter().enumerate() {
        s.push_str(&format!(
            "{:>4} {:>6} {:>6} {:>5} {:>12.1} {:>12.1} {:>9.3} {:>12.6} {:>12}\n",
            i + 1,
            r.num_computational,
            r.p_reorder,
            r.runs,
            r.mean_i2s,
            r.sd_i2s,
            r.success_rate,
            r.mean_train_fitness,
            opt(r.mean_test_fitness),
        ));
    }
    s
}
