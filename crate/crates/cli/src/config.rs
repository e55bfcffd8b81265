//! Experiment configuration: a flat TOML file overridden by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cgp_core::evolution::{REGRESSION_BUDGET, TRACE_INTERVAL};
use cgp_core::functions::PROTECTION_CONVENTIONS;
use cgp_core::{
    Benchmark, BenchmarkName, EsConfig, ReorderKind, ReorderStrategy, TraceMode,
};
use clap::Args;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

/// Iteration cap for Boolean runs, which otherwise run until solved.
pub const BOOLEAN_SAFETY_CAP: u64 = 10_000_000;

pub const REORDER_POINT: &str = "parent, once per iteration, before mutation";

/// Inclusive seed range written `a..b` (or a single seed `a`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn iter(self) -> impl Iterator<Item = u64> {
        self.start..=self.end
    }
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| format!("invalid seed `{t}` in range `{s}`"))
        };
        let (start, end) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if end < start {
            return Err(format!("seed range `{s}` is empty (end before start)"));
        }
        Ok(SeedRange { start, end })
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl Serialize for SeedRange {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SeedRange {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Keys accepted in a config file. Every key is optional; flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub bench: Option<String>,
    pub variant: Option<String>,
    pub nodes: Option<usize>,
    pub p_reorder: Option<f64>,
    pub seeds: Option<String>,
    pub master_seed: Option<u64>,
    pub data_seed: Option<u64>,
    pub max_iterations: Option<u64>,
    pub trace: Option<String>,
    pub verify_reorder: Option<bool>,
    pub track_activity: Option<bool>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub dump_genome: Option<bool>,
    pub grid_nodes: Option<Vec<usize>>,
    pub grid_p: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.to_string().trim_end())))
    }
}

#[derive(Debug, Default, Clone, Args)]
pub struct CommonArgs {
    /// TOML file with flat keys; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// parity3, encode16_4, decode4_16, multiply3, nguyen7, koza3, pagie1, keijzer6
    #[arg(long)]
    pub bench: Option<String>,
    /// none, original, equidistant, uniform, negbias, leftskew
    #[arg(long)]
    pub variant: Option<String>,
    /// Number of computational nodes N
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Reorder probability (negbias and leftskew only)
    #[arg(long)]
    pub p_reorder: Option<f64>,
    /// Inclusive seed range `a..b`
    #[arg(long)]
    pub seeds: Option<String>,
    /// Master seed shared by every run; each run seed selects a stream
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// Seed for sampled regression datasets
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Iteration cap (default: 500000 for regression, 10000000 for Boolean)
    #[arg(long)]
    pub max_iterations: Option<u64>,
    /// sparse (improvements and every 100th iteration) or full
    #[arg(long)]
    pub trace: Option<String>,
    /// Re-evaluate the parent after every reorder
    #[arg(long)]
    pub verify_reorder: bool,
    /// Record per-position activity over the whole run
    #[arg(long)]
    pub track_activity: bool,
    /// Output directory (default: `results`, or `grid` for the grid command)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Worker threads (default: available cores)
    #[arg(long)]
    pub workers: Option<usize>,
}

/// The configuration that actually ran; embedded in every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub bench: BenchmarkName,
    pub variant: ReorderKind,
    pub nodes: usize,
    pub p_reorder: f64,
    pub seeds: SeedRange,
    pub master_seed: u64,
    pub data_seed: u64,
    pub max_iterations: u64,
    pub trace: TraceMode,
    pub trace_interval: u64,
    pub verify_reorder: bool,
    pub track_activity: bool,
    pub reorder_point: String,
    pub protection: String,
}

/// Settings plus the options that do not influence results.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub settings: Settings,
    pub output: PathBuf,
    pub workers: Option<usize>,
    pub dump_genome: bool,
}

fn parse<T: FromStr>(what: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("invalid {what} `{value}`: {e}")))
}

fn parse_trace(value: &str) -> Result<TraceMode, CliError> {
    match value {
        "sparse" => Ok(TraceMode::Sparse),
        "full" => Ok(TraceMode::Full),
        other => Err(CliError::Config(format!(
            "invalid trace `{other}` (expected sparse or full)"
        ))),
    }
}

impl CommonArgs {
    pub fn resolve(&self, default_output: &str) -> Result<Resolved, CliError> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let bench_name = self
            .bench
            .as_deref()
            .or(file.bench.as_deref())
            .ok_or_else(|| CliError::Config("no benchmark given (--bench or `bench`)".into()))?;
        let bench: BenchmarkName = parse("benchmark", bench_name)?;
        let variant: ReorderKind = parse(
            "variant",
            self.variant.as_deref().or(file.variant.as_deref()).unwrap_or("none"),
        )?;
        let nodes = self
            .nodes
            .or(file.nodes)
            .ok_or_else(|| CliError::Config("no node count given (--nodes or `nodes`)".into()))?;
        let p_reorder = self.p_reorder.or(file.p_reorder).unwrap_or(1.0);
        ReorderStrategy::new(variant, p_reorder)?;
        let seeds: SeedRange = parse(
            "seed range",
            self.seeds.as_deref().or(file.seeds.as_deref()).unwrap_or("0..0"),
        )?;
        let max_iterations = self
            .max_iterations
            .or(file.max_iterations)
            .unwrap_or(if bench.is_boolean() {
                BOOLEAN_SAFETY_CAP
            } else {
                REGRESSION_BUDGET
            });
        if max_iterations == 0 {
            return Err(CliError::Config("max_iterations must be at least 1".into()));
        }
        let trace = parse_trace(self.trace.as_deref().or(file.trace.as_deref()).unwrap_or("sparse"))?;
        if self.workers == Some(0) || file.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        let settings = Settings {
            bench,
            variant,
            nodes,
            p_reorder,
            seeds,
            master_seed: self.master_seed.or(file.master_seed).unwrap_or(0),
            data_seed: self.data_seed.or(file.data_seed).unwrap_or(0),
            max_iterations,
            trace,
            trace_interval: TRACE_INTERVAL,
            verify_reorder: self.verify_reorder || file.verify_reorder.unwrap_or(false),
            track_activity: self.track_activity || file.track_activity.unwrap_or(false),
            reorder_point: REORDER_POINT.to_string(),
            protection: PROTECTION_CONVENTIONS.to_string(),
        };
        Ok(Resolved {
            settings,
            output: self
                .output
                .clone()
                .or_else(|| file.output.clone())
                .unwrap_or_else(|| PathBuf::from(default_output)),
            workers: self.workers.or(file.workers),
            dump_genome: file.dump_genome.unwrap_or(false),
        })
    }
}

impl Settings {
    pub fn strategy(&self) -> Result<ReorderStrategy, CliError> {
        Ok(ReorderStrategy::new(self.variant, self.p_reorder)?)
    }

    pub fn es_config(&self, bench: &Benchmark, seed: u64) -> Result<EsConfig, CliError> {
        let mut config = EsConfig::for_benchmark(bench, self.nodes, self.strategy()?, seed);
        config.max_iterations = Some(self.max_iterations);
        config.trace = self.trace;
        config.verify_reorder = self.verify_reorder;
        config.track_activity = self.track_activity;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("settings serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!("0..74".parse::<SeedRange>().unwrap().iter().count(), 75);
        assert_eq!("3".parse::<SeedRange>().unwrap(), SeedRange { start: 3, end: 3 });
        assert_eq!("2..=4".parse::<SeedRange>().unwrap(), SeedRange { start: 2, end: 4 });
        assert!("5..4".parse::<SeedRange>().is_err());
        assert!("a..4".parse::<SeedRange>().is_err());
        assert_eq!("1..9".parse::<SeedRange>().unwrap().to_string(), "1..9");
    }

    #[test]
    fn flags_override_file_defaults() {
        let args = CommonArgs {
            bench: Some("keijzer6".into()),
            nodes: Some(50),
            variant: Some("equidistant".into()),
            ..Default::default()
        };
        let r = args.resolve("out").unwrap();
        assert_eq!(r.settings.max_iterations, REGRESSION_BUDGET);
        assert_eq!(r.settings.p_reorder, 1.0);
        assert_eq!(r.output, PathBuf::from("out"));

        let bad = CommonArgs {
            p_reorder: Some(0.5),
            ..args.clone()
        };
        assert!(matches!(bad.resolve("out"), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_file_keys_report_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "bench = \"parity3\"\nnodse = 5\n").unwrap();
        let err = FileConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
