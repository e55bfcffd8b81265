//! Boolean truth-table benchmarks, symbolic-regression datasets and their
//! fitness functions.
//!
//! Bit conventions: 3-bit Multiply lists operands and product most significant
//! bit first (inputs `a2 a1 a0 b2 b1 b0`, outputs `p5..p0`). Encode and Decode
//! use least-significant-bit-first binary indices, and one-hot line `i` is
//! input/output `i`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, DatasetIoError};
use crate::functions::FunctionSet;
use crate::genome::{ActiveSet, Genotype, GraphParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BooleanName {
    Parity3,
    Encode16_4,
    Decode4_16,
    Multiply3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionName {
    Nguyen7,
    Koza3,
    Pagie1,
    Keijzer6,
}

/// Any of the eight benchmark problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum BenchmarkName {
    Boolean(BooleanName),
    Regression(RegressionName),
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 8] = [
        BenchmarkName::Boolean(BooleanName::Parity3),
        BenchmarkName::Boolean(BooleanName::Encode16_4),
        BenchmarkName::Boolean(BooleanName::Decode4_16),
        BenchmarkName::Boolean(BooleanName::Multiply3),
        BenchmarkName::Regression(RegressionName::Nguyen7),
        BenchmarkName::Regression(RegressionName::Koza3),
        BenchmarkName::Regression(RegressionName::Pagie1),
        BenchmarkName::Regression(RegressionName::Keijzer6),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::Boolean(BooleanName::Parity3) => "parity3",
            BenchmarkName::Boolean(BooleanName::Encode16_4) => "encode16_4",
            BenchmarkName::Boolean(BooleanName::Decode4_16) => "decode4_16",
            BenchmarkName::Boolean(BooleanName::Multiply3) => "multiply3",
            BenchmarkName::Regression(RegressionName::Nguyen7) => "nguyen7",
            BenchmarkName::Regression(RegressionName::Koza3) => "koza3",
            BenchmarkName::Regression(RegressionName::Pagie1) => "pagie1",
            BenchmarkName::Regression(RegressionName::Keijzer6) => "keijzer6",
        }
    }

    pub fn function_set(self) -> FunctionSet {
        match self {
            BenchmarkName::Boolean(_) => FunctionSet::Boolean,
            BenchmarkName::Regression(_) => FunctionSet::Regression,
        }
    }

    pub fn is_boolean(self) -> bool {
        matches!(self, BenchmarkName::Boolean(_))
    }

    /// Whether the dataset depends on the sampling seed.
    pub fn is_sampled(self) -> bool {
        matches!(
            self,
            BenchmarkName::Regression(RegressionName::Nguyen7 | RegressionName::Koza3)
        )
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkName {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchmarkName::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| ConfigError::UnknownBenchmark(s.to_string()))
    }
}

impl From<BenchmarkName> for String {
    fn from(b: BenchmarkName) -> String {
        b.as_str().to_string()
    }
}

impl TryFrom<String> for BenchmarkName {
    type Error = ConfigError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A complete truth table, packed one `u64` word per input/output line.
///
/// Bit `r` of `inputs[i]` is input `i` in row `r`; likewise for `targets`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanBenchmark {
    pub name: BooleanName,
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub num_rows: usize,
    pub inputs: Vec<u64>,
    pub targets: Vec<u64>,
}

impl BooleanBenchmark {
    fn from_rows(name: BooleanName, num_inputs: usize, num_outputs: usize, rows: &[(u64, u64)]) -> Self {
        assert!(rows.len() <= 64, "at most 64 rows fit one word");
        let mut inputs = vec![0u64; num_inputs];
        let mut targets = vec![0u64; num_outputs];
        for (r, &(x, y)) in rows.iter().enumerate() {
            for (i, w) in inputs.iter_mut().enumerate() {
                *w |= (x >> i & 1) << r;
            }
            for (j, w) in targets.iter_mut().enumerate() {
                *w |= (y >> j & 1) << r;
            }
        }
        BooleanBenchmark {
            name,
            num_inputs,
            num_outputs,
            num_rows: rows.len(),
            inputs,
            targets,
        }
    }

    pub fn row_mask(&self) -> u64 {
        if self.num_rows == 64 {
            u64::MAX
        } else {
            (1u64 << self.num_rows) - 1
        }
    }

    /// Input and expected output bits of row `r`.
    pub fn row(&self, r: usize) -> (Vec<bool>, Vec<bool>) {
        let bits = |words: &[u64]| words.iter().map(|w| w >> r & 1 == 1).collect();
        (bits(&self.inputs), bits(&self.targets))
    }
}

pub fn build_boolean(name: BooleanName) -> BooleanBenchmark {
    // Row words below use bit i for input/output line i.
    match name {
        BooleanName::Parity3 => {
            let rows: Vec<_> = (0..8u64).map(|x| (x, (x.count_ones() % 2) as u64)).collect();
            BooleanBenchmark::from_rows(name, 3, 1, &rows)
        }
        BooleanName::Encode16_4 => {
            let rows: Vec<_> = (0..16u64).map(|i| (1 << i, i)).collect();
            BooleanBenchmark::from_rows(name, 16, 4, &rows)
        }
        BooleanName::Decode4_16 => {
            let rows: Vec<_> = (0..16u64).map(|i| (i, 1 << i)).collect();
            BooleanBenchmark::from_rows(name, 4, 16, &rows)
        }
        BooleanName::Multiply3 => {
            let rows: Vec<_> = (0..64u64)
                .map(|r| {
                    let (a, b) = (r >> 3, r & 7);
                    (msb_first(r, 6), msb_first(a * b, 6))
                })
                .collect();
            BooleanBenchmark::from_rows(name, 6, 6, &rows)
        }
    }
}

/// Places bit `width-1-i` of `value` on line `i`.
fn msb_first(value: u64, width: u32) -> u64 {
    (0..width).fold(0, |w, i| w | (value >> (width - 1 - i) & 1) << i)
}

/// Input points with one target each.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub num_vars: usize,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// CSV with header `x0[,x1,...],y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetIoError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.num_vars).map(|i| format!("x{i}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let mut rec: Vec<String> = x.iter().map(f64::to_string).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, DatasetIoError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let num_vars = header.len().saturating_sub(1);
        let expected: Vec<String> = (0..num_vars)
            .map(|i| format!("x{i}"))
            .chain(std::iter::once("y".to_string()))
            .collect();
        if num_vars == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(DatasetIoError::Malformed(format!(
                "unexpected header {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let values: Vec<f64> = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| DatasetIoError::Malformed(format!("`{f}` is not a number")))
                })
                .collect::<Result<_, _>>()?;
            targets.push(values[num_vars]);
            inputs.push(values[..num_vars].to_vec());
        }
        Ok(Dataset {
            num_vars,
            inputs,
            targets,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionBenchmark {
    pub name: RegressionName,
    pub train: Dataset,
    pub test: Option<Dataset>,
}

pub fn nguyen7(x: f64) -> f64 {
    (x + 1.0).ln() + (x * x + 1.0).ln()
}

pub fn koza3(x: f64) -> f64 {
    let x2 = x * x;
    x2 * x2 * x2 - 2.0 * x2 * x2 + x2
}

/// Standard Pagie-1: `1/(1+x^-4) + 1/(1+y^-4)`.
pub fn pagie1(x: f64, y: f64) -> f64 {
    1.0 / (1.0 + x.powi(-4)) + 1.0 / (1.0 + y.powi(-4))
}

/// Harmonic number `sum_{i=1}^{x} 1/i` for integral `x >= 1`.
pub fn keijzer6(x: f64) -> f64 {
    (1..=x as u64).map(|i| 1.0 / i as f64).sum()
}

/// `count` points drawn uniformly from `[a, b]`.
fn uniform_points<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.random_range(a..=b)).collect()
}

/// `a + k·step` for `k = 0, 1, ...` while the value does not exceed `b`.
pub fn grid_points(a: f64, b: f64, step: f64) -> Vec<f64> {
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| a + k as f64 * step).collect()
}

fn univariate(points: Vec<f64>, f: fn(f64) -> f64) -> Dataset {
    Dataset {
        num_vars: 1,
        targets: points.iter().map(|&x| f(x)).collect(),
        inputs: points.into_iter().map(|x| vec![x]).collect(),
    }
}

/// Builds a regression benchmark. Only Nguyen-7 and Koza-3 consume `rng`.
pub fn build_regression<R: Rng + ?Sized>(name: RegressionName, rng: &mut R) -> RegressionBenchmark {
    match name {
        RegressionName::Nguyen7 => RegressionBenchmark {
            name,
            train: univariate(uniform_points(rng, 0.0, 2.0, 20), nguyen7),
            test: None,
        },
        RegressionName::Koza3 => RegressionBenchmark {
            name,
            train: univariate(uniform_points(rng, -1.0, 1.0, 20), koza3),
            test: None,
        },
        RegressionName::Pagie1 => {
            let axis = grid_points(-5.0, 5.0, 0.4);
            let mut inputs = Vec::with_capacity(axis.len() * axis.len());
            let mut targets = Vec::with_capacity(axis.len() * axis.len());
            for &x in &axis {
                for &y in &axis {
                    inputs.push(vec![x, y]);
                    targets.push(pagie1(x, y));
                }
            }
            RegressionBenchmark {
                name,
                train: Dataset {
                    num_vars: 2,
                    inputs,
                    targets,
                },
                test: None,
            }
        }
        RegressionName::Keijzer6 => RegressionBenchmark {
            name,
            train: univariate(grid_points(1.0, 50.0, 1.0), keijzer6),
            test: Some(univariate(grid_points(1.0, 120.0, 1.0), keijzer6)),
        },
    }
}

/// A benchmark of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Benchmark {
    Boolean(BooleanBenchmark),
    Regression(RegressionBenchmark),
}

impl Benchmark {
    /// Builds `name`; `rng` is only used by sampled regression datasets.
    pub fn build<R: Rng + ?Sized>(name: BenchmarkName, rng: &mut R) -> Self {
        match name {
            BenchmarkName::Boolean(b) => Benchmark::Boolean(build_boolean(b)),
            BenchmarkName::Regression(r) => Benchmark::Regression(build_regression(r, rng)),
        }
    }

    pub fn name(&self) -> BenchmarkName {
        match self {
            Benchmark::Boolean(b) => BenchmarkName::Boolean(b.name),
            Benchmark::Regression(r) => BenchmarkName::Regression(r.name),
        }
    }

    pub fn num_inputs(&self) -> usize {
        match self {
            Benchmark::Boolean(b) => b.num_inputs,
            Benchmark::Regression(r) => r.train.num_vars,
        }
    }

    pub fn num_outputs(&self) -> usize {
        match self {
            Benchmark::Boolean(b) => b.num_outputs,
            Benchmark::Regression(_) => 1,
        }
    }

    pub fn function_set(&self) -> FunctionSet {
        self.name().function_set()
    }

    /// Graph parameters fitting this benchmark with `num_computational` nodes.
    pub fn graph_params(&self, num_computational: usize) -> Result<GraphParams, ConfigError> {
        GraphParams::new(
            self.num_inputs(),
            self.num_outputs(),
            num_computational,
            self.function_set(),
        )
    }

    pub fn check_genome(&self, genome: &Genotype) -> Result<(), ConfigError> {
        let p = genome.params();
        if p.function_set != self.function_set() {
            return Err(ConfigError::FunctionSetMismatch {
                genome: p.function_set.to_string(),
                bench: self.function_set().to_string(),
            });
        }
        if p.num_inputs != self.num_inputs() {
            return Err(ConfigError::ArityMismatch {
                what: "inputs",
                genome: p.num_inputs,
                bench: self.num_inputs(),
            });
        }
        if p.num_outputs != self.num_outputs() {
            return Err(ConfigError::ArityMismatch {
                what: "outputs",
                genome: p.num_outputs,
                bench: self.num_outputs(),
            });
        }
        Ok(())
    }
}

fn check_boolean(genome: &Genotype, bench: &BooleanBenchmark) -> Result<(), ConfigError> {
    Benchmark::Boolean(bench.clone()).check_genome(genome)
}

/// Fraction of rows whose whole output vector matches the truth table.
pub fn boolean_fitness(genome: &Genotype, bench: &BooleanBenchmark) -> Result<f64, ConfigError> {
    check_boolean(genome, bench)?;
    Ok(boolean_fitness_with(genome, &genome.decode_active(), bench, &mut Vec::new()))
}

/// Unchecked fast path for the evolution loop.
pub fn boolean_fitness_with(
    genome: &Genotype,
    active: &ActiveSet,
    bench: &BooleanBenchmark,
    scratch: &mut Vec<u64>,
) -> f64 {
    let mut out = vec![0u64; bench.num_outputs];
    genome.evaluate_with(active, &bench.inputs, scratch, &mut out);
    let wrong = out
        .iter()
        .zip(&bench.targets)
        .fold(0u64, |acc, (got, want)| acc | (got ^ want));
    let correct = bench.num_rows as u32 - (wrong & bench.row_mask()).count_ones();
    correct as f64 / bench.num_rows as f64
}

/// Mean absolute error of the genome's single output over `data`.
pub fn mae_fitness(genome: &Genotype, data: &Dataset) -> Result<f64, ConfigError> {
    if data.is_empty() {
        return Err(ConfigError::EmptyDataset);
    }
    let p = genome.params();
    if p.function_set != FunctionSet::Regression {
        return Err(ConfigError::FunctionSetMismatch {
            genome: p.function_set.to_string(),
            bench: FunctionSet::Regression.to_string(),
        });
    }
    if p.num_inputs != data.num_vars {
        return Err(ConfigError::ArityMismatch {
            what: "inputs",
            genome: p.num_inputs,
            bench: data.num_vars,
        });
    }
    if p.num_outputs != 1 {
        return Err(ConfigError::ArityMismatch {
            what: "outputs",
            genome: p.num_outputs,
            bench: 1,
        });
    }
    Ok(mae_fitness_with(genome, &genome.decode_active(), data, &mut Vec::new()))
}

/// Unchecked fast path for the evolution loop.
pub fn mae_fitness_with(
    genome: &Genotype,
    active: &ActiveSet,
    data: &Dataset,
    scratch: &mut Vec<f64>,
) -> f64 {
    let mut out = [0.0f64];
    let mut total = 0.0;
    for (x, &y) in data.inputs.iter().zip(&data.targets) {
        genome.evaluate_with(active, x, scratch, &mut out);
        total += (out[0] - y).abs();
    }
    // keeps the value finite (and JSON-representable) when outputs saturate
    (total / data.len() as f64).min(f64::MAX)
}

/// Random stream used to sample the datasets of one `data_seed`.
pub fn dataset_rng(data_seed: u64) -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(data_seed)
}
