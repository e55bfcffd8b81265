//! Aggregation of finished runs: positional-bias histograms, summary rows and
//! averaged convergence curves.
//!
//! Standard deviations are population standard deviations (divisor n).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::evolution::{ConvergenceTrace, RunResult};

/// Probability of each computational position being active in a final solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionalBiasHistogram {
    pub probabilities: Vec<f64>,
    pub run_count: usize,
}

impl PositionalBiasHistogram {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Position `k` scaled to `[0, 1]` by `N - 1`.
    pub fn normalized_position(&self, k: usize) -> f64 {
        let n = self.probabilities.len();
        if n <= 1 {
            0.0
        } else {
            k as f64 / (n - 1) as f64
        }
    }

    pub fn global_mean(&self) -> f64 {
        mean(&self.probabilities)
    }

    /// Mean probability in each of `buckets` equal-width position ranges.
    /// Bucket `b` covers positions `[b·N/buckets, (b+1)·N/buckets)`.
    pub fn bucket_means(&self, buckets: usize) -> Vec<f64> {
        let n = self.probabilities.len();
        (0..buckets)
            .map(|b| {
                let lo = b * n / buckets;
                let hi = (b + 1) * n / buckets;
                if hi > lo {
                    mean(&self.probabilities[lo..hi])
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn decile_means(&self) -> Vec<f64> {
        self.bucket_means(10)
    }

    /// Writes `position,normalized_position,probability` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["position", "normalized_position", "probability"])?;
        for (k, p) in self.probabilities.iter().enumerate() {
            w.write_record([
                k.to_string(),
                self.normalized_position(k).to_string(),
                p.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn common_node_count(results: &[RunResult]) -> Result<usize, AnalysisError> {
    let first = results.first().ok_or(AnalysisError::Empty)?.num_computational();
    match results.iter().map(RunResult::num_computational).find(|&n| n != first) {
        Some(other) => Err(AnalysisError::MixedNodeCounts(first, other)),
        None => Ok(first),
    }
}

/// Position-wise mean of the final active bitmaps.
pub fn active_distribution(results: &[RunResult]) -> Result<PositionalBiasHistogram, AnalysisError> {
    let n = common_node_count(results)?;
    let mut counts = vec![0usize; n];
    for r in results {
        for (c, &active) in counts.iter_mut().zip(&r.active_bitmap.0) {
            *c += active as usize;
        }
    }
    let runs = results.len();
    Ok(PositionalBiasHistogram {
        probabilities: counts.into_iter().map(|c| c as f64 / runs as f64).collect(),
        run_count: runs,
    })
}

/// Identifies the experiment a set of runs belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantMeta {
    pub benchmark: String,
    pub variant: String,
    pub p_reorder: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub benchmark: String,
    pub variant: String,
    pub num_computational: usize,
    pub p_reorder: f64,
    pub runs: usize,
    pub success_rate: f64,
    /// Mean iterations over every run, converged or not.
    pub mean_i2s: f64,
    pub sd_i2s: f64,
    pub mean_active: f64,
    pub mean_train_fitness: f64,
    pub mean_test_fitness: Option<f64>,
}

pub fn summarize(results: &[RunResult], meta: &VariantMeta) -> Result<SummaryRow, AnalysisError> {
    let n = common_node_count(results)?;
    let i2s: Vec<f64> = results.iter().map(|r| r.iterations as f64).collect();
    let active: Vec<f64> = results.iter().map(|r| r.active_count as f64).collect();
    let train: Vec<f64> = results.iter().map(|r| r.final_train_fitness).collect();
    let test: Option<Vec<f64>> = results.iter().map(|r| r.final_test_fitness).collect();
    let converged = results.iter().filter(|r| r.converged).count();
    Ok(SummaryRow {
        benchmark: meta.benchmark.clone(),
        variant: meta.variant.clone(),
        num_computational: n,
        p_reorder: meta.p_reorder,
        runs: results.len(),
        success_rate: converged as f64 / results.len() as f64,
        mean_i2s: mean(&i2s),
        sd_i2s: population_sd(&i2s),
        mean_active: mean(&active),
        mean_train_fitness: mean(&train),
        mean_test_fitness: test.map(|t| mean(&t)),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: u64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub points: Vec<CurvePoint>,
}

impl ConvergenceCurve {
    /// Writes `iteration,mean_fitness,sd` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iteration", "mean_fitness", "sd"])?;
        for p in &self.points {
            w.write_record([p.iteration.to_string(), p.mean.to_string(), p.sd.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean and population standard deviation of best-so-far fitness at each grid
/// iteration. Traces are step functions; a run that stopped early keeps its
/// final value.
pub fn convergence_mean(traces: &[ConvergenceTrace], grid: &[u64]) -> ConvergenceCurve {
    let mut values = Vec::with_capacity(traces.len());
    let points = grid
        .iter()
        .map(|&iteration| {
            values.clear();
            values.extend(traces.iter().filter_map(|t| t.value_at(iteration)));
            // sorted so the floating-point sum does not depend on trace order
            values.sort_by(f64::total_cmp);
            CurvePoint {
                iteration,
                mean: mean(&values),
                sd: population_sd(&values),
            }
        })
        .collect();
    ConvergenceCurve { points }
}

/// `points` evenly spaced iterations from 0 to `last` inclusive, deduplicated.
pub fn iteration_grid(last: u64, points: usize) -> Vec<u64> {
    if points <= 1 || last == 0 {
        return vec![0];
    }
    let mut grid: Vec<u64> = (0..points)
        .map(|i| (i as u128 * last as u128 / (points - 1) as u128) as u64)
        .collect();
    grid.dedup();
    grid
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_sd(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}
