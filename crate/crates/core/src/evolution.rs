//! The (1+4) evolutionary strategy with optional per-generation reordering.
//!
//! Each iteration:
//! 1. the parent is reordered with probability `p_reorder` (its fitness is
//!    kept; reordering never changes the phenotype),
//! 2. four offspring are produced by Single mutation and evaluated,
//! 3. the best offspring replaces the parent if it is at least as good.
//!
//! Boolean runs maximize the fraction of correct rows and stop at 1.0.
//! Regression runs minimize training MAE and stop once it drops below 0.01.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::benchmarks::{boolean_fitness_with, mae_fitness_with, Benchmark};
use crate::error::{ConfigError, EvolutionError, InvariantError};
use crate::genome::{ActiveSet, Genotype};
use crate::mutation::single_mutation;
use crate::reorder::{gated_reorder, ReorderStrategy};

pub const MU: usize = 1;
pub const LAMBDA: usize = 4;

/// Iteration budget for regression runs.
pub const REGRESSION_BUDGET: u64 = 500_000;
/// Regression runs converge once training MAE falls below this.
pub const REGRESSION_THRESHOLD: f64 = 0.01;
/// Boolean runs converge when every row is mapped correctly.
pub const BOOLEAN_THRESHOLD: f64 = 1.0;

/// Every this many iterations a trace sample is taken even without improvement.
pub const TRACE_INTERVAL: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Maximize,
    Minimize,
}

impl Objective {
    /// Whether `candidate` is equal or better than `incumbent`.
    #[inline]
    pub fn at_least_as_good(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Objective::Maximize => candidate >= incumbent,
            Objective::Minimize => candidate <= incumbent,
        }
    }

    #[inline]
    pub fn better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Objective::Maximize => candidate > incumbent,
            Objective::Minimize => candidate < incumbent,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMode {
    /// Improvements plus every [`TRACE_INTERVAL`]th iteration.
    Sparse,
    /// Every iteration.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EsConfig {
    pub num_computational: usize,
    pub strategy: ReorderStrategy,
    /// `None` runs until convergence.
    pub max_iterations: Option<u64>,
    pub convergence_threshold: f64,
    pub objective: Objective,
    pub seed: u64,
    pub trace: TraceMode,
    /// Re-evaluate the parent after each reorder and fail if its fitness moved.
    pub verify_reorder: bool,
    /// Record how often each position was active in the parent across iterations.
    pub track_activity: bool,
}

impl EsConfig {
    /// Defaults for a benchmark: Boolean runs are unbounded, regression runs
    /// get 5·10⁵ iterations.
    pub fn for_benchmark(
        bench: &Benchmark,
        num_computational: usize,
        strategy: ReorderStrategy,
        seed: u64,
    ) -> Self {
        let (objective, threshold, budget) = match bench {
            Benchmark::Boolean(_) => (Objective::Maximize, BOOLEAN_THRESHOLD, None),
            Benchmark::Regression(_) => (
                Objective::Minimize,
                REGRESSION_THRESHOLD,
                Some(REGRESSION_BUDGET),
            ),
        };
        EsConfig {
            num_computational,
            strategy,
            max_iterations: budget,
            convergence_threshold: threshold,
            objective,
            seed,
            trace: TraceMode::Sparse,
            verify_reorder: false,
            track_activity: false,
        }
    }

    pub fn mu(&self) -> usize {
        MU
    }

    pub fn lambda(&self) -> usize {
        LAMBDA
    }

    pub fn is_converged(&self, fitness: f64) -> bool {
        match self.objective {
            Objective::Maximize => fitness >= self.convergence_threshold,
            Objective::Minimize => fitness < self.convergence_threshold,
        }
    }

    fn check(&self, bench: &Benchmark) -> Result<(), ConfigError> {
        if self.max_iterations == Some(0) {
            return Err(ConfigError::InvalidEvolution(
                "max_iterations must be at least 1".into(),
            ));
        }
        let expected = match bench {
            Benchmark::Boolean(_) => Objective::Maximize,
            Benchmark::Regression(_) => Objective::Minimize,
        };
        if self.objective != expected {
            return Err(ConfigError::InvalidEvolution(format!(
                "{} benchmarks must use objective {:?}",
                bench.name(),
                expected
            )));
        }
        Ok(())
    }
}

/// Sampled `(iteration, best fitness so far)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConvergenceTrace {
    pub samples: Vec<(u64, f64)>,
}

impl ConvergenceTrace {
    fn record(&mut self, iteration: u64, fitness: f64) {
        match self.samples.last_mut() {
            Some(last) if last.0 == iteration => last.1 = fitness,
            _ => self.samples.push((iteration, fitness)),
        }
    }

    /// Best-so-far fitness at `iteration` (step function; clamps at both ends).
    pub fn value_at(&self, iteration: u64) -> Option<f64> {
        let idx = self.samples.partition_point(|&(it, _)| it <= iteration);
        match idx {
            0 => self.samples.first().map(|s| s.1),
            i => Some(self.samples[i - 1].1),
        }
    }

    pub fn is_monotone(&self, objective: Objective) -> bool {
        self.samples
            .windows(2)
            .all(|w| w[0].0 < w[1].0 && objective.at_least_as_good(w[1].1, w[0].1))
    }
}

/// Activity bitmap over computational positions, serialized as a `0`/`1` string.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bitmap(pub Vec<bool>);

impl Serialize for Bitmap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let s: String = self.0.iter().map(|&b| if b { '1' } else { '0' }).collect();
        serializer.serialize_str(&s)
    }
}

impl<'de> Deserialize<'de> for Bitmap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(de::Error::custom(format!("bad bitmap character {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bitmap)
    }
}

impl From<&ActiveSet> for Bitmap {
    fn from(a: &ActiveSet) -> Self {
        Bitmap(a.bitmap().to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub converged: bool,
    /// Iterations spent; the I2S when `converged`.
    pub iterations: u64,
    pub evaluations: u64,
    pub final_train_fitness: f64,
    pub final_test_fitness: Option<f64>,
    pub active_count: usize,
    pub active_bitmap: Bitmap,
    pub trace: ConvergenceTrace,
    /// Per-position fraction of iterations in which the parent's node was
    /// active. Present only when activity tracking was enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity_over_training: Option<Vec<f64>>,
}

impl RunResult {
    pub fn num_computational(&self) -> usize {
        self.active_bitmap.0.len()
    }
}

/// A finished run together with its final parent genome.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub result: RunResult,
    pub best: Genotype,
}

/// Outcome of elitist selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Offspring(usize),
    Parent,
}

/// Picks the best offspring (lowest index on ties) if it is at least as good as
/// the parent; otherwise keeps the parent.
pub fn select_parent(parent_fitness: f64, offspring: &[f64], objective: Objective) -> Selection {
    let mut best: Option<usize> = None;
    for (i, &f) in offspring.iter().enumerate() {
        if best.is_none_or(|b| objective.better(f, offspring[b])) {
            best = Some(i);
        }
    }
    match best {
        Some(i) if objective.at_least_as_good(offspring[i], parent_fitness) => Selection::Offspring(i),
        _ => Selection::Parent,
    }
}

/// Deterministic random stream for run `seed` of an experiment seeded with
/// `master_seed`. Streams for different `seed` values are independent, so a
/// batch can be executed in any order.
pub fn run_rng(master_seed: u64, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(seed);
    rng
}

struct Evaluator<'a> {
    bench: &'a Benchmark,
    words: Vec<u64>,
    reals: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(bench: &'a Benchmark) -> Self {
        Evaluator {
            bench,
            words: Vec::new(),
            reals: Vec::new(),
        }
    }

    fn train(&mut self, genome: &Genotype, active: &ActiveSet) -> f64 {
        match self.bench {
            Benchmark::Boolean(b) => boolean_fitness_with(genome, active, b, &mut self.words),
            Benchmark::Regression(r) => mae_fitness_with(genome, active, &r.train, &mut self.reals),
        }
    }

    fn test(&mut self, genome: &Genotype, active: &ActiveSet) -> Option<f64> {
        match self.bench {
            Benchmark::Boolean(_) => None,
            Benchmark::Regression(r) => r
                .test
                .as_ref()
                .map(|t| mae_fitness_with(genome, active, t, &mut self.reals)),
        }
    }
}

/// Runs one (1+4)-ES to convergence or budget exhaustion.
pub fn run_es<R: Rng + ?Sized>(
    config: &EsConfig,
    bench: &Benchmark,
    rng: &mut R,
) -> Result<RunOutput, EvolutionError> {
    config.check(bench)?;
    let params = bench.graph_params(config.num_computational)?;
    let objective = config.objective;
    let mut eval = Evaluator::new(bench);

    let mut parent = Genotype::random(params, rng);
    let mut parent_active = parent.decode_active();
    let mut parent_fitness = eval.train(&parent, &parent_active);

    let mut trace = ConvergenceTrace::default();
    trace.record(0, parent_fitness);
    let mut iterations = 0u64;
    let mut converged = config.is_converged(parent_fitness);

    let mut children: Vec<(Genotype, ActiveSet)> = Vec::with_capacity(LAMBDA);
    let mut fitness = [0.0f64; LAMBDA];
    let mut activity: Option<Vec<u64>> = config
        .track_activity
        .then(|| vec![0; config.num_computational]);
    while !converged && config.max_iterations.is_none_or(|b| iterations < b) {
        iterations += 1;

        if let Some(reordered) = gated_reorder(&parent, &config.strategy, rng)? {
            let active = reordered.decode_active();
            if config.verify_reorder {
                let after = eval.train(&reordered, &active);
                if after.to_bits() != parent_fitness.to_bits() {
                    return Err(InvariantError::PhenotypeChanged {
                        before: parent_fitness,
                        after,
                    }
                    .into());
                }
            }
            parent = reordered;
            parent_active = active;
        }

        children.clear();
        for slot in fitness.iter_mut() {
            let child = single_mutation(&parent, &parent_active, rng);
            let active = child.decode_active();
            *slot = eval.train(&child, &active);
            children.push((child, active));
        }

        let previous = parent_fitness;
        if let Selection::Offspring(i) = select_parent(parent_fitness, &fitness, objective) {
            parent_fitness = fitness[i];
            let (g, a) = children.swap_remove(i);
            parent = g;
            parent_active = a;
        }

        let improved = objective.better(parent_fitness, previous);
        if improved || config.trace == TraceMode::Full || iterations.is_multiple_of(TRACE_INTERVAL) {
            trace.record(iterations, parent_fitness);
        }
        if let Some(counts) = activity.as_mut() {
            for k in parent_active.active_indices() {
                counts[k] += 1;
            }
        }
        converged = config.is_converged(parent_fitness);
    }
    trace.record(iterations, parent_fitness);

    let final_test_fitness = eval.test(&parent, &parent_active);
    let result = RunResult {
        seed: config.seed,
        converged,
        iterations,
        evaluations: LAMBDA as u64 * iterations,
        final_train_fitness: parent_fitness,
        final_test_fitness,
        active_count: parent_active.count(),
        active_bitmap: Bitmap::from(&parent_active),
        trace,
        activity_over_training: activity.map(|counts| {
            let n = iterations.max(1) as f64;
            counts.into_iter().map(|c| c as f64 / n).collect()
        }),
    };
    Ok(RunOutput {
        result,
        best: parent,
    })
}

impl fmt::Display for RunResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed {} {} after {} iterations, train fitness {}, {} active",
            self.seed,
            if self.converged { "converged" } else { "stopped" },
            self.iterations,
            self.final_train_fitness,
            self.active_count
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{build_boolean, BooleanName, Dataset, RegressionBenchmark, RegressionName};
    use crate::reorder::ReorderKind;

    #[test]
    fn selection_examples() {
        use Objective::*;
        assert_eq!(select_parent(0.5, &[0.5, 0.4, 0.3, 0.2], Maximize), Selection::Offspring(0));
        assert_eq!(select_parent(0.9, &[0.1; 4], Maximize), Selection::Parent);
        assert_eq!(select_parent(0.3, &[0.3, 0.3, 0.1, 0.5], Minimize), Selection::Offspring(2));
        assert_eq!(select_parent(0.3, &[0.4, 0.3, 0.3, 0.5], Minimize), Selection::Offspring(1));
    }

    #[test]
    fn trace_step_lookup() {
        let t = ConvergenceTrace {
            samples: vec![(0, 0.5), (10, 0.75), (30, 1.0)],
        };
        assert_eq!(t.value_at(0), Some(0.5));
        assert_eq!(t.value_at(9), Some(0.5));
        assert_eq!(t.value_at(10), Some(0.75));
        assert_eq!(t.value_at(1000), Some(1.0));
        assert!(t.is_monotone(Objective::Maximize));
        assert!(!t.is_monotone(Objective::Minimize));
    }

    #[test]
    fn constant_target_converges() {
        // target y = 1 everywhere is reachable with one node (x/x or PDIV)
        let data = Dataset {
            num_vars: 1,
            inputs: (1..=5).map(|x| vec![x as f64]).collect(),
            targets: vec![1.0; 5],
        };
        let bench = Benchmark::Regression(RegressionBenchmark {
            name: RegressionName::Keijzer6,
            train: data,
            test: None,
        });
        let config = EsConfig::for_benchmark(&bench, 5, ReorderStrategy::NONE, 0);
        let out = run_es(&config, &bench, &mut run_rng(0, 0)).unwrap();
        assert!(out.result.converged);
        assert!(out.result.trace.is_monotone(Objective::Minimize));
        assert_eq!(out.result.evaluations, 4 * out.result.iterations);
    }

    #[test]
    fn parity_runs_are_deterministic_and_elitist() {
        let bench = Benchmark::Boolean(build_boolean(BooleanName::Parity3));
        for kind in ReorderKind::ALL {
            let strategy = ReorderStrategy::always(kind);
            let mut config = EsConfig::for_benchmark(&bench, 60, strategy, 3);
            config.verify_reorder = true;
            config.max_iterations = Some(20_000);
            let a = run_es(&config, &bench, &mut run_rng(1, 3)).unwrap().result;
            let b = run_es(&config, &bench, &mut run_rng(1, 3)).unwrap().result;
            assert_eq!(a, b, "{kind}");
            assert!(a.trace.is_monotone(Objective::Maximize));
            assert_eq!(a.evaluations, 4 * a.iterations);
            if a.converged {
                assert_eq!(a.final_train_fitness, 1.0);
            }
            assert_eq!(a.active_bitmap.0.iter().filter(|&&b| b).count(), a.active_count);
        }
    }

    #[test]
    fn budget_stops_the_run() {
        let bench = Benchmark::Boolean(build_boolean(BooleanName::Multiply3));
        let mut config = EsConfig::for_benchmark(&bench, 50, ReorderStrategy::NONE, 0);
        config.max_iterations = Some(7);
        let r = run_es(&config, &bench, &mut run_rng(0, 0)).unwrap().result;
        assert!(!r.converged);
        assert_eq!(r.iterations, 7);
        assert_eq!(r.trace.samples.last().unwrap().0, 7);

        config.max_iterations = Some(0);
        assert!(run_es(&config, &bench, &mut run_rng(0, 0)).is_err());
    }

    #[test]
    fn full_trace_has_every_iteration() {
        let bench = Benchmark::Boolean(build_boolean(BooleanName::Parity3));
        let mut config = EsConfig::for_benchmark(&bench, 30, ReorderStrategy::NONE, 0);
        config.max_iterations = Some(250);
        config.trace = TraceMode::Full;
        let r = run_es(&config, &bench, &mut run_rng(0, 0)).unwrap().result;
        assert_eq!(r.trace.samples.len() as u64, r.iterations + 1);
    }

    #[test]
    fn activity_tracking_is_a_probability() {
        let bench = Benchmark::Boolean(build_boolean(BooleanName::Parity3));
        let mut config = EsConfig::for_benchmark(&bench, 40, ReorderStrategy::NONE, 0);
        config.max_iterations = Some(300);
        config.track_activity = true;
        let r = run_es(&config, &bench, &mut run_rng(0, 0)).unwrap().result;
        let act = r.activity_over_training.unwrap();
        assert_eq!(act.len(), 40);
        assert!(act.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(act.iter().any(|&p| p > 0.0));
    }

    #[test]
    fn run_streams_differ_by_seed() {
        let a: u64 = run_rng(5, 0).random();
        let b: u64 = run_rng(5, 1).random();
        let c: u64 = run_rng(5, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn bitmap_serializes_as_string() {
        let b = Bitmap(vec![true, false, true]);
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "\"101\"");
        assert_eq!(serde_json::from_str::<Bitmap>(&json).unwrap(), b);
        assert!(serde_json::from_str::<Bitmap>("\"10x\"").is_err());
    }
}
