//! Cartesian Genetic Programming with phenotype-preserving genotype reordering.
//!
//! The crate provides the genome representation and its decoder, Single
//! mutation, five reorder operators, the (1+4) evolutionary strategy, the
//! Boolean and symbolic-regression benchmarks, and aggregation helpers for
//! analysing batches of runs.
//!
//! ```
//! use cgp_core::{build_boolean, run_es, run_rng, Benchmark, BooleanName, EsConfig, ReorderStrategy, ReorderKind};
//!
//! let bench = Benchmark::Boolean(build_boolean(BooleanName::Parity3));
//! let strategy = ReorderStrategy::always(ReorderKind::Equidistant);
//! let mut config = EsConfig::for_benchmark(&bench, 50, strategy, 0);
//! config.max_iterations = Some(200);
//! let out = run_es(&config, &bench, &mut run_rng(42, 0)).unwrap();
//! assert_eq!(out.result.evaluations, 4 * out.result.iterations);
//! ```

pub mod analysis;
pub mod benchmarks;
pub mod error;
pub mod evolution;
pub mod functions;
pub mod genome;
pub mod mutation;
pub mod reorder;

pub use analysis::{
    active_distribution, convergence_mean, iteration_grid, summarize, ConvergenceCurve,
    PositionalBiasHistogram, SummaryRow, VariantMeta,
};
pub use benchmarks::{
    build_boolean, build_regression, dataset_rng, Benchmark, BenchmarkName, BooleanBenchmark, BooleanName,
    Dataset, RegressionBenchmark, RegressionName,
};
pub use error::{AnalysisError, ConfigError, DatasetIoError, EvolutionError, InvariantError};
pub use evolution::{
    run_es, run_rng, select_parent, ConvergenceTrace, EsConfig, Objective, RunOutput, RunResult,
    Selection, TraceMode,
};
pub use functions::FunctionSet;
pub use genome::{ActiveSet, GraphParams, Genotype, NodeGene};
pub use mutation::single_mutation;
pub use reorder::{gated_reorder, maybe_reorder, reorder, ReorderKind, ReorderStrategy};
