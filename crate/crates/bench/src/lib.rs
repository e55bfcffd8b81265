//! Fixtures shared by the criterion benchmarks in `benches/`.

use cgp_core::{FunctionSet, Genotype, GraphParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Node counts used for the scaling benchmarks.
pub const SIZES: [usize; 3] = [1000, 2000, 4000];

/// Deterministic random genomes with the multiply3 shape (6 inputs, 6 outputs).
pub fn multiply_genomes(nodes: usize, count: usize) -> Vec<Genotype> {
    let params = GraphParams::new(6, 6, nodes, FunctionSet::Boolean).expect("valid shape");
    let mut rng = ChaCha8Rng::seed_from_u64(nodes as u64);
    (0..count).map(|_| Genotype::random(params, &mut rng)).collect()
}

pub fn bench_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xC6F)
}
