//! The Single mutation operator.
//!
//! Genes are drawn uniformly from all function genes, connection genes and
//! output genes. Each drawn gene is resampled to a different legal value.
//! Mutation stops once a gene that the parent's phenotype depends on has
//! changed: the function gene or a consumed connection gene of an active node,
//! or any output gene.

use rand::Rng;

use crate::genome::{ActiveSet, Genotype};

/// Resamples uniformly from `0..domain` excluding `current`. Returns `current`
/// when the domain has a single value.
fn resample_excluding<R: Rng + ?Sized>(rng: &mut R, domain: usize, current: usize) -> usize {
    if domain <= 1 {
        return current;
    }
    let draw = rng.random_range(0..domain - 1);
    if draw >= current {
        draw + 1
    } else {
        draw
    }
}

/// Outcome details of one [`single_mutation`] call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MutationStats {
    /// Genes drawn, including the final one.
    pub attempts: usize,
    /// Genes whose value actually changed.
    pub changed: usize,
}

/// Applies Single mutation; `active` must be `genome.decode_active()`.
pub fn single_mutation<R: Rng + ?Sized>(
    genome: &Genotype,
    active: &ActiveSet,
    rng: &mut R,
) -> Genotype {
    single_mutation_with_stats(genome, active, rng).0
}

pub fn single_mutation_with_stats<R: Rng + ?Sized>(
    genome: &Genotype,
    active: &ActiveSet,
    rng: &mut R,
) -> (Genotype, MutationStats) {
    let params = *genome.params();
    let functions = params.function_set.len();
    let genes_per_node = 1 + params.arity;
    let node_genes = params.num_computational * genes_per_node;
    let total = node_genes + params.num_outputs;

    let mut child = genome.clone();
    let mut stats = MutationStats {
        attempts: 0,
        changed: 0,
    };
    loop {
        stats.attempts += 1;
        let gene = rng.random_range(0..total);
        let hit = if gene < node_genes {
            let k = gene / genes_per_node;
            let slot = gene % genes_per_node;
            let node = &mut child.nodes_mut()[k];
            if slot == 0 {
                let old = node.function;
                node.function = resample_excluding(rng, functions, old);
                let changed = node.function != old;
                stats.changed += changed as usize;
                changed && active.is_active(k)
            } else {
                let c = slot - 1;
                let old = node.connections[c];
                node.connections[c] = resample_excluding(rng, params.position_of(k), old);
                let changed = node.connections[c] != old;
                stats.changed += changed as usize;
                // the parent's function decides whether this gene is consumed
                let consumed = c < params.function_set.arity(genome.nodes()[k].function);
                changed && active.is_active(k) && consumed
            }
        } else {
            let i = gene - node_genes;
            let slot = &mut child.outputs_mut()[i];
            let old = *slot;
            *slot = resample_excluding(rng, params.num_sources(), old);
            let changed = *slot != old;
            stats.changed += changed as usize;
            changed
        };
        if hit {
            return (child, stats);
        }
    }
}
