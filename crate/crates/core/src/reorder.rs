//! Phenotype-preserving genotype reordering.
//!
//! Five operators move computational nodes to new positions without changing
//! what the program computes:
//!
//! * **Original**: random topological re-sort driven by an addable set.
//! * **Equidistant**: active nodes spread evenly over the computational range.
//! * **Uniform**: active positions drawn from a uniform distribution.
//! * **NegBias**: active nodes packed at the end, right before the outputs.
//! * **LeftSkew**: active positions drawn from Beta(6, 1).
//!
//! The four placement-based operators keep the relative order of active nodes
//! and of inactive nodes. Inactive nodes left pointing forward afterwards get
//! those connection genes resampled by [`repair_forward_connections`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, InvariantError};
use crate::genome::{Genotype, GraphParams};

/// Which reorder operator to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReorderKind {
    None,
    Original,
    Equidistant,
    Uniform,
    NegBias,
    LeftSkew,
}

impl ReorderKind {
    pub const ALL: [ReorderKind; 6] = [
        ReorderKind::None,
        ReorderKind::Original,
        ReorderKind::Equidistant,
        ReorderKind::Uniform,
        ReorderKind::NegBias,
        ReorderKind::LeftSkew,
    ];

    /// The five actual operators.
    pub const OPERATORS: [ReorderKind; 5] = [
        ReorderKind::Original,
        ReorderKind::Equidistant,
        ReorderKind::Uniform,
        ReorderKind::NegBias,
        ReorderKind::LeftSkew,
    ];

    /// Whether this operator is gated by a tunable `p_reorder`.
    pub fn has_probability(self) -> bool {
        matches!(self, ReorderKind::NegBias | ReorderKind::LeftSkew)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReorderKind::None => "none",
            ReorderKind::Original => "original",
            ReorderKind::Equidistant => "equidistant",
            ReorderKind::Uniform => "uniform",
            ReorderKind::NegBias => "negbias",
            ReorderKind::LeftSkew => "leftskew",
        }
    }
}

impl fmt::Display for ReorderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReorderKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReorderKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ConfigError::UnknownStrategy(s.to_string()))
    }
}

/// A reorder operator plus the probability of applying it each generation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReorderStrategy {
    kind: ReorderKind,
    p_reorder: f64,
}

impl ReorderStrategy {
    pub const NONE: ReorderStrategy = ReorderStrategy {
        kind: ReorderKind::None,
        p_reorder: 1.0,
    };

    /// Operators without the hyperparameter only accept `p_reorder == 1.0`.
    pub fn new(kind: ReorderKind, p_reorder: f64) -> Result<Self, ConfigError> {
        if !(0.0..=1.0).contains(&p_reorder) {
            return Err(ConfigError::ProbabilityOutOfRange(p_reorder));
        }
        if !kind.has_probability() && p_reorder != 1.0 {
            return Err(ConfigError::ProbabilityNotApplicable(
                kind.to_string(),
                p_reorder,
            ));
        }
        Ok(ReorderStrategy { kind, p_reorder })
    }

    /// `kind` with `p_reorder = 1.0`.
    pub fn always(kind: ReorderKind) -> Self {
        ReorderStrategy {
            kind,
            p_reorder: 1.0,
        }
    }

    pub fn kind(&self) -> ReorderKind {
        self.kind
    }

    pub fn p_reorder(&self) -> f64 {
        self.p_reorder
    }
}

/// Target positions for active and inactive nodes over `[start, end]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacementSets {
    pub active_positions: Vec<usize>,
    pub inactive_positions: Vec<usize>,
    pub start: usize,
    pub end: usize,
}

impl PlacementSets {
    /// Completes `active_positions` (strictly increasing, within range) with
    /// the ascending complement.
    pub fn from_active(params: &GraphParams, active_positions: Vec<usize>) -> Self {
        let start = params.first_computational();
        let end = params.last_computational();
        let mut taken = vec![false; params.num_computational];
        for &p in &active_positions {
            debug_assert!((start..=end).contains(&p));
            taken[p - start] = true;
        }
        let inactive_positions = taken
            .iter()
            .enumerate()
            .filter_map(|(i, &t)| (!t).then_some(start + i))
            .collect();
        PlacementSets {
            active_positions,
            inactive_positions,
            start,
            end,
        }
    }
}

/// `{ floor(s + i·(e−s)/n) | i = 1..n }`, ascending.
///
/// Panics unless `s <= e` and `1 <= n <= e - s + 1`.
pub fn lin_space(s: usize, e: usize, n: usize) -> Vec<usize> {
    assert!(s <= e, "lin_space: start {s} after end {e}");
    assert!(
        n >= 1 && n <= e - s + 1,
        "lin_space: n = {n} outside 1..={}",
        e - s + 1
    );
    let span = e - s;
    (1..=n).map(|i| s + i * span / n).collect()
}

/// Inverse-CDF transform of a unit uniform into Beta(6, 1).
#[inline]
pub fn beta61_from_uniform(u: f64) -> f64 {
    u.powf(1.0 / 6.0)
}

/// One Beta(6, 1) sample in `[0, 1)`.
pub fn sample_beta61<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    beta61_from_uniform(rng.random::<f64>())
}

/// Maps `n` samples from `[0, 1)` onto `n` distinct, ascending slots of
/// `[s, e]`.
///
/// Sample `x` lands in slot `s + floor(x · (e − s + 1))`. Collisions push a
/// slot right to the next free one; if that overflows `e` the tail is pushed
/// back left. Sorted order of samples is kept.
pub fn slots_from_unit_samples<I>(samples: I, s: usize, e: usize, n: usize) -> Vec<usize>
where
    I: IntoIterator<Item = f64>,
{
    let width = e - s + 1;
    assert!(n <= width, "cannot place {n} nodes in {width} slots");
    // counting sort: only the floored slot matters for the final order
    let mut counts = vec![0usize; width];
    let mut drawn = 0;
    for x in samples.into_iter().take(n) {
        let slot = ((x * width as f64) as usize).min(width - 1);
        counts[slot] += 1;
        drawn += 1;
    }
    assert_eq!(drawn, n, "not enough samples");

    let mut slots = Vec::with_capacity(n);
    for (slot, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            let next = match slots.last() {
                Some(&prev) if prev >= slot => prev + 1,
                _ => slot,
            };
            slots.push(next);
        }
    }
    if let Some(&last) = slots.last() {
        if last >= width {
            let mut cap = width - 1;
            for p in slots.iter_mut().rev() {
                if *p > cap {
                    *p = cap;
                }
                cap = p.saturating_sub(1);
            }
        }
    }
    slots.into_iter().map(|p| s + p).collect()
}

/// Moves nodes to the positions in `sets` and remaps every connection.
///
/// Active nodes (ascending) go to `sets.active_positions`, inactive nodes
/// (ascending) to `sets.inactive_positions`. No repair is done here.
fn place(genome: &Genotype, active: &[bool], sets: &PlacementSets) -> Genotype {
    let params = *genome.params();
    let mut new_position = vec![0usize; params.num_computational];
    let mut act = sets.active_positions.iter();
    let mut inact = sets.inactive_positions.iter();
    for (k, &is_active) in active.iter().enumerate() {
        let target = if is_active { act.next() } else { inact.next() };
        new_position[k] = *target.expect("placement sets sized to the genome");
    }
    relocate(genome, &new_position)
}

/// Builds the genome where computational node `k` moves to global position
/// `new_position[k]`.
fn relocate(genome: &Genotype, new_position: &[usize]) -> Genotype {
    let params = *genome.params();
    let s = params.first_computational();
    let map = |c: usize| if c < s { c } else { new_position[c - s] };
    let (_, old_nodes, old_outputs) = genome.clone().into_parts();
    let mut slots: Vec<Option<crate::genome::NodeGene>> = vec![None; params.num_computational];
    for (k, mut node) in old_nodes.into_iter().enumerate() {
        for c in node.connections.iter_mut() {
            *c = map(*c);
        }
        slots[new_position[k] - s] = Some(node);
    }
    let nodes = slots
        .into_iter()
        .map(|n| n.expect("new positions form a permutation"))
        .collect();
    let outputs = old_outputs.into_iter().map(map).collect();
    Genotype::from_parts_unchecked(params, nodes, outputs)
}

/// Resamples every forward-pointing connection gene of node at position `p`
/// uniformly from `[0, p)`. Returns the number of genes repaired.
///
/// Forward genes that an active node actually consumes mean the reorder broke
/// the phenotype; that is reported as an invariant error and nothing is
/// changed.
pub fn repair_forward_connections<R: Rng + ?Sized>(
    genome: &mut Genotype,
    rng: &mut R,
) -> Result<usize, InvariantError> {
    let params = *genome.params();
    let active = genome.decode_active();
    for (k, node) in genome.nodes().iter().enumerate() {
        if !active.is_active(k) {
            continue;
        }
        let position = params.position_of(k);
        let used = params.function_set.arity(node.function);
        if let Some(&target) = node.connections[..used].iter().find(|&&c| c >= position) {
            return Err(InvariantError::ActiveForwardConnection { position, target });
        }
    }
    let mut repaired = 0;
    for (k, node) in genome.nodes_mut().iter_mut().enumerate() {
        let position = params.position_of(k);
        for c in node.connections.iter_mut() {
            if *c >= position {
                *c = rng.random_range(0..position);
                repaired += 1;
            }
        }
    }
    Ok(repaired)
}

fn place_and_repair<R: Rng + ?Sized>(
    genome: &Genotype,
    active: &[bool],
    sets: &PlacementSets,
    rng: &mut R,
) -> Result<Genotype, InvariantError> {
    let mut out = place(genome, active, sets);
    repair_forward_connections(&mut out, rng)?;
    Ok(out)
}

/// Random topological re-sort of all computational nodes.
///
/// A node becomes addable once every computational node its connection genes
/// reference has been placed; each step places a uniformly chosen addable
/// node at the next free position.
pub fn reorder_original<R: Rng + ?Sized>(genome: &Genotype, rng: &mut R) -> Genotype {
    let params = *genome.params();
    let s = params.first_computational();
    let n = params.num_computational;

    // dependents in CSR form; an edge per connection gene, duplicates included
    let mut pending = vec![0usize; n];
    let mut degree = vec![0usize; n + 1];
    for (k, node) in genome.nodes().iter().enumerate() {
        for &c in &node.connections {
            if c >= s {
                pending[k] += 1;
                degree[c - s + 1] += 1;
            }
        }
    }
    for i in 1..=n {
        degree[i] += degree[i - 1];
    }
    let offsets = degree;
    let mut fill = offsets.clone();
    let mut dependents = vec![0usize; offsets[n]];
    for (k, node) in genome.nodes().iter().enumerate() {
        for &c in &node.connections {
            if c >= s {
                dependents[fill[c - s]] = k;
                fill[c - s] += 1;
            }
        }
    }

    let mut addable: Vec<usize> = (0..n).filter(|&k| pending[k] == 0).collect();
    let mut new_position = vec![0usize; n];
    let mut placed = 0;
    while !addable.is_empty() {
        let pick = rng.random_range(0..addable.len());
        let k = addable.swap_remove(pick);
        new_position[k] = s + placed;
        placed += 1;
        for &dep in &dependents[offsets[k]..offsets[k + 1]] {
            pending[dep] -= 1;
            if pending[dep] == 0 {
                addable.push(dep);
            }
        }
    }
    assert_eq!(placed, n, "feed-forward genome must admit a topological order");
    relocate(genome, &new_position)
}

/// Active nodes spread over [`lin_space`] positions.
pub fn reorder_equidistant<R: Rng + ?Sized>(
    genome: &Genotype,
    rng: &mut R,
) -> Result<Genotype, InvariantError> {
    let active = genome.decode_active();
    let params = genome.params();
    let positions = match active.count() {
        0 => Vec::new(),
        n => lin_space(params.first_computational(), params.last_computational(), n),
    };
    let sets = PlacementSets::from_active(params, positions);
    place_and_repair(genome, active.bitmap(), &sets, rng)
}

/// Active positions drawn from a continuous uniform distribution.
pub fn reorder_uniform<R: Rng + ?Sized>(
    genome: &Genotype,
    rng: &mut R,
) -> Result<Genotype, InvariantError> {
    let active = genome.decode_active();
    let params = genome.params();
    let n = active.count();
    let samples: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let positions = slots_from_unit_samples(
        samples,
        params.first_computational(),
        params.last_computational(),
        n,
    );
    let sets = PlacementSets::from_active(params, positions);
    place_and_repair(genome, active.bitmap(), &sets, rng)
}

/// Active nodes packed into the last `n` positions.
pub fn reorder_negbias<R: Rng + ?Sized>(
    genome: &Genotype,
    rng: &mut R,
) -> Result<Genotype, InvariantError> {
    let active = genome.decode_active();
    let params = genome.params();
    let e = params.last_computational();
    let positions = (e + 1 - active.count()..=e).collect();
    let sets = PlacementSets::from_active(params, positions);
    place_and_repair(genome, active.bitmap(), &sets, rng)
}

/// Active positions drawn from Beta(6, 1), skewed toward the outputs.
pub fn reorder_leftskew<R: Rng + ?Sized>(
    genome: &Genotype,
    rng: &mut R,
) -> Result<Genotype, InvariantError> {
    let active = genome.decode_active();
    let params = genome.params();
    let n = active.count();
    let samples: Vec<f64> = (0..n).map(|_| sample_beta61(rng)).collect();
    let positions = slots_from_unit_samples(
        samples,
        params.first_computational(),
        params.last_computational(),
        n,
    );
    let sets = PlacementSets::from_active(params, positions);
    place_and_repair(genome, active.bitmap(), &sets, rng)
}

/// Unconditionally applies the operator for `kind`; `None` is the identity.
pub fn reorder<R: Rng + ?Sized>(
    kind: ReorderKind,
    genome: &Genotype,
    rng: &mut R,
) -> Result<Genotype, InvariantError> {
    match kind {
        ReorderKind::None => Ok(genome.clone()),
        ReorderKind::Original => Ok(reorder_original(genome, rng)),
        ReorderKind::Equidistant => reorder_equidistant(genome, rng),
        ReorderKind::Uniform => reorder_uniform(genome, rng),
        ReorderKind::NegBias => reorder_negbias(genome, rng),
        ReorderKind::LeftSkew => reorder_leftskew(genome, rng),
    }
}

/// Applies the strategy with probability `p_reorder`. Returns `None` when the
/// genome is left untouched.
pub fn gated_reorder<R: Rng + ?Sized>(
    genome: &Genotype,
    strategy: &ReorderStrategy,
    rng: &mut R,
) -> Result<Option<Genotype>, InvariantError> {
    if strategy.kind == ReorderKind::None {
        return Ok(None);
    }
    if rng.random::<f64>() < strategy.p_reorder {
        reorder(strategy.kind, genome, rng).map(Some)
    } else {
        Ok(None)
    }
}

pub fn maybe_reorder<R: Rng + ?Sized>(
    genome: &Genotype,
    strategy: &ReorderStrategy,
    rng: &mut R,
) -> Result<Genotype, InvariantError> {
    Ok(gated_reorder(genome, strategy, rng)?.unwrap_or_else(|| genome.clone()))
}
