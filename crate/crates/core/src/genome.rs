//! Single-row CGP genotype: encoding, validation, active-node decoding and
//! evaluation.
//!
//! Nodes use one global numbering. Positions `[0, num_inputs)` are program
//! inputs, the next `num_computational` positions are computational nodes and
//! the remaining `num_outputs` positions are output nodes. Every connection
//! gene points to a strictly smaller position.

use std::fmt::{self, Write as _};

use rand::Rng;
use smallvec::SmallVec;
use thiserror::Error;

use crate::error::ConfigError;
use crate::functions::{FunctionSet, Value};

/// Shape of a CGP graph with a single row of `num_computational` columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GraphParams {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub num_computational: usize,
    /// Connection genes per computational node.
    pub arity: usize,
    pub function_set: FunctionSet,
}

impl GraphParams {
    /// Parameters with the arity fixed to the function set's maximum.
    pub fn new(
        num_inputs: usize,
        num_outputs: usize,
        num_computational: usize,
        function_set: FunctionSet,
    ) -> Result<Self, ConfigError> {
        Self::with_arity(
            num_inputs,
            num_outputs,
            num_computational,
            function_set.max_arity(),
            function_set,
        )
    }

    pub fn with_arity(
        num_inputs: usize,
        num_outputs: usize,
        num_computational: usize,
        arity: usize,
        function_set: FunctionSet,
    ) -> Result<Self, ConfigError> {
        let params = GraphParams {
            num_inputs,
            num_outputs,
            num_computational,
            arity,
            function_set,
        };
        params.check()?;
        Ok(params)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::InvalidParams(msg));
        if self.num_inputs == 0 {
            return bad("num_inputs must be at least 1".into());
        }
        if self.num_outputs == 0 {
            return bad("num_outputs must be at least 1".into());
        }
        if self.num_computational == 0 {
            return bad("num_computational must be at least 1".into());
        }
        if self.arity < self.function_set.max_arity() {
            return bad(format!(
                "arity {} is below the {} set's maximum arity {}",
                self.arity,
                self.function_set,
                self.function_set.max_arity()
            ));
        }
        Ok(())
    }

    /// Global position of the first computational node (`s`).
    pub fn first_computational(&self) -> usize {
        self.num_inputs
    }

    /// Global position of the last computational node (`e`).
    pub fn last_computational(&self) -> usize {
        self.num_inputs + self.num_computational - 1
    }

    /// Number of positions an output may connect to.
    pub fn num_sources(&self) -> usize {
        self.num_inputs + self.num_computational
    }

    pub fn output_position(&self, output: usize) -> usize {
        self.num_sources() + output
    }

    /// Global position of computational node `index`.
    pub fn position_of(&self, index: usize) -> usize {
        self.num_inputs + index
    }
}

/// One computational node: a function gene plus `arity` connection genes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeGene {
    pub function: usize,
    pub connections: SmallVec<[usize; 2]>,
}

impl NodeGene {
    pub fn new(function: usize, connections: &[usize]) -> Self {
        NodeGene {
            function,
            connections: SmallVec::from_slice(connections),
        }
    }
}

/// A single-row CGP genotype.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Genotype {
    params: GraphParams,
    nodes: Vec<NodeGene>,
    outputs: Vec<usize>,
}

/// Which computational nodes lie on a path to an output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveSet {
    active: Vec<bool>,
    count: usize,
}

impl ActiveSet {
    /// Whether computational node `index` (0-based among computational nodes) is active.
    #[inline]
    pub fn is_active(&self, index: usize) -> bool {
        self.active[index]
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn bitmap(&self) -> &[bool] {
        &self.active
    }

    /// Computational indices of active nodes, ascending.
    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().enumerate().filter_map(|(i, &a)| a.then_some(i))
    }
}

/// One broken genotype invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Global position of the offending node.
    pub position: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    NodeCount { expected: usize, found: usize },
    OutputCount { expected: usize, found: usize },
    ConnectionCount { expected: usize, found: usize },
    FunctionOutOfRange { function: usize },
    ForwardConnection { gene: usize, target: usize },
    OutputTargetsOutput { target: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::NodeCount { expected, found } => {
                write!(f, "expected {expected} computational nodes, found {found}")
            }
            ViolationKind::OutputCount { expected, found } => {
                write!(f, "expected {expected} outputs, found {found}")
            }
            ViolationKind::ConnectionCount { expected, found } => write!(
                f,
                "node {}: expected {expected} connection genes, found {found}",
                self.position
            ),
            ViolationKind::FunctionOutOfRange { function } => {
                write!(f, "node {}: function gene {function} out of range", self.position)
            }
            ViolationKind::ForwardConnection { gene, target } => write!(
                f,
                "node {}: connection gene {gene} points forward to {target}",
                self.position
            ),
            ViolationKind::OutputTargetsOutput { target } => write!(
                f,
                "output {}: connects to non-source position {target}",
                self.position
            ),
        }
    }
}

impl Genotype {
    /// Builds a genotype and rejects it if any invariant is broken.
    pub fn new(
        params: GraphParams,
        nodes: Vec<NodeGene>,
        outputs: Vec<usize>,
    ) -> Result<Self, Vec<Violation>> {
        let genome = Self::from_parts_unchecked(params, nodes, outputs);
        let report = genome.validate();
        if report.is_empty() {
            Ok(genome)
        } else {
            Err(report)
        }
    }

    /// Builds a genotype without checking invariants. Use [`Genotype::validate`]
    /// before evaluating such a genome.
    pub fn from_parts_unchecked(
        params: GraphParams,
        nodes: Vec<NodeGene>,
        outputs: Vec<usize>,
    ) -> Self {
        Genotype {
            params,
            nodes,
            outputs,
        }
    }

    /// Draws every gene uniformly from its legal domain.
    pub fn random<R: Rng + ?Sized>(params: GraphParams, rng: &mut R) -> Self {
        let functions = params.function_set.len();
        let nodes = (0..params.num_computational)
            .map(|k| {
                let position = params.position_of(k);
                NodeGene {
                    function: rng.random_range(0..functions),
                    connections: (0..params.arity)
                        .map(|_| rng.random_range(0..position))
                        .collect(),
                }
            })
            .collect();
        let outputs = (0..params.num_outputs)
            .map(|_| rng.random_range(0..params.num_sources()))
            .collect();
        Genotype {
            params,
            nodes,
            outputs,
        }
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [NodeGene] {
        &mut self.nodes
    }

    pub(crate) fn outputs_mut(&mut self) -> &mut [usize] {
        &mut self.outputs
    }

    pub(crate) fn into_parts(self) -> (GraphParams, Vec<NodeGene>, Vec<usize>) {
        (self.params, self.nodes, self.outputs)
    }

    /// Lists every broken invariant; empty iff the genome is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let p = &self.params;
        let mut report = Vec::new();
        if self.nodes.len() != p.num_computational {
            report.push(Violation {
                position: p.first_computational(),
                kind: ViolationKind::NodeCount {
                    expected: p.num_computational,
                    found: self.nodes.len(),
                },
            });
        }
        if self.outputs.len() != p.num_outputs {
            report.push(Violation {
                position: p.num_sources(),
                kind: ViolationKind::OutputCount {
                    expected: p.num_outputs,
                    found: self.outputs.len(),
                },
            });
        }
        for (k, node) in self.nodes.iter().enumerate() {
            let position = p.position_of(k);
            if node.function >= p.function_set.len() {
                report.push(Violation {
                    position,
                    kind: ViolationKind::FunctionOutOfRange {
                        function: node.function,
                    },
                });
            }
            if node.connections.len() != p.arity {
                report.push(Violation {
                    position,
                    kind: ViolationKind::ConnectionCount {
                        expected: p.arity,
                        found: node.connections.len(),
                    },
                });
            }
            for (gene, &target) in node.connections.iter().enumerate() {
                if target >= position {
                    report.push(Violation {
                        position,
                        kind: ViolationKind::ForwardConnection { gene, target },
                    });
                }
            }
        }
        let sources = self.nodes.len() + p.num_inputs;
        for (i, &target) in self.outputs.iter().enumerate() {
            if target >= sources {
                report.push(Violation {
                    position: p.output_position(i),
                    kind: ViolationKind::OutputTargetsOutput { target },
                });
            }
        }
        report
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Marks the computational nodes reachable backwards from the outputs.
    ///
    /// Only the connection genes a node's function actually consumes are
    /// followed.
    pub fn decode_active(&self) -> ActiveSet {
        let p = &self.params;
        let mut active = vec![false; self.nodes.len()];
        for &target in &self.outputs {
            if target >= p.num_inputs {
                active[target - p.num_inputs] = true;
            }
        }
        let mut count = 0;
        for k in (0..self.nodes.len()).rev() {
            if !active[k] {
                continue;
            }
            count += 1;
            let node = &self.nodes[k];
            let used = p.function_set.arity(node.function);
            for &target in &node.connections[..used] {
                if target >= p.num_inputs {
                    active[target - p.num_inputs] = true;
                }
            }
        }
        ActiveSet { active, count }
    }

    /// Evaluates the program on one input vector, computing active nodes only.
    pub fn evaluate<V: Value>(&self, inputs: &[V]) -> Vec<V> {
        let active = self.decode_active();
        let mut scratch = Vec::new();
        let mut out = vec![inputs[0]; self.outputs.len()];
        self.evaluate_with(&active, inputs, &mut scratch, &mut out);
        out
    }

    /// Evaluates the program computing every node, active or not.
    pub fn evaluate_all<V: Value>(&self, inputs: &[V]) -> Vec<V> {
        self.check_domain::<V>(inputs);
        let p = &self.params;
        let mut values: Vec<V> = Vec::with_capacity(p.num_sources());
        values.extend_from_slice(inputs);
        let mut args: SmallVec<[V; 2]> = SmallVec::new();
        for node in &self.nodes {
            let used = p.function_set.arity(node.function);
            args.clear();
            args.extend(node.connections[..used].iter().map(|&c| values[c]));
            values.push(V::apply(node.function, &args));
        }
        self.outputs.iter().map(|&o| values[o]).collect()
    }

    /// Allocation-free evaluation given a precomputed active set.
    ///
    /// `scratch` is resized as needed and may be reused across calls; `out`
    /// must hold `num_outputs` values.
    pub fn evaluate_with<V: Value>(
        &self,
        active: &ActiveSet,
        inputs: &[V],
        scratch: &mut Vec<V>,
        out: &mut [V],
    ) {
        self.check_domain::<V>(inputs);
        let p = &self.params;
        scratch.clear();
        scratch.extend_from_slice(inputs);
        scratch.resize(p.num_sources(), inputs[0]);
        let mut args: SmallVec<[V; 2]> = SmallVec::new();
        for (k, node) in self.nodes.iter().enumerate() {
            if !active.is_active(k) {
                continue;
            }
            let used = p.function_set.arity(node.function);
            args.clear();
            args.extend(node.connections[..used].iter().map(|&c| scratch[c]));
            scratch[p.num_inputs + k] = V::apply(node.function, &args);
        }
        for (slot, &o) in out.iter_mut().zip(&self.outputs) {
            *slot = scratch[o];
        }
    }

    fn check_domain<V: Value>(&self, inputs: &[V]) {
        assert_eq!(
            V::SET,
            self.params.function_set,
            "value domain does not match the genome's function set"
        );
        assert_eq!(inputs.len(), self.params.num_inputs, "wrong number of inputs");
    }

    /// Row-wise Boolean evaluation on explicit bits.
    pub fn evaluate_bits(&self, inputs: &[bool]) -> Vec<bool> {
        let words: Vec<u64> = inputs.iter().map(|&b| b as u64).collect();
        self.evaluate(&words).into_iter().map(|w| w & 1 == 1).collect()
    }

    /// Serializes to the flat text form: one `pos function conn...` line per
    /// computational node, then one `out_i conn` line per output.
    pub fn to_flat(&self) -> String {
        let mut text = String::new();
        for (k, node) in self.nodes.iter().enumerate() {
            write!(text, "{} {}", self.params.position_of(k), node.function).unwrap();
            for c in &node.connections {
                write!(text, " {c}").unwrap();
            }
            text.push('\n');
        }
        for (i, o) in self.outputs.iter().enumerate() {
            writeln!(text, "out_{i} {o}").unwrap();
        }
        text
    }

    /// Parses the flat text form. Blank lines and lines starting with `#` are
    /// skipped. The result is validated.
    pub fn from_flat(params: GraphParams, text: &str) -> Result<Self, FlatParseError> {
        let mut nodes = Vec::with_capacity(params.num_computational);
        let mut outputs = Vec::with_capacity(params.num_outputs);
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| FlatParseError {
                line: line_no,
                message,
            };
            let mut fields = line.split_whitespace();
            let head = fields.next().unwrap_or_default();
            let numbers: Vec<usize> = fields
                .map(|f| f.parse().map_err(|_| err(format!("`{f}` is not an index"))))
                .collect::<Result<_, _>>()?;
            if let Some(i) = head.strip_prefix("out_") {
                let i: usize = i.parse().map_err(|_| err(format!("bad output label `{head}`")))?;
                if i != outputs.len() || numbers.len() != 1 {
                    return Err(err(format!("expected `out_{} <conn>`", outputs.len())));
                }
                outputs.push(numbers[0]);
            } else {
                let pos: usize = head.parse().map_err(|_| err(format!("bad position `{head}`")))?;
                if pos != params.position_of(nodes.len()) || !outputs.is_empty() {
                    return Err(err(format!(
                        "expected node at position {}",
                        params.position_of(nodes.len())
                    )));
                }
                if numbers.is_empty() {
                    return Err(err("missing function gene".into()));
                }
                nodes.push(NodeGene::new(numbers[0], &numbers[1..]));
            }
        }
        Genotype::new(params, nodes, outputs).map_err(|report| FlatParseError {
            line: 0,
            message: report
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct FlatParseError {
    /// 1-based line number; 0 when the error concerns the whole genome.
    pub line: usize,
    pub message: String,
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::functions::FunctionSet::{Boolean, Regression};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two inputs; n2 = DIV(n0, n1) inactive, n3 = SUB(n0, n1), n4 = ADD(n3, n3), output n4.
    pub(crate) fn figure_one() -> Genotype {
        let params = GraphParams::new(2, 1, 3, Regression).unwrap();
        Genotype::new(
            params,
            vec![
                NodeGene::new(3, &[0, 1]),
                NodeGene::new(1, &[0, 1]),
                NodeGene::new(0, &[3, 3]),
            ],
            vec![4],
        )
        .unwrap()
    }

    #[test]
    fn figure_one_decodes_and_evaluates() {
        let g = figure_one();
        let active = g.decode_active();
        assert_eq!(active.bitmap(), &[false, true, true]);
        assert_eq!(active.count(), 2);
        assert_eq!(g.evaluate(&[5.0, 3.0]), vec![4.0]);
        for x in [-3.5, 0.0, 1e10, 7.25] {
            assert_eq!(g.evaluate(&[x, x]), vec![0.0]);
        }
    }

    #[test]
    fn random_genome_small_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let params = GraphParams::new(2, 1, 3, Boolean).unwrap();
            let g = Genotype::random(params, &mut rng);
            assert_eq!(g.nodes().len(), 3);
            assert!(g.nodes()[0].connections.iter().all(|&c| c < 2));
            assert!(g.is_valid());

            let params = GraphParams::new(1, 1, 1, Boolean).unwrap();
            let g = Genotype::random(params, &mut rng);
            assert_eq!(g.nodes()[0].connections.as_slice(), &[0, 0]);
            assert!(g.outputs()[0] <= 1);
        }
    }

    #[test]
    fn random_genome_is_deterministic() {
        let params = GraphParams::new(2, 1, 3, Boolean).unwrap();
        let a = Genotype::random(params, &mut ChaCha8Rng::seed_from_u64(42));
        let b = Genotype::random(params, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn output_on_input_has_no_active_nodes() {
        let params = GraphParams::new(2, 1, 3, Boolean).unwrap();
        let mut g = Genotype::random(params, &mut ChaCha8Rng::seed_from_u64(3));
        g.outputs_mut()[0] = 1;
        assert_eq!(g.decode_active().count(), 0);
        assert_eq!(g.evaluate_bits(&[false, true]), vec![true]);
    }

    #[test]
    fn chain_is_fully_active() {
        let params = GraphParams::new(1, 1, 6, Boolean).unwrap();
        let nodes = (0..6).map(|k| NodeGene::new(0, &[k, k])).collect();
        let g = Genotype::new(params, nodes, vec![6]).unwrap();
        assert_eq!(g.decode_active().count(), 6);
    }

    #[test]
    fn unary_excess_gene_does_not_activate() {
        let params = GraphParams::new(1, 1, 2, Regression).unwrap();
        // node 2 = SIN(x0), second gene points at node 1 which must stay inactive
        let g = Genotype::new(
            params,
            vec![NodeGene::new(0, &[0, 0]), NodeGene::new(4, &[0, 1])],
            vec![2],
        )
        .unwrap();
        assert_eq!(g.decode_active().bitmap(), &[false, true]);
    }

    #[test]
    fn parity_circuit_matches_truth_table() {
        // XOR(a,b) = AND(OR(a,b), NAND(a,b)); parity = XOR(XOR(a,b), c)
        let params = GraphParams::new(3, 1, 6, Boolean).unwrap();
        let g = Genotype::new(
            params,
            vec![
                NodeGene::new(1, &[0, 1]),
                NodeGene::new(2, &[0, 1]),
                NodeGene::new(0, &[3, 4]),
                NodeGene::new(1, &[5, 2]),
                NodeGene::new(2, &[5, 2]),
                NodeGene::new(0, &[6, 7]),
            ],
            vec![8],
        )
        .unwrap();
        for row in 0..8u32 {
            let bits: Vec<bool> = (0..3).map(|i| row >> i & 1 == 1).collect();
            let want = bits.iter().filter(|&&b| b).count() % 2 == 1;
            assert_eq!(g.evaluate_bits(&bits), vec![want], "row {row}");
        }
        assert_eq!(g.evaluate_bits(&[true, true, false]), vec![false]);
    }

    #[test]
    fn validate_reports_positions() {
        let params = GraphParams::new(2, 1, 6, Boolean).unwrap();
        let mut g = Genotype::random(params, &mut ChaCha8Rng::seed_from_u64(9));
        assert!(g.validate().is_empty());
        g.nodes_mut()[3].connections[1] = 7;
        let report = g.validate();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].position, 5);
        assert!(matches!(
            report[0].kind,
            ViolationKind::ForwardConnection { gene: 1, target: 7 }
        ));

        let mut g = Genotype::random(params, &mut ChaCha8Rng::seed_from_u64(9));
        g.outputs_mut()[0] = 8;
        let report = g.validate();
        assert_eq!(report.len(), 1);
        assert!(matches!(report[0].kind, ViolationKind::OutputTargetsOutput { target: 8 }));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GraphParams::new(0, 1, 1, Boolean).is_err());
        assert!(GraphParams::new(1, 0, 1, Boolean).is_err());
        assert!(GraphParams::new(1, 1, 0, Boolean).is_err());
        assert!(GraphParams::with_arity(1, 1, 1, 1, Boolean).is_err());
    }

    #[test]
    fn flat_form_parses_back() {
        let g = figure_one();
        let text = g.to_flat();
        assert_eq!(text, "2 3 0 1\n3 1 0 1\n4 0 3 3\nout_0 4\n");
        assert_eq!(Genotype::from_flat(*g.params(), &text).unwrap(), g);
        let bad = "2 3 0 1\n3 1 0 9\n4 0 3 3\nout_0 4\n";
        assert!(Genotype::from_flat(*g.params(), bad).is_err());
        let err = Genotype::from_flat(*g.params(), "2 3 0 1\nx 1\n").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn thousand_random_genomes_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for params in [
            GraphParams::new(3, 1, 50, Boolean).unwrap(),
            GraphParams::new(16, 4, 20, Boolean).unwrap(),
            GraphParams::new(2, 1, 30, Regression).unwrap(),
        ] {
            for _ in 0..1000 {
                assert!(Genotype::random(params, &mut rng).validate().is_empty());
            }
        }
    }

    proptest! {
        #[test]
        fn active_only_equals_full_pass_boolean(seed: u64, a: u64, b: u64, c: u64, n in 1usize..60) {
            let params = GraphParams::new(3, 2, n, Boolean).unwrap();
            let g = Genotype::random(params, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(g.evaluate(&[a, b, c]), g.evaluate_all(&[a, b, c]));
        }

        #[test]
        fn active_only_equals_full_pass_regression(seed: u64, x in -10.0f64..10.0, y in -10.0f64..10.0, n in 1usize..60) {
            let params = GraphParams::new(2, 1, n, Regression).unwrap();
            let g = Genotype::random(params, &mut ChaCha8Rng::seed_from_u64(seed));
            let fast = g.evaluate(&[x, y]);
            let full = g.evaluate_all(&[x, y]);
            prop_assert_eq!(fast[0].to_bits(), full[0].to_bits());
            prop_assert_eq!(g.evaluate(&[x, y])[0].to_bits(), fast[0].to_bits());
        }

        #[test]
        fn decode_is_pure(seed: u64, n in 1usize..80) {
            let params = GraphParams::new(2, 2, n, Regression).unwrap();
            let g = Genotype::random(params, &mut ChaCha8Rng::seed_from_u64(seed));
            let a = g.decode_active();
            prop_assert_eq!(a.count(), a.bitmap().iter().filter(|&&b| b).count());
            prop_assert_eq!(a, g.decode_active());
        }

        #[test]
        fn flat_roundtrip(seed: u64, n in 1usize..40) {
            let params = GraphParams::new(4, 3, n, Boolean).unwrap();
            let g = Genotype::random(params, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(Genotype::from_flat(params, &g.to_flat()).unwrap(), g);
        }
    }
}
