//! Direct-encoded recurrent network genome: innovation-numbered node, edge
//! and recurrent-edge genes, structural queries, and validity checks.
//!
//! Genomes are immutable values once built; variation operators produce new
//! genomes. Innovation numbers come from a shared [`InnovationCounter`] and
//! are never reused within a search, so a gene's innovation number pins its
//! structure (endpoints and time skip) for crossover alignment.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kinds of node a genome may contain.
///
/// `Input` and `Output` exist only in the seed topology; mutation-driven type
/// selection draws from the six hidden kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeType {
    SimpleNeuron,
    Delta,
    Gru,
    Lstm,
    Mgu,
    Ugrnn,
    Input,
    Output,
}

/// The node kinds selectable by mutation.
pub const HIDDEN_NODE_TYPES: [NodeType; 6] = [
    NodeType::SimpleNeuron,
    NodeType::Delta,
    NodeType::Gru,
    NodeType::Lstm,
    NodeType::Mgu,
    NodeType::Ugrnn,
];

impl NodeType {
    /// Length of the trainable parameter block carried by a node of this type.
    /// Gate weights and biases for the memory cells; a single bias for simple
    /// neurons and outputs; nothing for inputs.
    pub fn param_len(self) -> usize {
        match self {
            NodeType::Input => 0,
            NodeType::Output | NodeType::SimpleNeuron => 1,
            NodeType::Delta | NodeType::Mgu | NodeType::Ugrnn => 6,
            NodeType::Gru => 9,
            NodeType::Lstm => 12,
        }
    }

    pub fn is_hidden(self) -> bool {
        !matches!(self, NodeType::Input | NodeType::Output)
    }

    /// Short tag used by text dumps and the binary format.
    pub fn tag(self) -> u8 {
        match self {
            NodeType::SimpleNeuron => 0,
            NodeType::Delta => 1,
            NodeType::Gru => 2,
            NodeType::Lstm => 3,
            NodeType::Mgu => 4,
            NodeType::Ugrnn => 5,
            NodeType::Input => 6,
            NodeType::Output => 7,
        }
    }

    pub fn from_tag(tag: u8) -> Option<NodeType> {
        Some(match tag {
            0 => NodeType::SimpleNeuron,
            1 => NodeType::Delta,
            2 => NodeType::Gru,
            3 => NodeType::Lstm,
            4 => NodeType::Mgu,
            5 => NodeType::Ugrnn,
            6 => NodeType::Input,
            7 => NodeType::Output,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeType::SimpleNeuron => "simple",
            NodeType::Delta => "delta",
            NodeType::Gru => "gru",
            NodeType::Lstm => "lstm",
            NodeType::Mgu => "mgu",
            NodeType::Ugrnn => "ugrnn",
            NodeType::Input => "input",
            NodeType::Output => "output",
        }
    }
}

/// A node gene. `depth` is a feed-forward ordering coordinate in [0, 1]:
/// inputs sit at 0, outputs at 1, hidden nodes strictly between. Feed-forward
/// edges only ever point from lower to higher depth, which rules out cycles
/// without any global re-sorting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGene {
    pub innovation: u64,
    pub node_type: NodeType,
    pub depth: f64,
    pub enabled: bool,
    /// Trainable parameters; length is `node_type.param_len()`. For simple
    /// neurons and outputs this is `[bias]`; memory cells store their gate
    /// weights and biases here (layout in `rnn::cell`).
    pub params: Vec<f64>,
}

impl NodeGene {
    pub fn new(innovation: u64, node_type: NodeType, depth: f64) -> Self {
        NodeGene {
            innovation,
            node_type,
            depth,
            enabled: true,
            params: vec![0.0; node_type.param_len()],
        }
    }
}

/// A feed-forward edge gene. Invariant: depth(source) < depth(target).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeGene {
    pub innovation: u64,
    pub source: u64,
    pub target: u64,
    pub weight: f64,
    pub enabled: bool,
}

/// A recurrent edge gene reading the source node's output `time_skip` steps
/// in the past. No depth constraint; self-loops are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentEdgeGene {
    pub innovation: u64,
    pub source: u64,
    pub target: u64,
    pub time_skip: u32,
    pub weight: f64,
    pub enabled: bool,
}

/// Enabled-gene counts, as reported in traces and dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneCounts {
    pub nodes: usize,
    pub edges: usize,
    pub rec_edges: usize,
}

/// A complete genome. Gene vectors are kept sorted by innovation number.
/// Disabled genes are retained forever so innovation history stays intact
/// for crossover alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub nodes: Vec<NodeGene>,
    pub edges: Vec<EdgeGene>,
    pub rec_edges: Vec<RecurrentEdgeGene>,
    /// Validation MSE after training; present iff the genome was trained.
    pub fitness: Option<f64>,
    pub generation_id: u64,
    pub island_of_origin: u32,
}

/// Monotone source of innovation numbers, shared across all islands of one
/// search. Never reset, never reused.
#[derive(Debug, Default)]
pub struct InnovationCounter {
    next_node: AtomicU64,
    next_edge: AtomicU64,
}

impl InnovationCounter {
    pub fn new() -> Self {
        InnovationCounter {
            next_node: AtomicU64::new(1),
            next_edge: AtomicU64::new(1),
        }
    }

    pub fn next_node(&self) -> u64 {
        self.next_node.fetch_add(1, Ordering::Relaxed)
    }

    pub fn next_edge(&self) -> u64 {
        self.next_edge.fetch_add(1, Ordering::Relaxed)
    }
}

/// Build the minimal seed genome: `n_inputs` input nodes, `n_outputs` output
/// nodes, one enabled feed-forward edge per (input, output) pair, no hidden
/// nodes, no recurrent edges. All weights are zero until a weight strategy
/// initializes them.
pub fn seed_genome(n_inputs: usize, n_outputs: usize, counter: &InnovationCounter) -> Result<Genome> {
    if n_inputs == 0 || n_outputs == 0 {
        return Err(Error::InvalidDimension(format!(
            "seed genome needs at least one input and one output, got {n_inputs} inputs, {n_outputs} outputs"
        )));
    }
    let mut nodes = Vec::with_capacity(n_inputs + n_outputs);
    let inputs: Vec<u64> = (0..n_inputs).map(|_| counter.next_node()).collect();
    let outputs: Vec<u64> = (0..n_outputs).map(|_| counter.next_node()).collect();
    for &inn in &inputs {
        nodes.push(NodeGene::new(inn, NodeType::Input, 0.0));
    }
    for &inn in &outputs {
        nodes.push(NodeGene::new(inn, NodeType::Output, 1.0));
    }
    let mut edges = Vec::with_capacity(n_inputs * n_outputs);
    for &src in &inputs {
        for &dst in &outputs {
            edges.push(EdgeGene {
                innovation: counter.next_edge(),
                source: src,
                target: dst,
                weight: 0.0,
                enabled: true,
            });
        }
    }
    Ok(Genome {
        nodes,
        edges,
        rec_edges: Vec::new(),
        fitness: None,
        generation_id: 0,
        island_of_origin: 0,
    })
}

impl Genome {
    pub fn node(&self, innovation: u64) -> Option<&NodeGene> {
        self.nodes
            .binary_search_by_key(&innovation, |n| n.innovation)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn node_mut(&mut self, innovation: u64) -> Option<&mut NodeGene> {
        self.nodes
            .binary_search_by_key(&innovation, |n| n.innovation)
            .ok()
            .map(move |i| &mut self.nodes[i])
    }

    pub fn input_nodes(&self) -> impl Iterator<Item = &NodeGene> {
        self.nodes.iter().filter(|n| n.node_type == NodeType::Input)
    }

    pub fn output_nodes(&self) -> impl Iterator<Item = &NodeGene> {
        self.nodes.iter().filter(|n| n.node_type == NodeType::Output)
    }

    pub fn n_inputs(&self) -> usize {
        self.input_nodes().count()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_nodes().count()
    }

    /// Counts of enabled genes.
    pub fn counts(&self) -> GeneCounts {
        GeneCounts {
            nodes: self.nodes.iter().filter(|n| n.enabled).count(),
            edges: self.edges.iter().filter(|e| e.enabled).count(),
            rec_edges: self.rec_edges.iter().filter(|e| e.enabled).count(),
        }
    }

    /// Enabled in/out connection counts (feed-forward plus recurrent) of a
    /// node, the fan numbers used by the weight samplers. Only connections
    /// whose far endpoint is also enabled count.
    pub fn fan_counts(&self, node: u64) -> (usize, usize) {
        let enabled = |inn: u64| self.node(inn).map(|n| n.enabled).unwrap_or(false);
        let mut fan_in = 0;
        let mut fan_out = 0;
        for e in &self.edges {
            if !e.enabled {
                continue;
            }
            if e.target == node && enabled(e.source) {
                fan_in += 1;
            }
            if e.source == node && enabled(e.target) {
                fan_out += 1;
            }
        }
        for e in &self.rec_edges {
            if !e.enabled {
                continue;
            }
            if e.target == node && enabled(e.source) {
                fan_in += 1;
            }
            if e.source == node && enabled(e.target) {
                fan_out += 1;
            }
        }
        (fan_in, fan_out)
    }

    /// Iterate over every trainable parameter: edge weights, recurrent edge
    /// weights, and node parameter blocks, disabled genes included.
    pub fn all_parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges
            .iter()
            .map(|e| e.weight)
            .chain(self.rec_edges.iter().map(|e| e.weight))
            .chain(self.nodes.iter().flat_map(|n| n.params.iter().copied()))
    }

    /// Restore the sorted-by-innovation ordering after a union/merge.
    pub(crate) fn sort_genes(&mut self) {
        self.nodes.sort_by_key(|n| n.innovation);
        self.edges.sort_by_key(|e| e.innovation);
        self.rec_edges.sort_by_key(|e| e.innovation);
    }

    /// Check every structural invariant; returns a description of the first
    /// violation. Used by tests and the variation fuzzer.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut node_inns = std::collections::HashSet::new();
        for n in &self.nodes {
            if !node_inns.insert(n.innovation) {
                return Err(format!("duplicate node innovation {}", n.innovation));
            }
            match n.node_type {
                NodeType::Input => {
                    if n.depth != 0.0 {
                        return Err(format!("input node {} depth {} != 0", n.innovation, n.depth));
                    }
                    if !n.enabled {
                        return Err(format!("input node {} disabled", n.innovation));
                    }
                }
                NodeType::Output => {
                    if n.depth != 1.0 {
                        return Err(format!("output node {} depth {} != 1", n.innovation, n.depth));
                    }
                    if !n.enabled {
                        return Err(format!("output node {} disabled", n.innovation));
                    }
                }
                _ => {
                    if !(n.depth > 0.0 && n.depth < 1.0) {
                        return Err(format!(
                            "hidden node {} depth {} outside (0,1)",
                            n.innovation, n.depth
                        ));
                    }
                }
            }
            if n.params.len() != n.node_type.param_len() {
                return Err(format!(
                    "node {} param block length {} != {}",
                    n.innovation,
                    n.params.len(),
                    n.node_type.param_len()
                ));
            }
        }
        let mut edge_inns = std::collections::HashSet::new();
        let mut ff_pairs = std::collections::HashSet::new();
        for e in &self.edges {
            if !edge_inns.insert(e.innovation) {
                return Err(format!("duplicate edge innovation {}", e.innovation));
            }
            let (src, dst) = match (self.node(e.source), self.node(e.target)) {
                (Some(s), Some(d)) => (s, d),
                _ => return Err(format!("edge {} has dangling endpoint", e.innovation)),
            };
            if src.depth >= dst.depth {
                return Err(format!(
                    "edge {} violates depth order: {} >= {}",
                    e.innovation, src.depth, dst.depth
                ));
            }
            if !ff_pairs.insert((e.source, e.target)) {
                return Err(format!(
                    "duplicate feed-forward pair ({}, {})",
                    e.source, e.target
                ));
            }
        }
        let mut rec_triples = std::collections::HashSet::new();
        for e in &self.rec_edges {
            if !edge_inns.insert(e.innovation) {
                return Err(format!("duplicate rec edge innovation {}", e.innovation));
            }
            if self.node(e.source).is_none() || self.node(e.target).is_none() {
                return Err(format!("rec edge {} has dangling endpoint", e.innovation));
            }
            if e.time_skip < 1 {
                return Err(format!("rec edge {} time_skip {} < 1", e.innovation, e.time_skip));
            }
            if !rec_triples.insert((e.source, e.target, e.time_skip)) {
                return Err(format!(
                    "duplicate recurrent triple ({}, {}, {})",
                    e.source, e.target, e.time_skip
                ));
            }
        }
        Ok(())
    }
}

/// Hash of the genome's structure: the (innovation, enabled) sets of all
/// three gene tables. Weights, parameters and fitness are excluded, so a
/// retrained genome hashes identically and islands can detect structural
/// duplicates.
pub fn structural_hash(g: &Genome) -> u64 {
    // FNV-1a, fixed parameters; gene vectors are innovation-sorted so the
    // digest is order-independent by construction.
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    fn eat(h: u64, byte: u8) -> u64 {
        (h ^ byte as u64).wrapping_mul(PRIME)
    }
    fn eat_u64(mut h: u64, v: u64) -> u64 {
        for b in v.to_le_bytes() {
            h = eat(h, b);
        }
        h
    }
    let mut h = OFFSET;
    for n in &g.nodes {
        h = eat(h, 0x01);
        h = eat_u64(h, n.innovation);
        h = eat(h, n.enabled as u8);
    }
    for e in &g.edges {
        h = eat(h, 0x02);
        h = eat_u64(h, e.innovation);
        h = eat(h, e.enabled as u8);
    }
    for e in &g.rec_edges {
        h = eat(h, 0x03);
        h = eat_u64(h, e.innovation);
        h = eat(h, e.enabled as u8);
    }
    h
}
