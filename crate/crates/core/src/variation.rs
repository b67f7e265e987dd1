//! Structural variation: the ten mutation operators and innovation-aligned
//! crossover, with new-component weights drawn through the configured
//! strategy triple.
//!
//! Operators never touch weights of genes inherited from the parent; only
//! newly created components are sampled. Selection among enabled kinds is
//! uniform; an operator with no valid application site signals
//! inapplicability and the caller redraws.

use rand::seq::index::sample as index_sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{
    EdgeGene, Genome, InnovationCounter, NodeGene, NodeType, RecurrentEdgeGene, HIDDEN_NODE_TYPES,
};
use crate::rnn::cell::LSTM_FORGET_BIAS;
use crate::weights::{
    crossover_r, initial_sample_clamped, lamarckian_blend, lamarckian_mutation_sample, weight_stats,
    FanCounts, InheritStrategy, SamplerConfig, WeightStats, WeightStrategyTriple,
};

/// The mutation operator catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MutationKind {
    SplitEdge,
    AddEdge,
    EnableEdge,
    AddRecurrentEdge,
    DisableEdge,
    DisableNode,
    EnableNode,
    AddNode,
    SplitNode,
    MergeNode,
}

pub const ALL_MUTATIONS: [MutationKind; 10] = [
    MutationKind::SplitEdge,
    MutationKind::AddEdge,
    MutationKind::EnableEdge,
    MutationKind::AddRecurrentEdge,
    MutationKind::DisableEdge,
    MutationKind::DisableNode,
    MutationKind::EnableNode,
    MutationKind::AddNode,
    MutationKind::SplitNode,
    MutationKind::MergeNode,
];

impl MutationKind {
    pub fn name(self) -> &'static str {
        match self {
            MutationKind::SplitEdge => "split_edge",
            MutationKind::AddEdge => "add_edge",
            MutationKind::EnableEdge => "enable_edge",
            MutationKind::AddRecurrentEdge => "add_recurrent_edge",
            MutationKind::DisableEdge => "disable_edge",
            MutationKind::DisableNode => "disable_node",
            MutationKind::EnableNode => "enable_node",
            MutationKind::AddNode => "add_node",
            MutationKind::SplitNode => "split_node",
            MutationKind::MergeNode => "merge_node",
        }
    }
}

/// Kind of reproduction that produced a child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossoverKind {
    IntraIsland,
    InterIsland,
}

/// Operator tuning. Split-edge is off in the standard setup; the other nine
/// kinds are drawn with equal probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationConfig {
    #[serde(default)]
    pub split_edge: bool,
    #[serde(default = "yes")]
    pub add_edge: bool,
    #[serde(default = "yes")]
    pub enable_edge: bool,
    #[serde(default = "yes")]
    pub add_recurrent_edge: bool,
    #[serde(default = "yes")]
    pub disable_edge: bool,
    #[serde(default = "yes")]
    pub disable_node: bool,
    #[serde(default = "yes")]
    pub enable_node: bool,
    #[serde(default = "yes")]
    pub add_node: bool,
    #[serde(default = "yes")]
    pub split_node: bool,
    #[serde(default = "yes")]
    pub merge_node: bool,
    /// Maximum in-degree and out-degree given to a node added by add_node.
    #[serde(default = "default_max_new_fan")]
    pub max_new_fan: usize,
    /// Redraws before mutate_any gives up and clones the parent.
    #[serde(default = "default_retry_bound")]
    pub retry_bound: usize,
    /// Recurrent time skips are drawn uniformly from 1..=max_time_skip.
    #[serde(default = "default_max_time_skip")]
    pub max_time_skip: u32,
}

fn yes() -> bool {
    true
}
fn default_max_new_fan() -> usize {
    3
}
fn default_retry_bound() -> usize {
    16
}
fn default_max_time_skip() -> u32 {
    10
}

impl Default for VariationConfig {
    fn default() -> Self {
        VariationConfig {
            split_edge: false,
            add_edge: true,
            enable_edge: true,
            add_recurrent_edge: true,
            disable_edge: true,
            disable_node: true,
            enable_node: true,
            add_node: true,
            split_node: true,
            merge_node: true,
            max_new_fan: default_max_new_fan(),
            retry_bound: default_retry_bound(),
            max_time_skip: default_max_time_skip(),
        }
    }
}

impl VariationConfig {
    pub fn kind_enabled(&self, kind: MutationKind) -> bool {
        match kind {
            MutationKind::SplitEdge => self.split_edge,
            MutationKind::AddEdge => self.add_edge,
            MutationKind::EnableEdge => self.enable_edge,
            MutationKind::AddRecurrentEdge => self.add_recurrent_edge,
            MutationKind::DisableEdge => self.disable_edge,
            MutationKind::DisableNode => self.disable_node,
            MutationKind::EnableNode => self.enable_node,
            MutationKind::AddNode => self.add_node,
            MutationKind::SplitNode => self.split_node,
            MutationKind::MergeNode => self.merge_node,
        }
    }

    pub fn enabled_kinds(&self) -> Vec<MutationKind> {
        ALL_MUTATIONS
            .iter()
            .copied()
            .filter(|&k| self.kind_enabled(k))
            .collect()
    }
}

/// Everything a variation operator needs besides the parent and RNG.
#[derive(Clone, Copy)]
pub struct VariationCtx<'a> {
    pub strategy: &'a WeightStrategyTriple,
    pub sampler: &'a SamplerConfig,
    pub config: &'a VariationConfig,
    pub counter: &'a InnovationCounter,
}

/// Weight source for components created by the running mutation.
enum NewWeights {
    Lamarckian(WeightStats),
    FromInitial,
}

impl NewWeights {
    fn for_mutation(parent: &Genome, ctx: &VariationCtx) -> Result<NewWeights> {
        Ok(match ctx.strategy.mutation {
            InheritStrategy::Lamarckian => NewWeights::Lamarckian(weight_stats(parent)?),
            InheritStrategy::SameAsInitial => NewWeights::FromInitial,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, g: &Genome, at_node: u64, ctx: &VariationCtx, rng: &mut R) -> f64 {
        match self {
            NewWeights::Lamarckian(stats) => lamarckian_mutation_sample(*stats, rng),
            NewWeights::FromInitial => {
                initial_sample_clamped(ctx.strategy.initial, FanCounts::of(g, at_node), ctx.sampler, rng)
            }
        }
    }

    /// Fill a freshly created node's parameter block.
    fn fill_params<R: Rng + ?Sized>(&self, g: &mut Genome, node: u64, ctx: &VariationCtx, rng: &mut R) {
        let n = g.node(node).expect("node exists");
        let kind = n.node_type;
        let len = n.params.len();
        let mut params = Vec::with_capacity(len);
        for _ in 0..len {
            params.push(self.sample(g, node, ctx, rng));
        }
        if kind == NodeType::Lstm && matches!(self, NewWeights::FromInitial) {
            // Fresh-from-initial LSTM blocks get the forget-gate offset;
            // Lamarckian samples already reflect offset parent biases.
            params[LSTM_FORGET_BIAS] += 1.0;
        }
        g.node_mut(node).unwrap().params = params;
    }
}

fn enabled_nodes(g: &Genome) -> Vec<(u64, f64)> {
    g.nodes
        .iter()
        .filter(|n| n.enabled)
        .map(|n| (n.innovation, n.depth))
        .collect()
}

fn enabled_hidden(g: &Genome) -> Vec<u64> {
    g.nodes
        .iter()
        .filter(|n| n.enabled && n.node_type.is_hidden())
        .map(|n| n.innovation)
        .collect()
}

fn add_edge_candidates(g: &Genome) -> Vec<(u64, u64)> {
    let taken: std::collections::HashSet<(u64, u64)> =
        g.edges.iter().map(|e| (e.source, e.target)).collect();
    let nodes = enabled_nodes(g);
    let mut out = Vec::new();
    for &(a, da) in &nodes {
        for &(b, db) in &nodes {
            if da < db && !taken.contains(&(a, b)) {
                out.push((a, b));
            }
        }
    }
    out
}

fn split_edge_candidates(g: &Genome) -> Vec<usize> {
    g.edges
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            if !e.enabled {
                return false;
            }
            let (Some(s), Some(t)) = (g.node(e.source), g.node(e.target)) else {
                return false;
            };
            if !(s.enabled && t.enabled) {
                return false;
            }
            let mid = (s.depth + t.depth) / 2.0;
            mid > s.depth && mid < t.depth
        })
        .map(|(i, _)| i)
        .collect()
}

fn splittable_hidden(g: &Genome) -> Vec<u64> {
    enabled_hidden(g)
        .into_iter()
        .filter(|&n| {
            let (fi, fo) = g.fan_counts(n);
            fi >= 1 && fo >= 1
        })
        .collect()
}

/// The subset of config-enabled kinds whose preconditions hold on `g`.
pub fn applicable_kinds(g: &Genome, cfg: &VariationConfig) -> Vec<MutationKind> {
    let any_disabled_edge =
        || g.edges.iter().any(|e| !e.enabled) || g.rec_edges.iter().any(|e| !e.enabled);
    let any_enabled_edge =
        || g.edges.iter().any(|e| e.enabled) || g.rec_edges.iter().any(|e| e.enabled);
    cfg.enabled_kinds()
        .into_iter()
        .filter(|kind| match kind {
            MutationKind::SplitEdge => !split_edge_candidates(g).is_empty(),
            MutationKind::AddEdge => !add_edge_candidates(g).is_empty(),
            MutationKind::EnableEdge => any_disabled_edge(),
            MutationKind::DisableEdge => any_enabled_edge(),
            MutationKind::AddRecurrentEdge => true,
            MutationKind::AddNode => true,
            MutationKind::DisableNode => !enabled_hidden(g).is_empty(),
            MutationKind::EnableNode => g
                .nodes
                .iter()
                .any(|n| !n.enabled && n.node_type.is_hidden()),
            MutationKind::SplitNode => !splittable_hidden(g).is_empty(),
            MutationKind::MergeNode => enabled_hidden(g).len() >= 2,
        })
        .collect()
}

/// Apply one mutation operator. Inherited genes keep the parent's weights
/// verbatim; new components draw from the mutation strategy. Fails with
/// [`Error::InapplicableMutation`] when the operator has no valid site.
pub fn mutate<R: Rng + ?Sized>(
    parent: &Genome,
    kind: MutationKind,
    ctx: &VariationCtx,
    rng: &mut R,
) -> Result<Genome> {
    let source = NewWeights::for_mutation(parent, ctx)?;
    let mut child = parent.clone();
    child.fitness = None;
    match kind {
        MutationKind::AddEdge => {
            let cands = add_edge_candidates(&child);
            if cands.is_empty() {
                return Err(Error::InapplicableMutation(kind.name()));
            }
            let (src, dst) = cands[rng.random_range(0..cands.len())];
            child.edges.push(EdgeGene {
                innovation: ctx.counter.next_edge(),
                source: src,
                target: dst,
                weight: 0.0,
                enabled: true,
            });
            let w = source.sample(&child, dst, ctx, rng);
            child.edges.last_mut().unwrap().weight = w;
        }
        MutationKind::AddRecurrentEdge => {
            let nodes = enabled_nodes(&child);
            let targets: Vec<u64> = child
                .nodes
                .iter()
                .filter(|n| n.enabled && n.node_type != NodeType::Input)
                .map(|n| n.innovation)
                .collect();
            if nodes.is_empty() || targets.is_empty() {
                return Err(Error::InapplicableMutation(kind.name()));
            }
            let taken: std::collections::HashSet<(u64, u64, u32)> = child
                .rec_edges
                .iter()
                .map(|e| (e.source, e.target, e.time_skip))
                .collect();
            let mut placed = false;
            for _ in 0..ctx.config.retry_bound * 4 {
                let src = nodes[rng.random_range(0..nodes.len())].0;
                let dst = targets[rng.random_range(0..targets.len())];
                let skip = rng.random_range(1..=ctx.config.max_time_skip);
                if taken.contains(&(src, dst, skip)) {
                    continue;
                }
                child.rec_edges.push(RecurrentEdgeGene {
                    innovation: ctx.counter.next_edge(),
                    source: src,
                    target: dst,
                    time_skip: skip,
                    weight: 0.0,
                    enabled: true,
                });
                let w = source.sample(&child, dst, ctx, rng);
                child.rec_edges.last_mut().unwrap().weight = w;
                placed = true;
                break;
            }
            if !placed {
                return Err(Error::InapplicableMutation(kind.name()));
            }
        }
        MutationKind::EnableEdge | MutationKind::DisableEdge => {
            let want = kind == MutationKind::DisableEdge;
            let ff: Vec<usize> = child
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.enabled == want)
                .map(|(i, _)| i)
                .collect();
            let rec: Vec<usize> = child
                .rec_edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.enabled == want)
                .map(|(i, _)| i)
                .collect();
            let total = ff.len() + rec.len();
            if total == 0 {
                return Err(Error::InapplicableMutation(kind.name()));
            }
            let pick = rng.random_range(0..total);
            if pick < ff.len() {
                child.edges[ff[pick]].enabled = !want;
            } else {
                child.rec_edges[rec[pick - ff.len()]].enabled = !want;
            }
        }
        MutationKind::SplitEdge => {
            let cands = split_edge_candidates(&child);
            if cands.is_empty() {
                return Err(Error::InapplicableMutation(kind.name()));
            }
            let ei = cands[rng.random_range(0..cands.len())];
            let (src, dst) = (child.edges[ei].source, child.edges[ei].target);
            let mid = (child.node(src).unwrap().depth + child.node(dst).unwrap().depth) / 2.0;
            child.edges[ei].enabled = false;
            let node_type = HIDDEN_NODE_TYPES[rng.random_range(0..HIDDEN_NODE_TYPES.len())];
            let new_node = ctx.counter.next_node();
            child.nodes.push(NodeGene::new(new_node, node_type, mid));
            for (a, b) in [(src, new_node), (new_node, dst)] {
                child.edges.push(EdgeGene {
                    innovation: ctx.counter.next_edge(),
                    source: a,
                    target: b,
                    weight: 0.0,
                    enabled: true,
                });
                let w = source.sample(&child, b, ctx, rng);
                child.edges.last_mut().unwrap().weight = w;
            }
            child.sort_genes();
            source.fill_params(&mut child, new_node, ctx, rng);
        }
        MutationKind::AddNode => {
            let depth = loop {
                let d: f64 = rng.random();
                if d > 0.0 && d < 1.0 {
                    break d;
                }
            };
            let node_type = HIDDEN_NODE_TYPES[rng.random_range(0..HIDDEN_NODE_TYPES.len())];
            let nodes = enabled_nodes(&child);
            let shallower: Vec<u64> = nodes.iter().filter(|&&(_, d)| d < depth).map(|&(n, _)| n).collect();
            let deeper: Vec<u64> = nodes.iter().filter(|&&(_, d)| d > depth).map(|&(n, _)| n).collect();
            if shallower.is_empty() || deeper.is_empty() {
                return Err(Error::InapplicableMutation(kind.name()));
            }
            let new_node = ctx.counter.next_node();
            child.nodes.push(NodeGene::new(new_node, node_type, depth));
            let k_in = rng.random_range(1..=ctx.config.max_new_fan.min(shallower.len()));
            let k_out = rng.random_range(1..=ctx.config.max_new_fan.min(deeper.len()));
            let in_pick = index_sample(rng, shallower.len(), k_in);
            let out_pick = index_sample(rng, deeper.len(), k_out);
            for i in in_pick.iter() {
                child.edges.push(EdgeGene {
                    innovation: ctx.counter.next_edge(),
                    source: shallower[i],
                    target: new_node,
                    weight: 0.0,
                    enabled: true,
                });
                let w = source.sample(&child, new_node, ctx, rng);
                child.edges.last_mut().unwrap().weight = w;
            }
            for i in out_pick.iter() {
                child.edges.push(EdgeGene {
                    innovation: ctx.counter.next_edge(),
                    source: new_node,
                    target: deeper[i],
                    weight: 0.0,
                    enabled: true,
                });
                let w = source.sample(&child, deeper[i], ctx, rng);
                child.edges.last_mut().unwrap().weight = w;
            }
            child.sort_genes();
            source.fill_params(&mut child, new_node, ctx, rng);
        }
        MutationKind::DisableNode | MutationKind::EnableNode => {
            let want_enabled = kind == MutationKind::DisableNode;
            let cands: Vec<u64> = child
                .nodes
                .iter()
                .filter(|n| n.node_type.is_hidden() && n.enabled == want_enabled)
                .map(|n| n.innovation)
                .collect();
            if cands.is_empty() {
                return Err(Error::InapplicableMutation(kind.name()));
            }
            let pick = cands[rng.random_range(0..cands.len())];
            let node = child.node_mut(pick).unwrap();
            node.enabled = !want_enabled;
        }
        MutationKind::SplitNode => {
            let cands = splittable_hidden(&child);
            if cands.is_empty() {
                return Err(Error::InapplicableMutation(kind.name()));
            }
            let v = cands[rng.random_range(0..cands.len())];
            split_node(&mut child, v, &source, ctx, rng);
        }
        MutationKind::MergeNode => {
            let cands = enabled_hidden(&child);
            if cands.len() < 2 {
                return Err(Error::InapplicableMutation(kind.name()));
            }
            let pick = index_sample(rng, cands.len(), 2);
            let (a, b) = (cands[pick.index(0)], cands[pick.index(1)]);
            if !merge_nodes(&mut child, a, b, &source, ctx, rng) {
                return Err(Error::InapplicableMutation(kind.name()));
            }
        }
    }
    child.sort_genes();
    debug_assert_eq!(child.validate(), Ok(()));
    Ok(child)
}

/// Incident enabled connections of a node, split by direction. Feed-forward
/// and recurrent elements are tagged so mirrors keep their time skips.
enum Incident {
    Ff { other: u64 },
    Rec { other: u64, skip: u32 },
}

fn incident_connections(g: &Genome, v: u64) -> (Vec<Incident>, Vec<Incident>, Vec<u32>) {
    let node_enabled = |inn: u64| g.node(inn).map(|n| n.enabled).unwrap_or(false);
    let mut ins = Vec::new();
    let mut outs = Vec::new();
    let mut selfs = Vec::new();
    for e in g.edges.iter().filter(|e| e.enabled) {
        if e.target == v && node_enabled(e.source) {
            ins.push(Incident::Ff { other: e.source });
        }
        if e.source == v && node_enabled(e.target) {
            outs.push(Incident::Ff { other: e.target });
        }
    }
    for e in g.rec_edges.iter().filter(|e| e.enabled) {
        if e.source == v && e.target == v {
            selfs.push(e.time_skip);
            continue;
        }
        if e.target == v && node_enabled(e.source) {
            ins.push(Incident::Rec {
                other: e.source,
                skip: e.time_skip,
            });
        }
        if e.source == v && node_enabled(e.target) {
            outs.push(Incident::Rec {
                other: e.target,
                skip: e.time_skip,
            });
        }
    }
    (ins, outs, selfs)
}

/// Random two-way split of incident connections. Both sides end non-empty:
/// a single element is shared, otherwise one is moved across if needed.
fn partition_incident<R: Rng + ?Sized>(items: Vec<Incident>, rng: &mut R) -> (Vec<Incident>, Vec<Incident>) {
    if items.len() == 1 {
        let dup = match &items[0] {
            Incident::Ff { other } => Incident::Ff { other: *other },
            Incident::Rec { other, skip } => Incident::Rec {
                other: *other,
                skip: *skip,
            },
        };
        return (items, vec![dup]);
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for item in items {
        if rng.random::<bool>() {
            a.push(item);
        } else {
            b.push(item);
        }
    }
    if a.is_empty() {
        a.push(b.remove(rng.random_range(0..b.len())));
    } else if b.is_empty() {
        b.push(a.remove(rng.random_range(0..a.len())));
    }
    (a, b)
}

fn push_mirrored<R: Rng + ?Sized>(
    g: &mut Genome,
    node: u64,
    inbound: bool,
    item: &Incident,
    source: &NewWeights,
    ctx: &VariationCtx,
    rng: &mut R,
) {
    match item {
        Incident::Ff { other } => {
            let (src, dst) = if inbound { (*other, node) } else { (node, *other) };
            if g.edges.iter().any(|e| e.source == src && e.target == dst) {
                return;
            }
            g.edges.push(EdgeGene {
                innovation: ctx.counter.next_edge(),
                source: src,
                target: dst,
                weight: 0.0,
                enabled: true,
            });
            let w = source.sample(g, dst, ctx, rng);
            g.edges.last_mut().unwrap().weight = w;
        }
        Incident::Rec { other, skip } => {
            let (src, dst) = if inbound { (*other, node) } else { (node, *other) };
            if g
                .rec_edges
                .iter()
                .any(|e| e.source == src && e.target == dst && e.time_skip == *skip)
            {
                return;
            }
            g.rec_edges.push(RecurrentEdgeGene {
                innovation: ctx.counter.next_edge(),
                source: src,
                target: dst,
                time_skip: *skip,
                weight: 0.0,
                enabled: true,
            });
            let w = source.sample(g, dst, ctx, rng);
            g.rec_edges.last_mut().unwrap().weight = w;
        }
    }
}

fn split_node<R: Rng + ?Sized>(
    g: &mut Genome,
    v: u64,
    source: &NewWeights,
    ctx: &VariationCtx,
    rng: &mut R,
) {
    let (ins, outs, selfs) = incident_connections(g, v);
    let (node_type, depth) = {
        let n = g.node(v).unwrap();
        (n.node_type, n.depth)
    };
    let copies = [ctx.counter.next_node(), ctx.counter.next_node()];
    for &c in &copies {
        g.nodes.push(NodeGene::new(c, node_type, depth));
    }
    g.sort_genes();

    let (in_a, in_b) = partition_incident(ins, rng);
    let (out_a, out_b) = partition_incident(outs, rng);
    for (copy, in_part, out_part) in [(copies[0], &in_a, &out_a), (copies[1], &in_b, &out_b)] {
        for item in in_part {
            push_mirrored(g, copy, true, item, source, ctx, rng);
        }
        for item in out_part {
            push_mirrored(g, copy, false, item, source, ctx, rng);
        }
    }
    // Self-loops stay self-loops on one copy each.
    for skip in selfs {
        let copy = copies[rng.random_range(0..2)];
        push_mirrored(
            g,
            copy,
            true,
            &Incident::Rec { other: copy, skip },
            source,
            ctx,
            rng,
        );
    }
    g.sort_genes();
    for &c in &copies {
        source.fill_params(g, c, ctx, rng);
    }
    g.node_mut(v).unwrap().enabled = false;
}

fn merge_nodes<R: Rng + ?Sized>(
    g: &mut Genome,
    a: u64,
    b: u64,
    source: &NewWeights,
    ctx: &VariationCtx,
    rng: &mut R,
) -> bool {
    let (type_a, depth_a) = {
        let n = g.node(a).unwrap();
        (n.node_type, n.depth)
    };
    let (type_b, depth_b) = {
        let n = g.node(b).unwrap();
        (n.node_type, n.depth)
    };
    let depth = (depth_a + depth_b) / 2.0;
    let node_type = if rng.random::<bool>() { type_a } else { type_b };
    let node_enabled = |g: &Genome, inn: u64| g.node(inn).map(|n| n.enabled).unwrap_or(false);

    // Union of enabled connections, endpoints inside the pair collapsing
    // onto the merged node; drop feed-forward edges that would violate the
    // depth order at the new depth.
    let mut ff_in: Vec<u64> = Vec::new();
    let mut ff_out: Vec<u64> = Vec::new();
    let mut rec: Vec<(u64, u64, u32)> = Vec::new();
    for e in g.edges.iter().filter(|e| e.enabled) {
        let touches_target = e.target == a || e.target == b;
        let touches_source = e.source == a || e.source == b;
        if touches_target && !touches_source && node_enabled(g, e.source) {
            let d = g.node(e.source).unwrap().depth;
            if d < depth && !ff_in.contains(&e.source) {
                ff_in.push(e.source);
            }
        }
        if touches_source && !touches_target && node_enabled(g, e.target) {
            let d = g.node(e.target).unwrap().depth;
            if d > depth && !ff_out.contains(&e.target) {
                ff_out.push(e.target);
            }
        }
        // An edge between a and b collapses into the merged node.
    }
    for e in g.rec_edges.iter().filter(|e| e.enabled) {
        let s_in = e.source == a || e.source == b;
        let t_in = e.target == a || e.target == b;
        if !s_in && !t_in {
            continue;
        }
        let src = if s_in { u64::MAX } else { e.source };
        let dst = if t_in { u64::MAX } else { e.target };
        if (!s_in && !node_enabled(g, e.source)) || (!t_in && !node_enabled(g, e.target)) {
            continue;
        }
        if !rec.contains(&(src, dst, e.time_skip)) {
            rec.push((src, dst, e.time_skip));
        }
    }

    let in_count = ff_in.len() + rec.iter().filter(|(_, d, _)| *d == u64::MAX).count();
    let out_count = ff_out.len() + rec.iter().filter(|(s, _, _)| *s == u64::MAX).count();
    if in_count == 0 || out_count == 0 {
        return false;
    }

    let m = ctx.counter.next_node();
    g.nodes.push(NodeGene::new(m, node_type, depth));
    g.sort_genes();
    for src in ff_in {
        push_mirrored(g, m, true, &Incident::Ff { other: src }, source, ctx, rng);
    }
    for dst in ff_out {
        push_mirrored(g, m, false, &Incident::Ff { other: dst }, source, ctx, rng);
    }
    for (src, dst, skip) in rec {
        let src = if src == u64::MAX { m } else { src };
        let dst = if dst == u64::MAX { m } else { dst };
        if g
            .rec_edges
            .iter()
            .any(|e| e.source == src && e.target == dst && e.time_skip == skip)
        {
            continue;
        }
        g.rec_edges.push(RecurrentEdgeGene {
            innovation: ctx.counter.next_edge(),
            source: src,
            target: dst,
            time_skip: skip,
            weight: 0.0,
            enabled: true,
        });
        let w = source.sample(g, dst, ctx, rng);
        g.rec_edges.last_mut().unwrap().weight = w;
    }
    g.sort_genes();
    source.fill_params(g, m, ctx, rng);
    g.node_mut(a).unwrap().enabled = false;
    g.node_mut(b).unwrap().enabled = false;
    true
}

/// Draw kinds uniformly from the enabled set until one applies, up to the
/// retry bound; then fall back to a structural clone of the parent. Returns
/// the child and the operator that produced it (None for the clone path).
pub fn mutate_any<R: Rng + ?Sized>(
    parent: &Genome,
    ctx: &VariationCtx,
    rng: &mut R,
) -> (Genome, Option<MutationKind>) {
    let kinds = ctx.config.enabled_kinds();
    if !kinds.is_empty() {
        for _ in 0..ctx.config.retry_bound {
            let kind = kinds[rng.random_range(0..kinds.len())];
            match mutate(parent, kind, ctx, rng) {
                Ok(child) => return (child, Some(kind)),
                Err(Error::InapplicableMutation(_)) => continue,
                Err(_) => continue,
            }
        }
    }
    let mut clone = parent.clone();
    clone.fitness = None;
    (clone, None)
}

/// Innovation-aligned crossover. The fitter parent is determined by (lower
/// MSE, lower generation id); the child's structure is the union of both
/// parents' genes, each enabled if enabled in either. Under the Lamarckian
/// strategy, matched weights blend along one shared line-search draw and
/// single-parent weights copy verbatim; otherwise every weight is resampled
/// from the initial strategy in the child's own structure.
pub fn crossover<R: Rng + ?Sized>(
    p1: &Genome,
    p2: &Genome,
    ctx: &VariationCtx,
    rng: &mut R,
) -> Result<Genome> {
    if p1.fitness.is_none() || p2.fitness.is_none() {
        return Err(Error::MissingFitness);
    }
    let key = |g: &Genome| (g.fitness.unwrap(), g.generation_id);
    let (better, worse) = if key(p2) < key(p1) { (p2, p1) } else { (p1, p2) };
    let r = match ctx.strategy.crossover {
        InheritStrategy::Lamarckian => Some(crossover_r(rng)),
        InheritStrategy::SameAsInitial => None,
    };
    crossover_with_r(better, worse, r, ctx, rng)
}

/// Crossover body with the line-search draw injected; `r` is None exactly
/// when the crossover strategy re-samples from the initial distribution.
pub fn crossover_with_r<R: Rng + ?Sized>(
    better: &Genome,
    worse: &Genome,
    r: Option<f64>,
    ctx: &VariationCtx,
    rng: &mut R,
) -> Result<Genome> {
    let mut child = Genome {
        nodes: Vec::new(),
        edges: Vec::new(),
        rec_edges: Vec::new(),
        fitness: None,
        generation_id: better.generation_id.max(worse.generation_id) + 1,
        island_of_origin: better.island_of_origin,
    };

    // Nodes.
    {
        let mut i = 0;
        let mut j = 0;
        while i < better.nodes.len() || j < worse.nodes.len() {
            let take_better = j >= worse.nodes.len()
                || (i < better.nodes.len()
                    && better.nodes[i].innovation <= worse.nodes[j].innovation);
            let take_worse = i >= better.nodes.len()
                || (j < worse.nodes.len()
                    && worse.nodes[j].innovation <= better.nodes[i].innovation);
            match (take_better, take_worse) {
                (true, true) => {
                    let nb = &better.nodes[i];
                    let nw = &worse.nodes[j];
                    let mut gene = nb.clone();
                    gene.enabled = nb.enabled || nw.enabled;
                    if let Some(r) = r {
                        for (k, p) in gene.params.iter_mut().enumerate() {
                            *p = lamarckian_blend(nb.params[k], nw.params[k], r);
                        }
                    }
                    child.nodes.push(gene);
                    i += 1;
                    j += 1;
                }
                (true, false) => {
                    child.nodes.push(better.nodes[i].clone());
                    i += 1;
                }
                (false, true) => {
                    child.nodes.push(worse.nodes[j].clone());
                    j += 1;
                }
                (false, false) => unreachable!(),
            }
        }
    }

    // Feed-forward and recurrent edges, same alignment scheme.
    fn union_edges<G: Clone, F: Fn(&G) -> u64, W: FnMut(&mut G, &G, &G)>(
        a: &[G],
        b: &[G],
        innovation: F,
        mut merge: W,
        out: &mut Vec<G>,
    ) {
        let mut i = 0;
        let mut j = 0;
        while i < a.len() || j < b.len() {
            let ta = j >= b.len() || (i < a.len() && innovation(&a[i]) <= innovation(&b[j]));
            let tb = i >= a.len() || (j < b.len() && innovation(&b[j]) <= innovation(&a[i]));
            match (ta, tb) {
                (true, true) => {
                    let mut gene = a[i].clone();
                    merge(&mut gene, &a[i], &b[j]);
                    out.push(gene);
                    i += 1;
                    j += 1;
                }
                (true, false) => {
                    out.push(a[i].clone());
                    i += 1;
                }
                (false, true) => {
                    out.push(b[j].clone());
                    j += 1;
                }
                (false, false) => unreachable!(),
            }
        }
    }

    union_edges(
        &better.edges,
        &worse.edges,
        |e: &EdgeGene| e.innovation,
        |gene, eb, ew| {
            gene.enabled = eb.enabled || ew.enabled;
            if let Some(r) = r {
                gene.weight = lamarckian_blend(eb.weight, ew.weight, r);
            }
        },
        &mut child.edges,
    );
    union_edges(
        &better.rec_edges,
        &worse.rec_edges,
        |e: &RecurrentEdgeGene| e.innovation,
        |gene, eb, ew| {
            gene.enabled = eb.enabled || ew.enabled;
            if let Some(r) = r {
                gene.weight = lamarckian_blend(eb.weight, ew.weight, r);
            }
        },
        &mut child.rec_edges,
    );

    if r.is_none() {
        resample_all_weights(&mut child, ctx, rng);
    }
    debug_assert_eq!(child.validate(), Ok(()));
    Ok(child)
}

/// Fresh initial-strategy weights for every gene of an evolved structure,
/// the non-Lamarckian crossover rule. Fans are clamped to stay total on
/// structures with stranded nodes.
fn resample_all_weights<R: Rng + ?Sized>(g: &mut Genome, ctx: &VariationCtx, rng: &mut R) {
    for i in 0..g.edges.len() {
        let fans = FanCounts::of(g, g.edges[i].target);
        g.edges[i].weight = initial_sample_clamped(ctx.strategy.initial, fans, ctx.sampler, rng);
    }
    for i in 0..g.rec_edges.len() {
        let fans = FanCounts::of(g, g.rec_edges[i].target);
        g.rec_edges[i].weight = initial_sample_clamped(ctx.strategy.initial, fans, ctx.sampler, rng);
    }
    for i in 0..g.nodes.len() {
        if g.nodes[i].params.is_empty() {
            continue;
        }
        let fans = FanCounts::of(g, g.nodes[i].innovation);
        for k in 0..g.nodes[i].params.len() {
            g.nodes[i].params[k] =
                initial_sample_clamped(ctx.strategy.initial, fans, ctx.sampler, rng);
        }
        if g.nodes[i].node_type == NodeType::Lstm {
            g.nodes[i].params[LSTM_FORGET_BIAS] += 1.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{seed_genome, structural_hash};
    use crate::weights::InitialStrategy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        strategy: WeightStrategyTriple,
        sampler: SamplerConfig,
        config: VariationConfig,
        counter: InnovationCounter,
    }

    impl Fixture {
        fn new(code: &str) -> Fixture {
            Fixture {
                strategy: WeightStrategyTriple::parse(code).unwrap(),
                sampler: SamplerConfig::default(),
                config: VariationConfig {
                    split_edge: true,
                    ..VariationConfig::default()
                },
                counter: InnovationCounter::new(),
            }
        }

        fn ctx(&self) -> VariationCtx<'_> {
            VariationCtx {
                strategy: &self.strategy,
                sampler: &self.sampler,
                config: &self.config,
                counter: &self.counter,
            }
        }
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn add_node_keeps_parent_weights() {
        let fx = Fixture::new("X-X-X");
        let parent = seed_genome(2, 1, &fx.counter).unwrap();
        let parent =
            crate::weights::initialize_genome_weights(&parent, InitialStrategy::Xavier, &fx.sampler, &mut rng(1))
                .unwrap();
        let child = mutate(&parent, MutationKind::AddNode, &fx.ctx(), &mut rng(2)).unwrap();
        assert_eq!(child.nodes.len(), parent.nodes.len() + 1);
        assert!(child.edges.len() >= parent.edges.len() + 2);
        for pe in &parent.edges {
            let ce = child
                .edges
                .iter()
                .find(|e| e.innovation == pe.innovation)
                .unwrap();
            assert_eq!(ce.weight, pe.weight);
        }
        assert!(child.validate().is_ok());
    }

    #[test]
    fn split_edge_midpoint_rule() {
        let fx = Fixture::new("X-X-X");
        let parent = seed_genome(1, 1, &fx.counter).unwrap();
        let child = mutate(&parent, MutationKind::SplitEdge, &fx.ctx(), &mut rng(3)).unwrap();
        let original = child
            .edges
            .iter()
            .find(|e| e.innovation == parent.edges[0].innovation)
            .unwrap();
        assert!(!original.enabled);
        let enabled: Vec<_> = child.edges.iter().filter(|e| e.enabled).collect();
        assert_eq!(enabled.len(), 2);
        let new_node = child.nodes.iter().find(|n| n.node_type.is_hidden()).unwrap();
        assert_eq!(new_node.depth, 0.5);
    }

    #[test]
    fn lamarckian_mutation_on_constant_parent_pins_new_weights() {
        let fx = Fixture::new("X-L-L");
        let mut parent = seed_genome(2, 1, &fx.counter).unwrap();
        for e in &mut parent.edges {
            e.weight = 0.3;
        }
        for n in &mut parent.nodes {
            for p in &mut n.params {
                *p = 0.3;
            }
        }
        let child = mutate(&parent, MutationKind::AddNode, &fx.ctx(), &mut rng(4)).unwrap();
        for e in &child.edges {
            assert_eq!(e.weight, 0.3);
        }
        for n in &child.nodes {
            for p in &n.params {
                assert_eq!(*p, 0.3);
            }
        }
    }

    #[test]
    fn applicable_kinds_on_seed() {
        let fx = Fixture::new("X-X-X");
        let seed = seed_genome(2, 1, &fx.counter).unwrap();
        let kinds = applicable_kinds(&seed, &fx.config);
        assert!(!kinds.contains(&MutationKind::EnableEdge));
        assert!(!kinds.contains(&MutationKind::SplitNode));
        assert!(!kinds.contains(&MutationKind::MergeNode));
        assert!(!kinds.contains(&MutationKind::DisableNode));
        assert!(!kinds.contains(&MutationKind::EnableNode));
        assert!(kinds.contains(&MutationKind::AddNode));
        assert!(kinds.contains(&MutationKind::DisableEdge));
        // AddEdge has no free pair on a fully connected seed.
        assert!(!kinds.contains(&MutationKind::AddEdge));

        let disabled = mutate(&seed, MutationKind::DisableEdge, &fx.ctx(), &mut rng(5)).unwrap();
        assert!(applicable_kinds(&disabled, &fx.config).contains(&MutationKind::EnableEdge));
    }

    #[test]
    fn crossover_identical_parents_is_fixed_point() {
        let fx = Fixture::new("X-L-L");
        let mut g = seed_genome(2, 1, &fx.counter).unwrap();
        for (i, e) in g.edges.iter_mut().enumerate() {
            e.weight = 0.1 * (i as f64 + 1.0);
        }
        g.fitness = Some(0.5);
        let child = crossover(&g, &g, &fx.ctx(), &mut rng(6)).unwrap();
        for (ce, pe) in child.edges.iter().zip(&g.edges) {
            assert_eq!(ce.weight, pe.weight);
        }
        assert_eq!(structural_hash(&child), structural_hash(&g));
    }

    #[test]
    fn crossover_blend_with_known_r() {
        let fx = Fixture::new("X-L-L");
        let mut a = seed_genome(1, 1, &fx.counter).unwrap();
        a.edges[0].weight = 0.2;
        a.fitness = Some(0.1);
        let mut b = a.clone();
        b.edges[0].weight = 0.4;
        b.fitness = Some(0.9);
        b.generation_id = 1;
        let child = crossover_with_r(&a, &b, Some(0.5), &fx.ctx(), &mut rng(7)).unwrap();
        assert!((child.edges[0].weight - 0.3).abs() < 1e-15);
    }

    #[test]
    fn crossover_copies_single_parent_genes_verbatim() {
        let fx = Fixture::new("X-L-L");
        let mut base = seed_genome(2, 1, &fx.counter).unwrap();
        for e in &mut base.edges {
            e.weight = 0.25;
        }
        base.fitness = Some(0.2);
        let mut worse = mutate(&base, MutationKind::AddNode, &fx.ctx(), &mut rng(8)).unwrap();
        worse.fitness = Some(0.8);
        let child = crossover(&base, &worse, &fx.ctx(), &mut rng(9)).unwrap();
        for we in &worse.edges {
            let ce = child.edges.iter().find(|e| e.innovation == we.innovation).unwrap();
            if !base.edges.iter().any(|e| e.innovation == we.innovation) {
                assert_eq!(ce.weight, we.weight, "single-parent gene must copy");
            }
        }
        let hidden_w = worse.nodes.iter().find(|n| n.node_type.is_hidden()).unwrap();
        let hidden_c = child.nodes.iter().find(|n| n.node_type.is_hidden()).unwrap();
        assert_eq!(hidden_w.params, hidden_c.params);
    }

    #[test]
    fn crossover_requires_fitness() {
        let fx = Fixture::new("X-L-L");
        let g = seed_genome(1, 1, &fx.counter).unwrap();
        assert!(matches!(
            crossover(&g, &g, &fx.ctx(), &mut rng(10)),
            Err(Error::MissingFitness)
        ));
    }

    #[test]
    fn crossover_enabled_iff_either_and_no_new_innovations() {
        let fx = Fixture::new("X-L-L");
        let mut a = seed_genome(2, 1, &fx.counter).unwrap();
        a.fitness = Some(0.3);
        let mut b = a.clone();
        b.edges[0].enabled = false;
        b.fitness = Some(0.4);
        b.generation_id = 2;
        let child = crossover(&a, &b, &fx.ctx(), &mut rng(11)).unwrap();
        assert!(child.edges[0].enabled);

        let inns: std::collections::HashSet<u64> = a
            .edges
            .iter()
            .map(|e| e.innovation)
            .chain(b.edges.iter().map(|e| e.innovation))
            .collect();
        for e in &child.edges {
            assert!(inns.contains(&e.innovation));
        }
    }

    #[test]
    fn mutate_any_falls_back_to_clone() {
        let fx = Fixture::new("X-X-X");
        // Disable every kind: the redraw loop cannot run and cloning is the
        // only option left.
        let mut cfg = VariationConfig::default();
        for flag in [
            &mut cfg.split_edge,
            &mut cfg.add_edge,
            &mut cfg.enable_edge,
            &mut cfg.add_recurrent_edge,
            &mut cfg.disable_edge,
            &mut cfg.disable_node,
            &mut cfg.enable_node,
            &mut cfg.add_node,
            &mut cfg.split_node,
            &mut cfg.merge_node,
        ] {
            *flag = false;
        }
        let ctx = VariationCtx {
            strategy: &fx.strategy,
            sampler: &fx.sampler,
            config: &cfg,
            counter: &fx.counter,
        };
        let parent = seed_genome(1, 1, &fx.counter).unwrap();
        let (child, kind) = mutate_any(&parent, &ctx, &mut rng(12));
        assert!(kind.is_none());
        assert_eq!(structural_hash(&child), structural_hash(&parent));
    }

    #[test]
    fn fuzz_operators_preserve_invariants() {
        for strategy in ["X-X-X", "K-L-L", "R-L-R"] {
            let fx = Fixture::new(strategy);
            let ctx = fx.ctx();
            let mut r = rng(99);
            let mut g = seed_genome(3, 2, &fx.counter).unwrap();
            g = crate::weights::initialize_genome_weights(
                &g,
                fx.strategy.initial,
                &fx.sampler,
                &mut r,
            )
            .unwrap();
            let io_count = (g.n_inputs(), g.n_outputs());
            for step in 0..1500 {
                let parent_weights: std::collections::HashMap<u64, f64> =
                    g.edges.iter().map(|e| (e.innovation, e.weight)).collect();
                let (child, kind) = mutate_any(&g, &ctx, &mut r);
                assert_eq!(child.validate(), Ok(()), "step {step} kind {kind:?}");
                assert_eq!((child.n_inputs(), child.n_outputs()), io_count);
                for e in &child.edges {
                    if let Some(w) = parent_weights.get(&e.innovation) {
                        assert_eq!(e.weight, *w, "inherited weight changed at step {step}");
                    }
                }
                g = child;
            }
            assert!(g.nodes.len() > 5, "search never grew: {strategy}");
        }
    }
}
