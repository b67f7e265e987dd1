//! Compilation of a genome into an executable phenotype: depth-ordered node
//! evaluation, ring-buffered recurrent state, and exact backpropagation
//! through time over bounded windows.

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::genome::{Genome, NodeType};
use crate::rnn::cell;

#[derive(Debug, Clone)]
struct PNode {
    innovation: u64,
    kind: NodeType,
    param_off: usize,
    aux_off: usize,
    /// Feed-forward in-edges: (source node index, weight slot).
    in_ff: Vec<(usize, usize)>,
    /// Recurrent in-edges: (source node index, time skip, weight slot).
    in_rec: Vec<(usize, u32, usize)>,
}

/// Weight slot back-references for writing trained values into a genome.
#[derive(Debug, Clone)]
enum SlotGene {
    NodeParam { innovation: u64, index: usize },
    Edge { innovation: u64 },
    RecEdge { innovation: u64 },
}

/// Executable unrolled compute graph built from the enabled subgraph of a
/// genome. Exclusively owned by one worker while training or evaluating.
#[derive(Debug, Clone)]
pub struct Phenotype {
    nodes: Vec<PNode>,
    input_nodes: Vec<usize>,
    output_nodes: Vec<usize>,
    horizon: usize,
    ring_len: usize,
    aux_total: usize,
    params: Vec<f64>,
    slot_genes: Vec<SlotGene>,
    /// Output node innovations with no enabled path from any input; they
    /// emit bias-only signals. Informational, not an error.
    pub disconnected_outputs: Vec<u64>,
    // Mutable per-sequence state.
    ring: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    time: usize,
    // Step scratch, recycled to keep the hot loop allocation-free.
    scratch_h: Vec<f64>,
    scratch_c: Vec<f64>,
}

/// Recorded forward intermediates for one window, consumed by
/// [`Phenotype::backward_window`]. Snapshots the pre-window state so
/// recurrent reads that cross the window boundary stay reproducible while
/// gradients do not flow across it.
#[derive(Debug, Clone)]
pub struct WindowTrace {
    steps: usize,
    x: Vec<f64>,
    h: Vec<f64>,
    aux: Vec<f64>,
    ring0: Vec<f64>,
    h_prev0: Vec<f64>,
    c_prev0: Vec<f64>,
    time0: usize,
}

impl Phenotype {
    /// Compile the enabled subgraph of a genome. Deterministic: node order
    /// is (depth, innovation); weight slots are node parameters in that
    /// order, then feed-forward weights, then recurrent weights, each by
    /// ascending innovation.
    pub fn build(g: &Genome) -> Phenotype {
        let mut order: Vec<&crate::genome::NodeGene> = g.nodes.iter().filter(|n| n.enabled).collect();
        order.sort_by(|a, b| {
            a.depth
                .partial_cmp(&b.depth)
                .unwrap()
                .then(a.innovation.cmp(&b.innovation))
        });
        let index_of: std::collections::HashMap<u64, usize> = order
            .iter()
            .enumerate()
            .map(|(i, n)| (n.innovation, i))
            .collect();

        let mut params = Vec::new();
        let mut slot_genes = Vec::new();
        let mut nodes: Vec<PNode> = Vec::with_capacity(order.len());
        let mut aux_total = 0;
        for n in &order {
            let param_off = params.len();
            for (i, &p) in n.params.iter().enumerate() {
                params.push(p);
                slot_genes.push(SlotGene::NodeParam {
                    innovation: n.innovation,
                    index: i,
                });
            }
            let aux_off = aux_total;
            aux_total += cell::aux_width(n.node_type);
            nodes.push(PNode {
                innovation: n.innovation,
                kind: n.node_type,
                param_off,
                aux_off,
                in_ff: Vec::new(),
                in_rec: Vec::new(),
            });
        }

        for e in g.edges.iter().filter(|e| e.enabled) {
            if let (Some(&src), Some(&dst)) = (index_of.get(&e.source), index_of.get(&e.target)) {
                let slot = params.len();
                params.push(e.weight);
                slot_genes.push(SlotGene::Edge {
                    innovation: e.innovation,
                });
                nodes[dst].in_ff.push((src, slot));
            }
        }
        let mut horizon = 0;
        for e in g.rec_edges.iter().filter(|e| e.enabled) {
            if let (Some(&src), Some(&dst)) = (index_of.get(&e.source), index_of.get(&e.target)) {
                // Inputs always emit the series value; a recurrent edge into
                // an input would be dead weight, so it is skipped.
                if nodes[dst].kind == NodeType::Input {
                    continue;
                }
                let slot = params.len();
                params.push(e.weight);
                slot_genes.push(SlotGene::RecEdge {
                    innovation: e.innovation,
                });
                nodes[dst].in_rec.push((src, e.time_skip, slot));
                horizon = horizon.max(e.time_skip as usize);
            }
        }

        let input_nodes: Vec<usize> = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeType::Input)
            .map(|(i, _)| i)
            .collect();
        let output_nodes: Vec<usize> = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeType::Output)
            .map(|(i, _)| i)
            .collect();

        // Reachability from the inputs over enabled edges, to flag outputs
        // that can only ever emit their bias.
        let mut reached = vec![false; nodes.len()];
        let mut stack: Vec<usize> = input_nodes.clone();
        for &i in &input_nodes {
            reached[i] = true;
        }
        let mut out_adj: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (dst, n) in nodes.iter().enumerate() {
            for &(src, _) in &n.in_ff {
                out_adj[src].push(dst);
            }
            for &(src, _, _) in &n.in_rec {
                out_adj[src].push(dst);
            }
        }
        while let Some(i) = stack.pop() {
            for &j in &out_adj[i] {
                if !reached[j] {
                    reached[j] = true;
                    stack.push(j);
                }
            }
        }
        let disconnected_outputs = output_nodes
            .iter()
            .filter(|&&i| !reached[i])
            .map(|&i| nodes[i].innovation)
            .collect();

        let n = nodes.len();
        let ring_len = horizon.max(1);
        Phenotype {
            nodes,
            input_nodes,
            output_nodes,
            horizon,
            ring_len,
            aux_total,
            params,
            slot_genes,
            disconnected_outputs,
            ring: vec![0.0; ring_len * n],
            h_prev: vec![0.0; n],
            c_prev: vec![0.0; n],
            time: 0,
            scratch_h: vec![0.0; n],
            scratch_c: vec![0.0; n],
        }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.params.len());
        self.params.copy_from_slice(p);
    }

    pub fn n_inputs(&self) -> usize {
        self.input_nodes.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_nodes.len()
    }

    /// Largest enabled recurrent time skip (0 when purely feed-forward).
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Node innovations in evaluation order, for tests and dumps.
    pub fn topo_innovations(&self) -> Vec<u64> {
        self.nodes.iter().map(|n| n.innovation).collect()
    }

    /// Shrink the recurrent state buffers below the horizon. Test hook for
    /// the buffer-length correctness property.
    #[cfg(test)]
    pub(crate) fn truncate_ring(&mut self, len: usize) {
        assert!(len >= 1);
        self.ring_len = len;
        self.ring = vec![0.0; len * self.nodes.len()];
        self.reset_state();
    }

    /// Copy trained weights back into the matching genes of a genome.
    pub fn write_back(&self, g: &mut Genome) {
        for (slot, gene) in self.slot_genes.iter().enumerate() {
            let v = self.params[slot];
            match gene {
                SlotGene::NodeParam { innovation, index } => {
                    g.node_mut(*innovation).expect("node exists").params[*index] = v;
                }
                SlotGene::Edge { innovation } => {
                    let i = g
                        .edges
                        .binary_search_by_key(innovation, |e| e.innovation)
                        .expect("edge exists");
                    g.edges[i].weight = v;
                }
                SlotGene::RecEdge { innovation } => {
                    let i = g
                        .rec_edges
                        .binary_search_by_key(innovation, |e| e.innovation)
                        .expect("rec edge exists");
                    g.rec_edges[i].weight = v;
                }
            }
        }
    }

    /// Zero all recurrent state and restart the sequence clock.
    pub fn reset_state(&mut self) {
        self.ring.iter_mut().for_each(|v| *v = 0.0);
        self.h_prev.iter_mut().for_each(|v| *v = 0.0);
        self.c_prev.iter_mut().for_each(|v| *v = 0.0);
        self.time = 0;
    }

    #[inline]
    fn past(&self, src: usize, skip: u32) -> f64 {
        let k = skip as usize;
        if self.time < k {
            return 0.0;
        }
        let slot = (self.time - k) % self.ring_len;
        self.ring[slot * self.nodes.len() + src]
    }

    /// Advance one timestep. Afterwards `self.h_prev` holds the step's node
    /// outputs. When a trace is recording, the x and aux rows are appended.
    fn step(&mut self, input: &[f64], mut record: Option<(&mut Vec<f64>, &mut Vec<f64>)>) {
        let n = self.nodes.len();
        let mut h_now = std::mem::take(&mut self.scratch_h);
        let mut c_now = std::mem::take(&mut self.scratch_c);
        let mut input_iter = 0;
        for i in 0..n {
            let node = &self.nodes[i];
            let x = if node.kind == NodeType::Input {
                let v = input[input_iter];
                input_iter += 1;
                v
            } else {
                let mut acc = 0.0;
                for &(src, slot) in &node.in_ff {
                    acc += self.params[slot] * h_now[src];
                }
                for &(src, skip, slot) in &node.in_rec {
                    acc += self.params[slot] * self.past(src, skip);
                }
                acc
            };
            let pb = node.param_off..node.param_off + node.kind.param_len();
            let aux_w = cell::aux_width(node.kind);
            let mut aux_buf = [0.0f64; 5];
            let (h, c) = cell::forward(
                node.kind,
                &self.params[pb],
                x,
                self.h_prev[i],
                self.c_prev[i],
                &mut aux_buf[..aux_w],
            );
            h_now[i] = h;
            c_now[i] = c;
            if let Some((xs, auxs)) = record.as_mut() {
                xs.push(x);
                auxs.extend_from_slice(&aux_buf[..aux_w]);
            }
        }
        // Commit the step: the ring holds ages 1..=ring_len at read time.
        let slot = self.time % self.ring_len;
        self.ring[slot * n..(slot + 1) * n].copy_from_slice(&h_now);
        self.scratch_h = std::mem::replace(&mut self.h_prev, h_now);
        self.scratch_c = std::mem::replace(&mut self.c_prev, c_now);
        self.time += 1;
    }

    /// Run the series from a fresh state and collect per-timestep outputs.
    /// Fails with the first offending timestep if any output goes non-finite.
    pub fn forward(&mut self, series: &Matrix) -> Result<Matrix> {
        if series.cols() != self.n_inputs() {
            return Err(Error::InvalidDimension(format!(
                "series has {} columns, phenotype expects {}",
                series.cols(),
                self.n_inputs()
            )));
        }
        self.reset_state();
        let mut out = Matrix::zeros(series.rows(), self.n_outputs());
        for t in 0..series.rows() {
            self.step(series.row(t), None);
            let row = out.row_mut(t);
            for (j, &oi) in self.output_nodes.iter().enumerate() {
                row[j] = self.h_prev[oi];
                if !row[j].is_finite() {
                    return Err(Error::NumericalDivergence { step: t });
                }
            }
        }
        Ok(out)
    }

    /// Open a trace window at the current state.
    pub fn begin_window(&self) -> WindowTrace {
        WindowTrace {
            steps: 0,
            x: Vec::new(),
            h: Vec::new(),
            aux: Vec::new(),
            ring0: self.ring.clone(),
            h_prev0: self.h_prev.clone(),
            c_prev0: self.c_prev.clone(),
            time0: self.time,
        }
    }

    /// One recorded step inside a window. Checks outputs for divergence.
    pub fn step_window(&mut self, input: &[f64], trace: &mut WindowTrace) -> Result<()> {
        let step_index = self.time;
        self.step(input, Some((&mut trace.x, &mut trace.aux)));
        for &oi in &self.output_nodes {
            if !self.h_prev[oi].is_finite() {
                return Err(Error::NumericalDivergence { step: step_index });
            }
        }
        trace.h.extend_from_slice(&self.h_prev);
        trace.steps += 1;
        Ok(())
    }

    /// Value of a node's output at absolute time `t_abs`, as seen from a
    /// trace whose window starts at `trace.time0`. Pre-window values come
    /// from the snapshot ring; values before the sequence start are zero.
    fn traced_value(&self, trace: &WindowTrace, t_abs: i64, src: usize) -> f64 {
        let t0 = trace.time0 as i64;
        if t_abs >= t0 {
            trace.h[(t_abs - t0) as usize * self.nodes.len() + src]
        } else if t_abs >= 0 && t_abs >= t0 - self.ring_len as i64 {
            let slot = (t_abs as usize) % self.ring_len;
            trace.ring0[slot * self.nodes.len() + src]
        } else {
            0.0
        }
    }

    /// Reverse one window. Seeds the output error from `targets` rows
    /// `[trace.time0, trace.time0 + steps)`, accumulates parameter gradients
    /// into `grad` (scaled by `loss_scale`, the 1/N of the mean loss), and
    /// returns the window's summed squared and absolute errors.
    pub fn backward_window(
        &self,
        trace: &WindowTrace,
        targets: &Matrix,
        loss_scale: f64,
        grad: &mut [f64],
    ) -> (f64, f64) {
        assert_eq!(grad.len(), self.params.len());
        let n = self.nodes.len();
        let w = trace.steps;
        let mut dh = vec![0.0; w * n];
        let mut dc = vec![0.0; w * n];
        let mut sse = 0.0;
        let mut sae = 0.0;
        for t in 0..w {
            let target_row = targets.row(trace.time0 + t);
            for (j, &oi) in self.output_nodes.iter().enumerate() {
                let y = trace.h[t * n + oi];
                let err = y - target_row[j];
                sse += err * err;
                sae += err.abs();
                dh[t * n + oi] += 2.0 * err * loss_scale;
            }
        }

        for t in (0..w).rev() {
            let t_abs = trace.time0 as i64 + t as i64;
            for i in (0..n).rev() {
                let node = &self.nodes[i];
                if node.kind == NodeType::Input {
                    continue;
                }
                let dh_i = dh[t * n + i];
                let dc_i = dc[t * n + i];
                if dh_i == 0.0 && dc_i == 0.0 {
                    continue;
                }
                let x = trace.x[t * n + i];
                let h = trace.h[t * n + i];
                let (hp, cp) = if t > 0 {
                    let hp = trace.h[(t - 1) * n + i];
                    let cp = if node.kind == NodeType::Lstm {
                        trace.aux[(t - 1) * self.aux_total + node.aux_off + 4]
                    } else {
                        0.0
                    };
                    (hp, cp)
                } else {
                    (trace.h_prev0[i], trace.c_prev0[i])
                };
                let aux = &trace.aux
                    [t * self.aux_total + node.aux_off..t * self.aux_total + node.aux_off + cell::aux_width(node.kind)];
                let pb = node.param_off..node.param_off + node.kind.param_len();
                let bp = cell::backward(
                    node.kind,
                    &self.params[pb.clone()],
                    x,
                    hp,
                    cp,
                    aux,
                    h,
                    dh_i,
                    dc_i,
                    &mut grad[pb],
                );
                if t > 0 {
                    dh[(t - 1) * n + i] += bp.dhp;
                    dc[(t - 1) * n + i] += bp.dcp;
                }
                let dx = bp.dx;
                if dx != 0.0 {
                    for &(src, slot) in &node.in_ff {
                        grad[slot] += dx * trace.h[t * n + src];
                        dh[t * n + src] += dx * self.params[slot];
                    }
                    for &(src, skip, slot) in &node.in_rec {
                        let val = self.traced_value(trace, t_abs - skip as i64, src);
                        grad[slot] += dx * val;
                        if t >= skip as usize {
                            dh[(t - skip as usize) * n + src] += dx * self.params[slot];
                        }
                    }
                }
            }
        }
        (sse, sae)
    }

    /// Loss and exact gradient over a whole series treated as one window,
    /// from a fresh state. Loss is the MSE over all timesteps and outputs.
    pub fn backward(&mut self, series: &Matrix, targets: &Matrix) -> Result<(Vec<f64>, f64)> {
        if targets.rows() != series.rows() || targets.cols() != self.n_outputs() {
            return Err(Error::InvalidDimension(format!(
                "targets {}x{} incompatible with series rows {} and {} outputs",
                targets.rows(),
                targets.cols(),
                series.rows(),
                self.n_outputs()
            )));
        }
        self.reset_state();
        let mut trace = self.begin_window();
        for t in 0..series.rows() {
            self.step_window(series.row(t), &mut trace)?;
        }
        let count = (series.rows() * self.n_outputs()) as f64;
        let mut grad = vec![0.0; self.params.len()];
        let (sse, _) = self.backward_window(&trace, targets, 1.0 / count, &mut grad);
        Ok((grad, sse / count))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{seed_genome, EdgeGene, InnovationCounter, NodeGene, RecurrentEdgeGene};

    fn single_hidden(kind: NodeType) -> Genome {
        let c = InnovationCounter::new();
        let mut g = seed_genome(1, 1, &c).unwrap();
        g.edges[0].enabled = false;
        let hid = c.next_node();
        g.nodes.push(NodeGene::new(hid, kind, 0.5));
        let in_id = g.input_nodes().next().unwrap().innovation;
        let out_id = g.output_nodes().next().unwrap().innovation;
        g.edges.push(EdgeGene {
            innovation: c.next_edge(),
            source: in_id,
            target: hid,
            weight: 1.0,
            enabled: true,
        });
        g.edges.push(EdgeGene {
            innovation: c.next_edge(),
            source: hid,
            target: out_id,
            weight: 1.0,
            enabled: true,
        });
        g.sort_genes();
        g
    }

    #[test]
    fn seed_topology_and_horizon() {
        let c = InnovationCounter::new();
        let g = seed_genome(2, 1, &c).unwrap();
        let p = Phenotype::build(&g);
        assert_eq!(p.topo_innovations(), vec![1, 2, 3]);
        assert_eq!(p.horizon(), 0);
    }

    #[test]
    fn rec_edge_sets_horizon() {
        let c = InnovationCounter::new();
        let mut g = seed_genome(1, 1, &c).unwrap();
        let out = g.output_nodes().next().unwrap().innovation;
        g.rec_edges.push(RecurrentEdgeGene {
            innovation: c.next_edge(),
            source: out,
            target: out,
            time_skip: 7,
            weight: 0.5,
            enabled: true,
        });
        assert_eq!(Phenotype::build(&g).horizon(), 7);
    }

    #[test]
    fn disabled_node_excluded_from_topo() {
        let mut g = single_hidden(NodeType::SimpleNeuron);
        let hid = g.nodes.iter().find(|n| n.node_type.is_hidden()).unwrap().innovation;
        g.node_mut(hid).unwrap().enabled = false;
        let p = Phenotype::build(&g);
        assert!(!p.topo_innovations().contains(&hid));
        // The output now has no enabled inbound path.
        assert_eq!(p.disconnected_outputs.len(), 1);
    }

    #[test]
    fn zero_weight_simple_genome_outputs_zero() {
        let g = single_hidden(NodeType::SimpleNeuron);
        let mut zeroed = g.clone();
        for e in &mut zeroed.edges {
            e.weight = 0.0;
        }
        let mut p = Phenotype::build(&zeroed);
        let series = Matrix::from_rows(vec![vec![0.3], vec![-0.8], vec![1.0]]);
        let out = p.forward(&series).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_path_scales_input() {
        let c = InnovationCounter::new();
        let mut g = seed_genome(1, 1, &c).unwrap();
        g.edges[0].weight = 1.75;
        let mut p = Phenotype::build(&g);
        let series = Matrix::from_rows(vec![vec![1.0], vec![-2.0], vec![0.5]]);
        let out = p.forward(&series).unwrap();
        for t in 0..3 {
            assert!((out.get(t, 0) - 1.75 * series.get(t, 0)).abs() < 1e-15);
        }
    }

    #[test]
    fn ugrnn_matches_hand_rolled_trace() {
        // Independent oracle: the same three-step recurrence computed with
        // bare scalar arithmetic.
        let g = single_hidden(NodeType::Ugrnn);
        let mut g = g;
        let hid = g
            .nodes
            .iter_mut()
            .find(|n| n.node_type == NodeType::Ugrnn)
            .unwrap();
        let params = [0.4, -0.3, 0.1, 0.8, 0.2, -0.1];
        hid.params = params.to_vec();
        let mut p = Phenotype::build(&g);
        let series = Matrix::from_rows(vec![vec![0.5], vec![0.5], vec![0.5]]);
        let out = p.forward(&series).unwrap();

        let sigma = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = 0.0;
        let mut expect = Vec::new();
        for _ in 0..3 {
            let x = 0.5; // input edge weight 1.0
            let gate = sigma(params[0] * x + params[1] * h + params[2]);
            let cand = (params[3] * x + params[4] * h + params[5]).tanh();
            h = gate * h + (1.0 - gate) * cand;
            expect.push(h); // output edge weight 1.0, output bias 0
        }
        for t in 0..3 {
            assert!(
                (out.get(t, 0) - expect[t]).abs() < 1e-14,
                "t={t}: {} vs {}",
                out.get(t, 0),
                expect[t]
            );
        }
    }

    #[test]
    fn perfect_prediction_zero_loss_zero_grad() {
        let c = InnovationCounter::new();
        let mut g = seed_genome(1, 1, &c).unwrap();
        g.edges[0].weight = 2.0;
        let mut p = Phenotype::build(&g);
        let series = Matrix::from_rows(vec![vec![0.1], vec![0.2], vec![0.3]]);
        let targets = Matrix::from_rows(vec![vec![0.2], vec![0.4], vec![0.6]]);
        let (grad, loss) = p.backward(&series, &targets).unwrap();
        assert!(loss < 1e-30);
        assert!(grad.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn divergence_reports_first_timestep() {
        let c = InnovationCounter::new();
        let mut g = seed_genome(1, 1, &c).unwrap();
        g.edges[0].weight = f64::MAX;
        let mut p = Phenotype::build(&g);
        let series = Matrix::from_rows(vec![vec![1.0], vec![1e300], vec![1.0]]);
        match p.forward(&series) {
            Err(Error::NumericalDivergence { step }) => assert_eq!(step, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn ring_truncation_below_horizon_changes_outputs() {
        // Input -> output rec edge with skip 5: the output at t echoes the
        // input at t-5, so a short buffer must disturb the result.
        let c = InnovationCounter::new();
        let mut g = seed_genome(1, 1, &c).unwrap();
        g.edges[0].weight = 0.0;
        let in_id = g.input_nodes().next().unwrap().innovation;
        let out_id = g.output_nodes().next().unwrap().innovation;
        g.rec_edges.push(RecurrentEdgeGene {
            innovation: c.next_edge(),
            source: in_id,
            target: out_id,
            time_skip: 5,
            weight: 1.0,
            enabled: true,
        });
        let rows: Vec<Vec<f64>> = (0..16).map(|t| vec![(t as f64 * 0.77).sin()]).collect();
        let series = Matrix::from_rows(rows);

        let mut full = Phenotype::build(&g);
        let reference = full.forward(&series).unwrap();
        // Echo check: output at t equals input at t-5.
        for t in 5..16 {
            assert!((reference.get(t, 0) - series.get(t - 5, 0)).abs() < 1e-15);
        }

        let mut exact = Phenotype::build(&g);
        exact.truncate_ring(5); // exactly the horizon
        assert_eq!(exact.forward(&series).unwrap(), reference);

        let mut short = Phenotype::build(&g);
        short.truncate_ring(4); // below the horizon
        assert_ne!(short.forward(&series).unwrap(), reference);
    }

    #[test]
    fn windowed_gradient_matches_single_window() {
        // Two windows with carried state must produce the same gradient sum
        // as one window only when no recurrent path crosses the boundary;
        // for a feed-forward genome the equality is exact.
        let c = InnovationCounter::new();
        let mut g = seed_genome(2, 1, &c).unwrap();
        g.edges[0].weight = 0.3;
        g.edges[1].weight = -0.6;
        let series = Matrix::from_rows((0..8).map(|t| vec![(t as f64).sin(), (t as f64).cos()]).collect());
        let targets = Matrix::from_rows((0..8).map(|t| vec![0.1 * t as f64]).collect());

        let mut p = Phenotype::build(&g);
        let (grad_full, _) = p.backward(&series, &targets).unwrap();

        let mut q = Phenotype::build(&g);
        q.reset_state();
        let mut grad = vec![0.0; q.n_params()];
        let scale = 1.0 / 8.0;
        for half in 0..2 {
            let mut trace = q.begin_window();
            for t in half * 4..(half + 1) * 4 {
                q.step_window(series.row(t), &mut trace).unwrap();
            }
            q.backward_window(&trace, &targets, scale, &mut grad);
        }
        for (a, b) in grad_full.iter().zip(&grad) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
