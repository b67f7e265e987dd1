//! Scalar cell equations for every node type: forward update and exact
//! reverse-mode partials.
//!
//! Each node carries a single scalar state. `x` is the node's aggregated
//! weighted input for the timestep, `hp` its own output one step earlier,
//! and for LSTM `cp` the previous cell state. Gate weights and biases live
//! in the node gene's parameter block with the layouts below.

use crate::genome::NodeType;

// Parameter block layouts.
//
// SimpleNeuron / Output: [b]
// UGRNN:  [wg, ug, bg, wc, uc, bc]        g = update gate, c = candidate
// MGU:    [wf, uf, bf, wc, uc, bc]        f = forget gate
// GRU:    [wz, uz, bz, wr, ur, br, wc, uc, bc]
// LSTM:   [wi, ui, bi, wf, uf, bf, wo, uo, bo, wc, uc, bc]
// Delta:  [v, alpha, beta1, beta2, bz, br]

/// Index of the LSTM forget-gate bias inside its parameter block. The
/// +1.0 initialization offset is applied at this slot.
pub const LSTM_FORGET_BIAS: usize = 5;

/// Number of intermediate values the cell saves per timestep for backprop.
pub fn aux_width(t: NodeType) -> usize {
    match t {
        NodeType::Input | NodeType::Output | NodeType::SimpleNeuron => 0,
        NodeType::Ugrnn | NodeType::Mgu | NodeType::Delta => 2,
        NodeType::Gru => 3,
        NodeType::Lstm => 5,
    }
}

#[inline]
fn sigmoid(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

/// One cell update. Writes intermediates into `aux` (length `aux_width`)
/// and returns `(h, c)` where `c` is the new LSTM cell state (0 elsewhere).
pub fn forward(t: NodeType, p: &[f64], x: f64, hp: f64, cp: f64, aux: &mut [f64]) -> (f64, f64) {
    match t {
        NodeType::Input => (x, 0.0),
        NodeType::Output => (x + p[0], 0.0),
        NodeType::SimpleNeuron => ((x + p[0]).tanh(), 0.0),
        NodeType::Ugrnn => {
            let g = sigmoid(p[0] * x + p[1] * hp + p[2]);
            let c = (p[3] * x + p[4] * hp + p[5]).tanh();
            aux[0] = g;
            aux[1] = c;
            (g * hp + (1.0 - g) * c, 0.0)
        }
        NodeType::Mgu => {
            let f = sigmoid(p[0] * x + p[1] * hp + p[2]);
            let c = (p[3] * x + p[4] * (f * hp) + p[5]).tanh();
            aux[0] = f;
            aux[1] = c;
            ((1.0 - f) * hp + f * c, 0.0)
        }
        NodeType::Gru => {
            let z = sigmoid(p[0] * x + p[1] * hp + p[2]);
            let r = sigmoid(p[3] * x + p[4] * hp + p[5]);
            let c = (p[6] * x + p[7] * (r * hp) + p[8]).tanh();
            aux[0] = z;
            aux[1] = r;
            aux[2] = c;
            ((1.0 - z) * hp + z * c, 0.0)
        }
        NodeType::Lstm => {
            let i = sigmoid(p[0] * x + p[1] * hp + p[2]);
            let f = sigmoid(p[3] * x + p[4] * hp + p[5]);
            let o = sigmoid(p[6] * x + p[7] * hp + p[8]);
            let u = (p[9] * x + p[10] * hp + p[11]).tanh();
            let c = f * cp + i * u;
            aux[0] = i;
            aux[1] = f;
            aux[2] = o;
            aux[3] = u;
            aux[4] = c;
            (o * c.tanh(), c)
        }
        NodeType::Delta => {
            // Gated composition: second-order and linear terms feed the inner
            // candidate, a data-driven gate mixes it with the previous state.
            let (v, alpha, beta1, beta2, bz, br) = (p[0], p[1], p[2], p[3], p[4], p[5]);
            let pre = alpha * v * hp * x + beta1 * v * hp + beta2 * x + bz;
            let zc = pre.tanh();
            let r = sigmoid(x + br);
            aux[0] = zc;
            aux[1] = r;
            ((1.0 - r) * zc + r * hp, 0.0)
        }
    }
}

/// Gradients flowing out of one cell update.
pub struct Backprop {
    /// d loss / d aggregated input.
    pub dx: f64,
    /// d loss / d previous own output.
    pub dhp: f64,
    /// d loss / d previous cell state (LSTM only).
    pub dcp: f64,
}

/// Reverse one cell update. `dh` is the loss gradient at the node's output,
/// `dc_in` the gradient at the LSTM cell state arriving from the next step.
/// Parameter gradients are accumulated into `dparams`.
pub fn backward(
    t: NodeType,
    p: &[f64],
    x: f64,
    hp: f64,
    cp: f64,
    aux: &[f64],
    h: f64,
    dh: f64,
    dc_in: f64,
    dparams: &mut [f64],
) -> Backprop {
    match t {
        NodeType::Input => Backprop {
            dx: dh,
            dhp: 0.0,
            dcp: 0.0,
        },
        NodeType::Output => {
            dparams[0] += dh;
            Backprop {
                dx: dh,
                dhp: 0.0,
                dcp: 0.0,
            }
        }
        NodeType::SimpleNeuron => {
            let dpre = dh * (1.0 - h * h);
            dparams[0] += dpre;
            Backprop {
                dx: dpre,
                dhp: 0.0,
                dcp: 0.0,
            }
        }
        NodeType::Ugrnn => {
            let (g, c) = (aux[0], aux[1]);
            let pg = dh * (hp - c) * g * (1.0 - g);
            let pc = dh * (1.0 - g) * (1.0 - c * c);
            dparams[0] += pg * x;
            dparams[1] += pg * hp;
            dparams[2] += pg;
            dparams[3] += pc * x;
            dparams[4] += pc * hp;
            dparams[5] += pc;
            Backprop {
                dx: pg * p[0] + pc * p[3],
                dhp: dh * g + pg * p[1] + pc * p[4],
                dcp: 0.0,
            }
        }
        NodeType::Mgu => {
            let (f, c) = (aux[0], aux[1]);
            let pc = dh * f * (1.0 - c * c);
            let df = dh * (c - hp) + pc * p[4] * hp;
            let pf = df * f * (1.0 - f);
            dparams[0] += pf * x;
            dparams[1] += pf * hp;
            dparams[2] += pf;
            dparams[3] += pc * x;
            dparams[4] += pc * (f * hp);
            dparams[5] += pc;
            Backprop {
                dx: pf * p[0] + pc * p[3],
                dhp: dh * (1.0 - f) + pf * p[1] + pc * p[4] * f,
                dcp: 0.0,
            }
        }
        NodeType::Gru => {
            let (z, r, c) = (aux[0], aux[1], aux[2]);
            let pc = dh * z * (1.0 - c * c);
            let pz = dh * (c - hp) * z * (1.0 - z);
            let pr = pc * p[7] * hp * r * (1.0 - r);
            dparams[0] += pz * x;
            dparams[1] += pz * hp;
            dparams[2] += pz;
            dparams[3] += pr * x;
            dparams[4] += pr * hp;
            dparams[5] += pr;
            dparams[6] += pc * x;
            dparams[7] += pc * (r * hp);
            dparams[8] += pc;
            Backprop {
                dx: pz * p[0] + pr * p[3] + pc * p[6],
                dhp: dh * (1.0 - z) + pz * p[1] + pr * p[4] + pc * p[7] * r,
                dcp: 0.0,
            }
        }
        NodeType::Lstm => {
            let (i, f, o, u, c) = (aux[0], aux[1], aux[2], aux[3], aux[4]);
            let tc = c.tanh();
            let dc = dh * o * (1.0 - tc * tc) + dc_in;
            let pi = dc * u * i * (1.0 - i);
            let pf = dc * cp * f * (1.0 - f);
            let po = dh * tc * o * (1.0 - o);
            let pu = dc * i * (1.0 - u * u);
            dparams[0] += pi * x;
            dparams[1] += pi * hp;
            dparams[2] += pi;
            dparams[3] += pf * x;
            dparams[4] += pf * hp;
            dparams[5] += pf;
            dparams[6] += po * x;
            dparams[7] += po * hp;
            dparams[8] += po;
            dparams[9] += pu * x;
            dparams[10] += pu * hp;
            dparams[11] += pu;
            Backprop {
                dx: pi * p[0] + pf * p[3] + po * p[6] + pu * p[9],
                dhp: pi * p[1] + pf * p[4] + po * p[7] + pu * p[10],
                dcp: dc * f,
            }
        }
        NodeType::Delta => {
            let (v, alpha, beta1, beta2) = (p[0], p[1], p[2], p[3]);
            let (zc, r) = (aux[0], aux[1]);
            let ppre = dh * (1.0 - r) * (1.0 - zc * zc);
            let pr = dh * (hp - zc) * r * (1.0 - r);
            dparams[0] += ppre * (alpha * hp * x + beta1 * hp);
            dparams[1] += ppre * (v * hp * x);
            dparams[2] += ppre * (v * hp);
            dparams[3] += ppre * x;
            dparams[4] += ppre;
            dparams[5] += pr;
            Backprop {
                dx: ppre * (alpha * v * hp + beta2) + pr,
                dhp: dh * r + ppre * (alpha * v * x + beta1 * v),
                dcp: 0.0,
            }
        }
    }
}
