//! Backpropagation-through-time training with Nesterov momentum, gradient
//! norm scaling/boosting, and validation scoring.

use serde::{Deserialize, Serialize};

use crate::data::{Matrix, TrainValSplit};
use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::rnn::phenotype::Phenotype;

/// Training hyperparameters. Defaults follow the engine's standard setup:
/// eta = 0.001 with Nesterov mu = 0.9, gradient scaling above norm 1.0 and
/// boosting below 0.05.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_grad_clip_high")]
    pub grad_clip_high: f64,
    #[serde(default = "default_grad_boost_low")]
    pub grad_boost_low: f64,
    /// BPTT window length; state carries across windows, gradients do not.
    #[serde(default = "default_bptt_window")]
    pub bptt_window: usize,
}

fn default_learning_rate() -> f64 {
    0.001
}
fn default_momentum() -> f64 {
    0.9
}
fn default_epochs() -> usize {
    10
}
fn default_grad_clip_high() -> f64 {
    1.0
}
fn default_grad_boost_low() -> f64 {
    0.05
}
fn default_bptt_window() -> usize {
    500
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_learning_rate(),
            momentum: default_momentum(),
            epochs: default_epochs(),
            grad_clip_high: default_grad_clip_high(),
            grad_boost_low: default_grad_boost_low(),
            bptt_window: default_bptt_window(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0,1), got {}",
                self.momentum
            )));
        }
        if !(self.grad_boost_low < self.grad_clip_high) {
            return Err(Error::Config(format!(
                "grad_boost_low {} must be < grad_clip_high {}",
                self.grad_boost_low, self.grad_clip_high
            )));
        }
        if self.bptt_window == 0 {
            return Err(Error::Config("bptt_window must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Renormalize a gradient by its L2 norm: scale down when the norm exceeds
/// `grad_clip_high`, boost up when it is positive but below `grad_boost_low`,
/// leave it untouched otherwise (zero vectors included).
pub fn rescale_gradient(grad: &mut [f64], cfg: &TrainConfig) {
    let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() {
        // Overflowed norms are left for the caller's divergence handling.
        return;
    }
    let factor = if norm > cfg.grad_clip_high {
        cfg.grad_clip_high / norm
    } else if norm > 0.0 && norm < cfg.grad_boost_low {
        cfg.grad_boost_low / norm
    } else {
        return;
    };
    for v in grad.iter_mut() {
        *v *= factor;
    }
}

/// Prediction quality of a genome on one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub mse: f64,
    pub mae: f64,
}

/// Outcome of training one genome: the genome with trained weights written
/// back and fitness set to the validation MSE, plus reporting metrics.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub genome: Genome,
    pub scores: EvalScores,
    /// Training aborted on non-finite numbers; fitness is the +inf sentinel.
    pub diverged: bool,
}

fn scores_from(outputs: &Matrix, targets: &Matrix) -> EvalScores {
    let n = (outputs.rows() * outputs.cols()) as f64;
    let mut sse = 0.0;
    let mut sae = 0.0;
    for (y, t) in outputs.values().iter().zip(targets.values()) {
        let e = y - t;
        sse += e * e;
        sae += e.abs();
    }
    EvalScores {
        mse: sse / n,
        mae: sae / n,
    }
}

/// Mean squared and absolute error of a genome's predictions over a series.
pub fn evaluate(g: &Genome, series: &Matrix, targets: &Matrix) -> Result<EvalScores> {
    let mut p = Phenotype::build(g);
    evaluate_phenotype(&mut p, series, targets)
}

pub fn evaluate_phenotype(p: &mut Phenotype, series: &Matrix, targets: &Matrix) -> Result<EvalScores> {
    let outputs = p.forward(series)?;
    Ok(scores_from(&outputs, targets))
}

/// Train a genome: `epochs` full passes over the training split, one
/// Nesterov-momentum step per pass on the full-sequence gradient (computed
/// over bounded BPTT windows), gradients renormalized each step. Weights are
/// written back into the genes; fitness is the validation MSE.
///
/// Divergence never panics: the genome comes back flagged with fitness +inf
/// so island ordering stays total.
pub fn train(g: &Genome, data: &TrainValSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let series = data.train.input_matrix();
    let targets = data.train.output_matrix();
    let val_series = data.validation.input_matrix();
    let val_targets = data.validation.output_matrix();

    let mut phenotype = Phenotype::build(g);
    let mut genome = g.clone();
    let n = phenotype.n_params();
    let mut velocity = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let t_total = series.rows();
    let loss_scale = 1.0 / (t_total * targets.cols()).max(1) as f64;

    let diverged = 'training: {
        for _epoch in 0..cfg.epochs {
            grad.iter_mut().for_each(|v| *v = 0.0);
            phenotype.reset_state();
            let mut t = 0;
            while t < t_total {
                let end = (t + cfg.bptt_window).min(t_total);
                let mut trace = phenotype.begin_window();
                for step in t..end {
                    if phenotype.step_window(series.row(step), &mut trace).is_err() {
                        break 'training true;
                    }
                }
                phenotype.backward_window(&trace, &targets, loss_scale, &mut grad);
                t = end;
            }
            if grad.iter().any(|v| !v.is_finite()) {
                break 'training true;
            }
            rescale_gradient(&mut grad, cfg);
            // Nesterov momentum in the velocity form: the lookahead is
            // folded into the parameter update.
            let mu = cfg.momentum;
            let lr = cfg.learning_rate;
            let params = phenotype.params().to_vec();
            let mut updated = params;
            for k in 0..n {
                let v_new = mu * velocity[k] - lr * grad[k];
                updated[k] += -mu * velocity[k] + (1.0 + mu) * v_new;
                velocity[k] = v_new;
            }
            phenotype.set_params(&updated);
        }
        false
    };

    if diverged {
        genome.fitness = Some(f64::INFINITY);
        return Ok(TrainOutcome {
            genome,
            scores: EvalScores {
                mse: f64::INFINITY,
                mae: f64::INFINITY,
            },
            diverged: true,
        });
    }

    phenotype.write_back(&mut genome);
    match evaluate_phenotype(&mut phenotype, &val_series, &val_targets) {
        Ok(scores) if scores.mse.is_finite() => {
            genome.fitness = Some(scores.mse);
            Ok(TrainOutcome {
                genome,
                scores,
                diverged: false,
            })
        }
        _ => {
            genome.fitness = Some(f64::INFINITY);
            Ok(TrainOutcome {
                genome,
                scores: EvalScores {
                    mse: f64::INFINITY,
                    mae: f64::INFINITY,
                },
                diverged: true,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Matrix, NormalizationParams, TimeSeriesSet, TrainValSplit};
    use crate::genome::{seed_genome, InnovationCounter};

    fn norm_identity(cols: usize) -> NormalizationParams {
        NormalizationParams {
            min: vec![0.0; cols],
            max: vec![1.0; cols],
        }
    }

    fn linear_split(w: f64) -> (Genome, TrainValSplit) {
        let c = InnovationCounter::new();
        let mut g = seed_genome(1, 1, &c).unwrap();
        g.edges[0].weight = w;
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|t| {
                let x = ((t as f64) * 0.37).sin() * 0.5;
                vec![x, 2.0 * x]
            })
            .collect();
        let make = |r: &[Vec<f64>]| TimeSeriesSet {
            column_names: vec!["x".into(), "y".into()],
            values: Matrix::from_rows(r.to_vec()),
            input_columns: vec![0],
            output_columns: vec![1],
        };
        let split = TrainValSplit {
            train: make(&rows[..30]),
            validation: make(&rows[30..]),
            split_fraction: 0.75,
            norm: norm_identity(2),
        };
        (g, split)
    }

    #[test]
    fn rescale_thresholds() {
        let cfg = TrainConfig::default();
        let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();

        let mut big = vec![4.0, 0.0, 0.0];
        rescale_gradient(&mut big, &cfg);
        assert!((norm(&big) - 1.0).abs() < 1e-12);

        let mut tiny = vec![0.0, 0.01, 0.0];
        rescale_gradient(&mut tiny, &cfg);
        assert!((norm(&tiny) - 0.05).abs() < 1e-12);

        let mut mid = vec![0.3, 0.4];
        let before = mid.clone();
        rescale_gradient(&mut mid, &cfg);
        assert_eq!(mid, before);

        let mut zero = vec![0.0, 0.0];
        rescale_gradient(&mut zero, &cfg);
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn rescale_is_idempotent_and_direction_preserving() {
        let cfg = TrainConfig::default();
        for scale in [10.0, 0.001, 0.3] {
            let g0 = vec![0.6 * scale, -0.8 * scale];
            let mut g1 = g0.clone();
            rescale_gradient(&mut g1, &cfg);
            let mut g2 = g1.clone();
            rescale_gradient(&mut g2, &cfg);
            for i in 0..2 {
                assert!((g1[i] - g2[i]).abs() < 1e-12, "not idempotent");
            }
            // Non-negative scalar multiple of the input.
            let ratio = g1[0] / g0[0];
            assert!(ratio > 0.0);
            assert!((g1[1] / g0[1] - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_epochs_keeps_weights_and_scores_untrained() {
        let (g, split) = linear_split(0.5);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&g, &split, &cfg).unwrap();
        assert_eq!(out.genome.edges[0].weight, 0.5);
        let direct = evaluate(
            &g,
            &split.validation.input_matrix(),
            &split.validation.output_matrix(),
        )
        .unwrap();
        assert_eq!(out.genome.fitness, Some(direct.mse));
        assert_eq!(out.scores.mse, direct.mse);
    }

    #[test]
    fn linear_weight_approaches_two() {
        let cfg = |epochs| TrainConfig {
            epochs,
            learning_rate: 0.05,
            momentum: 0.9,
            ..TrainConfig::default()
        };
        let mut errs = Vec::new();
        for epochs in [0, 10, 40, 160] {
            let (g, split) = linear_split(0.0);
            let out = train(&g, &split, &cfg(epochs)).unwrap();
            errs.push((out.genome.edges[0].weight - 2.0).abs());
        }
        for pair in errs.windows(2) {
            assert!(pair[1] < pair[0], "error not decreasing: {errs:?}");
        }
        assert!(errs.last().unwrap() < &0.1, "final error {errs:?}");
    }

    #[test]
    fn zero_momentum_single_step_is_plain_gradient_descent() {
        let (g, split) = linear_split(0.25);
        let cfg = TrainConfig {
            epochs: 1,
            momentum: 0.0,
            learning_rate: 0.001,
            ..TrainConfig::default()
        };
        let out = train(&g, &split, &cfg).unwrap();

        // Oracle: one explicit gradient-descent step on the same loss.
        let mut p = Phenotype::build(&g);
        let (mut grad, _) = p
            .backward(&split.train.input_matrix(), &split.train.output_matrix())
            .unwrap();
        rescale_gradient(&mut grad, &cfg);
        let expect = 0.25 - 0.001 * grad[1]; // slot 0 is the output bias
        assert!((out.genome.edges[0].weight - expect).abs() < 1e-15);
    }

    #[test]
    fn divergent_training_gets_infinity_sentinel() {
        let (mut g, split) = linear_split(0.0);
        g.edges[0].weight = 1e300;
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let out = train(&g, &split, &cfg).unwrap();
        assert!(out.diverged);
        assert_eq!(out.genome.fitness, Some(f64::INFINITY));
    }

    #[test]
    fn training_is_deterministic() {
        let (g, split) = linear_split(0.1);
        let cfg = TrainConfig {
            epochs: 25,
            ..TrainConfig::default()
        };
        let a = train(&g, &split, &cfg).unwrap();
        let b = train(&g, &split, &cfg).unwrap();
        for (x, y) in a.genome.all_parameters().zip(b.genome.all_parameters()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.scores.mse.to_bits(), b.scores.mse.to_bits());
    }
}
