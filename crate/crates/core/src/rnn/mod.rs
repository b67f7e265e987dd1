//! Phenotype compilation, forward evaluation, backpropagation through time,
//! and training.

pub mod cell;
pub mod phenotype;
pub mod train;

pub use phenotype::{Phenotype, WindowTrace};
pub use train::{evaluate, rescale_gradient, train, EvalScores, TrainConfig, TrainOutcome};
