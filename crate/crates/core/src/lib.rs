//! Neuroevolution engine for recurrent neural networks on time-series
//! prediction: direct-encoded graph genomes with innovation numbers, a suite
//! of memory-cell node types, deep recurrent connections, island-based
//! steady-state evolution, and pluggable weight initialization/inheritance
//! strategies (uniform random, Xavier, Kaiming, and Lamarckian).

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod genome;
pub mod gnm;
pub mod islands;
pub mod rnn;
pub mod stats;
pub mod variation;
pub mod weights;

pub use config::{apply_env_overrides, load_toml, DatasetConfig, ExperimentPlan, SearchSpec};
pub use error::{Error, Result};
pub use genome::{
    seed_genome, structural_hash, EdgeGene, GeneCounts, Genome, InnovationCounter, NodeGene,
    NodeType, RecurrentEdgeGene,
};
pub use islands::{
    generate_child, insert, run_search, Budget, Island, IslandConfig, SearchResult, SearchSettings,
    TraceRecord,
};
pub use rnn::{evaluate, rescale_gradient, train, EvalScores, Phenotype, TrainConfig, TrainOutcome};
pub use stats::{
    mann_whitney, mann_whitney_with, pairwise_matrix, summarize, Alternative, PairwiseMatrix,
    RepeatDigest, RepeatSummary, UTestMethod, UTestResult,
};
pub use variation::{
    applicable_kinds, crossover, mutate, mutate_any, CrossoverKind, MutationKind, VariationConfig,
    VariationCtx,
};
pub use weights::{
    crossover_r, initialize_genome_weights, lamarckian_blend, lamarckian_mutation_sample,
    weight_stats, FanCounts, InheritStrategy, InitialStrategy, SamplerConfig, WeightStats,
    WeightStrategyTriple,
};
