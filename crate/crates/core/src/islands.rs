//! Steady-state island engine: reproduction-kind selection at configured
//! rates, uniform parent selection, asynchronous training by a worker pool,
//! and bounded elite insertion with structural duplicate suppression.

use std::collections::VecDeque;
use std::sync::mpsc;
use std::sync::{Condvar, Mutex};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::TrainValSplit;
use crate::error::{Error, Result};
use crate::genome::{seed_genome, structural_hash, GeneCounts, Genome, InnovationCounter};
use crate::rnn::train::{train, TrainConfig, TrainOutcome};
use crate::variation::{crossover, mutate_any, MutationKind, VariationConfig, VariationCtx};
use crate::weights::{initialize_genome_weights, SamplerConfig, WeightStrategyTriple};

/// Island layout and reproduction rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandConfig {
    #[serde(default = "default_n_islands")]
    pub n_islands: usize,
    #[serde(default = "default_capacity")]
    pub capacity: usize,
    #[serde(default = "default_p_mutation")]
    pub p_mutation: f64,
    #[serde(default = "default_p_intra")]
    pub p_intra: f64,
    #[serde(default = "default_p_inter")]
    pub p_inter: f64,
}

fn default_n_islands() -> usize {
    10
}
fn default_capacity() -> usize {
    10
}
fn default_p_mutation() -> f64 {
    0.70
}
fn default_p_intra() -> f64 {
    0.20
}
fn default_p_inter() -> f64 {
    0.10
}

impl Default for IslandConfig {
    fn default() -> Self {
        IslandConfig {
            n_islands: default_n_islands(),
            capacity: default_capacity(),
            p_mutation: default_p_mutation(),
            p_intra: default_p_intra(),
            p_inter: default_p_inter(),
        }
    }
}

impl IslandConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_islands == 0 {
            return Err(Error::Config("n_islands must be >= 1".to_string()));
        }
        if self.capacity < 2 {
            return Err(Error::Config(
                "island capacity must be >= 2 for crossover".to_string(),
            ));
        }
        let sum = self.p_mutation + self.p_intra + self.p_inter;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "reproduction rates must sum to 1, got {sum}"
            )));
        }
        if self.p_mutation < 0.0 || self.p_intra < 0.0 || self.p_inter < 0.0 {
            return Err(Error::Config("reproduction rates must be non-negative".to_string()));
        }
        Ok(())
    }
}

/// Fixed-compute budget: every trained genome consumes
/// `bp_epochs_per_genome` epochs out of `total_bp_epochs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub bp_epochs_per_genome: usize,
    pub total_bp_epochs: usize,
}

impl Budget {
    pub fn max_genomes(&self) -> usize {
        self.total_bp_epochs / self.bp_epochs_per_genome
    }

    pub fn validate(&self) -> Result<()> {
        if self.bp_epochs_per_genome == 0 {
            return Err(Error::Config("bp_epochs_per_genome must be >= 1".to_string()));
        }
        if self.max_genomes() == 0 {
            return Err(Error::Config(format!(
                "budget too small: {} total epochs at {} per genome trains nothing",
                self.total_bp_epochs, self.bp_epochs_per_genome
            )));
        }
        Ok(())
    }
}

/// A bounded elite pool, kept sorted by (fitness, generation id) ascending.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Island {
    pub id: usize,
    pub members: Vec<Genome>,
}

impl Island {
    pub fn new(id: usize) -> Island {
        Island {
            id,
            members: Vec::new(),
        }
    }

    fn sort(&mut self) {
        self.members
            .sort_by(|a, b| (a.fitness.unwrap(), a.generation_id)
                .partial_cmp(&(b.fitness.unwrap(), b.generation_id))
                .unwrap());
    }

    pub fn best(&self) -> Option<&Genome> {
        self.members.first()
    }
}

/// Bounded elite insertion. A genome whose structural hash matches an
/// existing member replaces it only when strictly fitter, otherwise it is
/// rejected outright; past that gate, free capacity accepts anything and a
/// full island evicts its worst member for a strictly fitter arrival.
pub fn insert(island: &mut Island, g: Genome, capacity: usize) -> bool {
    let fitness = g.fitness.expect("insert requires a trained genome");
    let hash = structural_hash(&g);
    if let Some(pos) = island
        .members
        .iter()
        .position(|m| structural_hash(m) == hash)
    {
        if fitness < island.members[pos].fitness.unwrap() {
            island.members[pos] = g;
            island.sort();
            return true;
        }
        return false;
    }
    if island.members.len() < capacity {
        island.members.push(g);
        island.sort();
        return true;
    }
    let worst = island.members.last().unwrap().fitness.unwrap();
    if fitness < worst {
        *island.members.last_mut().unwrap() = g;
        island.sort();
        return true;
    }
    false
}

/// How a child was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReproductionKind {
    Mutation(Option<MutationKind>),
    IntraIsland,
    InterIsland,
}

/// Provenance of a generated child.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChildMeta {
    pub island: usize,
    pub kind: ReproductionKind,
    pub second_parent_island: Option<usize>,
}

/// Draw a reproduction kind at the configured rates and produce one
/// untrained child assigned to its origin island. Crossover kinds whose
/// preconditions fail fall back to mutation.
pub fn generate_child<R: Rng + ?Sized>(
    islands: &[Island],
    cfg: &IslandConfig,
    ctx: &VariationCtx,
    rng: &mut R,
) -> Result<(Genome, ChildMeta)> {
    let non_empty: Vec<usize> = (0..islands.len())
        .filter(|&i| !islands[i].members.is_empty())
        .collect();
    if non_empty.is_empty() {
        return Err(Error::EngineNotSeeded);
    }
    let draw: f64 = rng.random();
    enum Kind {
        Mutation,
        Intra,
        Inter,
    }
    let mut kind = if draw < cfg.p_mutation {
        Kind::Mutation
    } else if draw < cfg.p_mutation + cfg.p_intra {
        Kind::Intra
    } else {
        Kind::Inter
    };

    // Fallbacks: crossover needs two trained parents.
    if matches!(kind, Kind::Intra) && !islands.iter().any(|i| i.members.len() >= 2) {
        kind = Kind::Mutation;
    }
    if matches!(kind, Kind::Inter) && non_empty.len() < 2 {
        kind = Kind::Mutation;
    }

    match kind {
        Kind::Mutation => {
            let island = non_empty[rng.random_range(0..non_empty.len())];
            let members = &islands[island].members;
            let parent = &members[rng.random_range(0..members.len())];
            let (child, op) = mutate_any(parent, ctx, rng);
            let mut child = child;
            child.island_of_origin = island as u32;
            Ok((
                child,
                ChildMeta {
                    island,
                    kind: ReproductionKind::Mutation(op),
                    second_parent_island: None,
                },
            ))
        }
        Kind::Intra => {
            let eligible: Vec<usize> = non_empty
                .iter()
                .copied()
                .filter(|&i| islands[i].members.len() >= 2)
                .collect();
            let island = eligible[rng.random_range(0..eligible.len())];
            let members = &islands[island].members;
            let pick = rand::seq::index::sample(rng, members.len(), 2);
            let mut child = crossover(&members[pick.index(0)], &members[pick.index(1)], ctx, rng)?;
            child.island_of_origin = island as u32;
            Ok((
                child,
                ChildMeta {
                    island,
                    kind: ReproductionKind::IntraIsland,
                    second_parent_island: None,
                },
            ))
        }
        Kind::Inter => {
            let oi = rng.random_range(0..non_empty.len());
            let origin = non_empty[oi];
            let others: Vec<usize> = non_empty.iter().copied().filter(|&i| i != origin).collect();
            let other = others[rng.random_range(0..others.len())];
            let a = &islands[origin].members[rng.random_range(0..islands[origin].members.len())];
            let b = &islands[other].members[rng.random_range(0..islands[other].members.len())];
            let mut child = crossover(a, b, ctx, rng)?;
            child.island_of_origin = origin as u32;
            Ok((
                child,
                ChildMeta {
                    island: origin,
                    kind: ReproductionKind::InterIsland,
                    second_parent_island: Some(other),
                },
            ))
        }
    }
}

/// One line of the progress log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub inserted_count: usize,
    pub trained_count: usize,
    pub best_mse: f64,
    pub island_id: usize,
    pub genome_nodes: usize,
    pub genome_edges: usize,
    pub genome_rec_edges: usize,
}

impl TraceRecord {
    pub const CSV_HEADER: &'static str =
        "inserted_count,trained_count,best_mse,island_id,genome_nodes,genome_edges,genome_rec_edges";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.inserted_count,
            self.trained_count,
            self.best_mse,
            self.island_id,
            self.genome_nodes,
            self.genome_edges,
            self.genome_rec_edges
        )
    }
}

/// Everything a search needs besides data and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub strategy: WeightStrategyTriple,
    #[serde(default)]
    pub islands: IslandConfig,
    pub budget: Budget,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub variation: VariationConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    1
}

/// Search output: the global best genome, its scores and sizes, and the
/// per-trained-genome progress trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Genome,
    pub best_mse: f64,
    pub best_mae: f64,
    pub best_counts: GeneCounts,
    pub trace: Vec<TraceRecord>,
    pub trained_count: usize,
    pub total_epochs: usize,
    pub diverged_count: usize,
    /// Final island populations.
    pub islands: Vec<Island>,
}

struct Job {
    genome: Genome,
    island: usize,
}

struct Coordinator {
    islands: Vec<Island>,
    best: Option<(Genome, f64, f64)>,
    trace: Vec<TraceRecord>,
    inserted_count: usize,
    trained_count: usize,
    diverged_count: usize,
    capacity: usize,
}

impl Coordinator {
    fn handle(&mut self, island: usize, outcome: TrainOutcome) {
        self.trained_count += 1;
        let counts = outcome.genome.counts();
        if outcome.diverged {
            self.diverged_count += 1;
        } else {
            let mse = outcome.scores.mse;
            let improved = self.best.as_ref().map(|(_, b, _)| mse < *b).unwrap_or(true);
            if improved {
                self.best = Some((outcome.genome.clone(), mse, outcome.scores.mae));
            }
            if insert(&mut self.islands[island], outcome.genome, self.capacity) {
                self.inserted_count += 1;
            }
        }
        self.trace.push(TraceRecord {
            inserted_count: self.inserted_count,
            trained_count: self.trained_count,
            best_mse: self.best.as_ref().map(|(_, b, _)| *b).unwrap_or(f64::INFINITY),
            island_id: island,
            genome_nodes: counts.nodes,
            genome_edges: counts.edges,
            genome_rec_edges: counts.rec_edges,
        });
    }
}

/// Closable blocking work queue shared by the training workers.
struct WorkQueue {
    state: Mutex<(VecDeque<Job>, bool)>,
    cv: Condvar,
}

impl WorkQueue {
    fn new() -> Self {
        WorkQueue {
            state: Mutex::new((VecDeque::new(), false)),
            cv: Condvar::new(),
        }
    }

    fn push(&self, job: Job) {
        self.state.lock().unwrap().0.push_back(job);
        self.cv.notify_one();
    }

    fn close(&self) {
        self.state.lock().unwrap().1 = true;
        self.cv.notify_all();
    }

    fn pop(&self) -> Option<Job> {
        let mut guard = self.state.lock().unwrap();
        loop {
            if let Some(job) = guard.0.pop_front() {
                return Some(job);
            }
            if guard.1 {
                return None;
            }
            guard = self.cv.wait(guard).unwrap();
        }
    }
}

/// Run one full search: every island seeded with a freshly initialized copy
/// of the same minimal genome, then steady-state generate/train/insert until
/// the epoch budget is spent. Single-worker runs are bit-deterministic for a
/// fixed seed; with more workers results are inserted in completion order.
pub fn run_search(settings: &SearchSettings, data: &TrainValSplit, seed: u64) -> Result<SearchResult> {
    settings.islands.validate()?;
    settings.budget.validate()?;
    settings.train.validate()?;
    let max_genomes = settings.budget.max_genomes();
    let train_cfg = TrainConfig {
        epochs: settings.budget.bp_epochs_per_genome,
        ..settings.train.clone()
    };

    let counter = InnovationCounter::new();
    let seed_structure = seed_genome(data.train.n_inputs(), data.train.n_outputs(), &counter)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coord = Coordinator {
        islands: (0..settings.islands.n_islands).map(Island::new).collect(),
        best: None,
        trace: Vec::with_capacity(max_genomes),
        inserted_count: 0,
        trained_count: 0,
        diverged_count: 0,
        capacity: settings.islands.capacity,
    };

    let mut dispatched = 0usize;
    let mut next_job = |coord: &Coordinator, rng: &mut ChaCha8Rng, dispatched: usize| -> Result<Job> {
        // Seed phase: one initialized copy of the seed structure per island.
        if dispatched < settings.islands.n_islands {
            let island = dispatched;
            let mut g = initialize_genome_weights(
                &seed_structure,
                settings.strategy.initial,
                &settings.sampler,
                rng,
            )?;
            g.generation_id = dispatched as u64;
            g.island_of_origin = island as u32;
            Ok(Job { genome: g, island })
        } else {
            let ctx = VariationCtx {
                strategy: &settings.strategy,
                sampler: &settings.sampler,
                config: &settings.variation,
                counter: &counter,
            };
            let (mut child, meta) = generate_child(&coord.islands, &settings.islands, &ctx, rng)?;
            child.generation_id = dispatched as u64;
            Ok(Job {
                genome: child,
                island: meta.island,
            })
        }
    };

    if settings.workers <= 1 {
        while dispatched < max_genomes {
            let job = next_job(&coord, &mut rng, dispatched)?;
            dispatched += 1;
            let outcome = train(&job.genome, data, &train_cfg)?;
            coord.handle(job.island, outcome);
        }
    } else {
        let queue = WorkQueue::new();
        let (tx, rx) = mpsc::channel::<(usize, Result<TrainOutcome>)>();
        std::thread::scope(|scope| -> Result<()> {
            for _ in 0..settings.workers {
                let queue = &queue;
                let tx = tx.clone();
                let train_cfg = &train_cfg;
                scope.spawn(move || {
                    while let Some(job) = queue.pop() {
                        let outcome = train(&job.genome, data, train_cfg);
                        if tx.send((job.island, outcome)).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(tx);

            let mut completed = 0usize;
            while completed < max_genomes {
                while dispatched < max_genomes && dispatched - completed < settings.workers * 2 {
                    let job = next_job(&coord, &mut rng, dispatched)?;
                    dispatched += 1;
                    queue.push(job);
                }
                let (island, outcome) = rx.recv().expect("workers alive");
                coord.handle(island, outcome?);
                completed += 1;
            }
            queue.close();
            Ok(())
        })?;
    }

    let (best, best_mse, best_mae) = coord.best.ok_or(Error::NumericalDivergence { step: 0 })?;
    let best_counts = best.counts();
    Ok(SearchResult {
        best,
        best_mse,
        best_mae,
        best_counts,
        trace: coord.trace,
        trained_count: coord.trained_count,
        total_epochs: coord.trained_count * settings.budget.bp_epochs_per_genome,
        diverged_count: coord.diverged_count,
        islands: coord.islands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variation::VariationConfig;
    use crate::weights::WeightStrategyTriple;

    fn trained(fitness: f64, generation: u64, seed_weight: f64) -> Genome {
        let c = InnovationCounter::new();
        let mut g = seed_genome(2, 1, &c).unwrap();
        g.edges[0].weight = seed_weight;
        g.fitness = Some(fitness);
        g.generation_id = generation;
        g
    }

    #[test]
    fn insert_examples() {
        let mut island = Island::new(0);
        assert!(insert(&mut island, trained(0.5, 0, 0.1), 3));
        assert_eq!(island.members.len(), 1);

        // Fill to capacity with distinct structures (flip an edge bit).
        let mut b = trained(0.3, 1, 0.2);
        b.edges[0].enabled = false;
        assert!(insert(&mut island, b, 3));
        let mut c = trained(0.4, 2, 0.3);
        c.edges[1].enabled = false;
        assert!(insert(&mut island, c, 3));
        assert_eq!(island.members.len(), 3);

        // Full island, worse than all: rejected, membership unchanged.
        let mut worse = trained(0.9, 3, 0.4);
        worse.rec_edges.clear();
        worse.edges[0].enabled = false;
        worse.edges[1].enabled = false;
        let before: Vec<u64> = island.members.iter().map(|m| m.generation_id).collect();
        assert!(!insert(&mut island, worse, 3));
        let after: Vec<u64> = island.members.iter().map(|m| m.generation_id).collect();
        assert_eq!(before, after);

        // Full island, new best: worst evicted, size stays at capacity.
        let mut best = trained(0.1, 4, 0.5);
        best.edges[0].enabled = false;
        best.edges[1].enabled = false;
        assert!(insert(&mut island, best, 3));
        assert_eq!(island.members.len(), 3);
        assert_eq!(island.best().unwrap().fitness, Some(0.1));
        assert!(island.members.iter().all(|m| m.fitness.unwrap() < 0.5 || m.fitness.unwrap() == 0.3 || m.fitness.unwrap() == 0.4));
    }

    #[test]
    fn insert_duplicate_rules() {
        let mut island = Island::new(0);
        let g = trained(0.5, 0, 0.1);
        assert!(insert(&mut island, g.clone(), 4));
        // Same structure, equal fitness: rejected.
        assert!(!insert(&mut island, trained(0.5, 1, 0.7), 4));
        // Same structure, worse: rejected.
        assert!(!insert(&mut island, trained(0.8, 2, 0.7), 4));
        assert_eq!(island.members.len(), 1);
        // Same structure, strictly better: replaces in place.
        assert!(insert(&mut island, trained(0.2, 3, 0.9), 4));
        assert_eq!(island.members.len(), 1);
        assert_eq!(island.members[0].fitness, Some(0.2));
        assert_eq!(island.members[0].edges[0].weight, 0.9);
    }

    /// Islands populated with clones of one shared seed structure, the way
    /// a real search seeds them, so crossover alignment and fresh innovation
    /// numbers behave.
    fn reproduction_fixture(counter: &InnovationCounter) -> (Vec<Island>, IslandConfig) {
        let base = seed_genome(2, 1, counter).unwrap();
        let mut islands: Vec<Island> = (0..4).map(Island::new).collect();
        let mut gen = 0;
        for island in islands.iter_mut() {
            for k in 0..3 {
                let mut g = base.clone();
                g.fitness = Some(0.2 + 0.05 * k as f64 + island.id as f64 * 0.01);
                g.generation_id = gen;
                gen += 1;
                // Distinct structures so duplicate suppression stays out of
                // the way.
                if k > 0 {
                    g.edges[k - 1].enabled = false;
                }
                assert!(insert(island, g, 10));
            }
        }
        (islands, IslandConfig::default())
    }

    #[test]
    fn reproduction_kind_frequencies() {
        let counter = InnovationCounter::new();
        let (islands, cfg) = reproduction_fixture(&counter);
        let strategy = WeightStrategyTriple::parse("X-L-L").unwrap();
        let sampler = SamplerConfig::default();
        let vcfg = VariationConfig::default();
        let ctx = VariationCtx {
            strategy: &strategy,
            sampler: &sampler,
            config: &vcfg,
            counter: &counter,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let (_, meta) = generate_child(&islands, &cfg, &ctx, &mut rng).unwrap();
            match meta.kind {
                ReproductionKind::Mutation(_) => counts[0] += 1,
                ReproductionKind::IntraIsland => counts[1] += 1,
                ReproductionKind::InterIsland => counts[2] += 1,
            }
            if let ReproductionKind::InterIsland = meta.kind {
                assert_ne!(Some(meta.island), meta.second_parent_island);
            }
        }
        for (count, p) in counts.iter().zip([0.7, 0.2, 0.1]) {
            let expected = n as f64 * p;
            let bound = 3.0 * (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (*count as f64 - expected).abs() <= bound,
                "count {count} vs {expected} +- {bound}"
            );
        }
    }

    #[test]
    fn single_member_population_falls_back_to_mutation() {
        let counter = InnovationCounter::new();
        let mut member = seed_genome(2, 1, &counter).unwrap();
        member.fitness = Some(0.5);
        let mut islands = vec![Island::new(0)];
        assert!(insert(&mut islands[0], member, 10));
        let strategy = WeightStrategyTriple::parse("X-X-X").unwrap();
        let sampler = SamplerConfig::default();
        let vcfg = VariationConfig::default();
        let ctx = VariationCtx {
            strategy: &strategy,
            sampler: &sampler,
            config: &vcfg,
            counter: &counter,
        };
        let cfg = IslandConfig {
            n_islands: 1,
            ..IslandConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..200 {
            let (_, meta) = generate_child(&islands, &cfg, &ctx, &mut rng).unwrap();
            assert!(matches!(meta.kind, ReproductionKind::Mutation(_)));
        }
    }

    #[test]
    fn empty_population_is_an_error() {
        let islands = vec![Island::new(0)];
        let strategy = WeightStrategyTriple::parse("X-X-X").unwrap();
        let sampler = SamplerConfig::default();
        let vcfg = VariationConfig::default();
        let counter = InnovationCounter::new();
        let ctx = VariationCtx {
            strategy: &strategy,
            sampler: &sampler,
            config: &vcfg,
            counter: &counter,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        assert!(matches!(
            generate_child(&islands, &IslandConfig::default(), &ctx, &mut rng),
            Err(Error::EngineNotSeeded)
        ));
    }

    #[test]
    fn budget_arithmetic() {
        let b = Budget {
            bp_epochs_per_genome: 1,
            total_bp_epochs: 100,
        };
        assert_eq!(b.max_genomes(), 100);
        let b = Budget {
            bp_epochs_per_genome: 5,
            total_bp_epochs: 100,
        };
        assert_eq!(b.max_genomes(), 20);
        let b = Budget {
            bp_epochs_per_genome: 10,
            total_bp_epochs: 1000,
        };
        assert_eq!(b.max_genomes(), 100);
        let b = Budget {
            bp_epochs_per_genome: 7,
            total_bp_epochs: 100,
        };
        assert_eq!(b.max_genomes(), 14);
    }

    #[test]
    fn config_validation() {
        let mut cfg = IslandConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.p_mutation = 0.5;
        assert!(cfg.validate().is_err());
        let bad = Budget {
            bp_epochs_per_genome: 0,
            total_bp_epochs: 100,
        };
        assert!(bad.validate().is_err());
    }
}
