//! Whole-search integration tests: budget accounting, monotone best,
//! determinism, island invariants, and the worker pool.

use evoforge_core::data::{synth_series, prepare_split, SynthKind};
use evoforge_core::islands::{run_search, Budget, IslandConfig, SearchSettings};
use evoforge_core::rnn::train::TrainConfig;
use evoforge_core::variation::VariationConfig;
use evoforge_core::weights::{SamplerConfig, WeightStrategyTriple};

fn desk_settings(strategy: &str, per: usize, total: usize, workers: usize) -> SearchSettings {
    SearchSettings {
        strategy: WeightStrategyTriple::parse(strategy).unwrap(),
        islands: IslandConfig {
            n_islands: 4,
            capacity: 5,
            ..IslandConfig::default()
        },
        budget: Budget {
            bp_epochs_per_genome: per,
            total_bp_epochs: total,
        },
        sampler: SamplerConfig::default(),
        variation: VariationConfig::default(),
        train: TrainConfig::default(),
        workers,
    }
}

fn small_data() -> evoforge_core::data::TrainValSplit {
    let ts = synth_series(SynthKind::NoisyAr { noise: 0.02 }, 180, 11).unwrap();
    prepare_split(&ts, 2.0 / 3.0, false).unwrap()
}

#[test]
fn budget_of_one_hundred_single_epoch_trains_exactly_one_hundred() {
    let data = small_data();
    let settings = desk_settings("X-L-L", 1, 100, 1);
    let result = run_search(&settings, &data, 5).unwrap();
    assert_eq!(result.trained_count, 100);
    assert_eq!(result.trace.len(), 100);
    assert_eq!(result.total_epochs, 100);
}

#[test]
fn running_best_is_non_increasing() {
    let data = small_data();
    let settings = desk_settings("K-L-L", 2, 120, 1);
    let result = run_search(&settings, &data, 6).unwrap();
    let mut last = f64::INFINITY;
    for t in &result.trace {
        assert!(t.best_mse <= last);
        last = t.best_mse;
    }
    assert_eq!(result.best_mse, last);
}

#[test]
fn same_seed_single_worker_is_identical() {
    let data = small_data();
    let settings = desk_settings("X-X-X", 2, 80, 1);
    let a = run_search(&settings, &data, 7).unwrap();
    let b = run_search(&settings, &data, 7).unwrap();
    assert_eq!(
        serde_json::to_string(&a.trace).unwrap(),
        serde_json::to_string(&b.trace).unwrap()
    );
    assert_eq!(a.best, b.best);
    for (x, y) in a.best.all_parameters().zip(b.best.all_parameters()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    let c = run_search(&settings, &data, 8).unwrap();
    assert_ne!(
        serde_json::to_string(&a.trace).unwrap(),
        serde_json::to_string(&c.trace).unwrap()
    );
}

#[test]
fn island_members_are_trained_and_reproducible() {
    let data = small_data();
    let settings = desk_settings("X-L-L", 2, 100, 1);
    let result = run_search(&settings, &data, 9).unwrap();
    let val_in = data.validation.input_matrix();
    let val_out = data.validation.output_matrix();
    let mut total_members = 0;
    for island in &result.islands {
        assert!(island.members.len() <= settings.islands.capacity);
        for m in &island.members {
            let fitness = m.fitness.expect("island member must be trained");
            let scores = evoforge_core::rnn::train::evaluate(m, &val_in, &val_out).unwrap();
            let rel = (scores.mse - fitness).abs() / fitness.abs().max(1e-300);
            assert!(rel < 1e-10, "stored fitness {fitness} vs re-eval {}", scores.mse);
            total_members += 1;
        }
    }
    assert!(total_members > 0);
}

#[test]
fn multi_worker_consumes_exact_budget() {
    let data = small_data();
    let settings = desk_settings("K-K-K", 2, 60, 3);
    let result = run_search(&settings, &data, 10).unwrap();
    assert_eq!(result.trained_count, 30);
    assert_eq!(result.total_epochs, 60);
    assert!(result.best_mse.is_finite());
}

#[test]
fn search_improves_over_the_seed_networks() {
    let data = small_data();
    let settings = desk_settings("X-L-L", 4, 400, 1);
    let result = run_search(&settings, &data, 12).unwrap();
    // The first trace entries are the island seeds; the final best must
    // strictly improve on the best seed.
    let best_seed = result
        .trace
        .iter()
        .take(settings.islands.n_islands)
        .map(|t| t.best_mse)
        .fold(f64::INFINITY, f64::min);
    assert!(
        result.best_mse < best_seed,
        "no improvement: best {} vs seeds {}",
        result.best_mse,
        best_seed
    );
}
