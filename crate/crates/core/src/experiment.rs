//! Experiment orchestration: the strategy-combination by epoch-budget
//! matrix, repeated seeded searches with cell-granular persistence and
//! resume, and report generation (summary table, convergence traces,
//! pairwise significance matrices).

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentPlan;
use crate::data::TrainValSplit;
use crate::error::{Error, Result};
use crate::islands::{run_search, Budget, SearchResult, SearchSettings};
use crate::stats::{pairwise_matrix, summarize, Alternative, RepeatDigest};
use crate::weights::WeightStrategyTriple;

/// One repeat's digest inside a cell record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub seed: u64,
    pub best_mse: f64,
    pub best_mae: f64,
    pub nodes: usize,
    pub edges: usize,
    pub rec_edges: usize,
    /// Running best validation MSE after each trained genome.
    pub convergence: Vec<f64>,
}

impl RepeatRecord {
    fn from_result(seed: u64, r: &SearchResult) -> RepeatRecord {
        RepeatRecord {
            seed,
            best_mse: r.best_mse,
            best_mae: r.best_mae,
            nodes: r.best_counts.nodes,
            edges: r.best_counts.edges,
            rec_edges: r.best_counts.rec_edges,
            convergence: r.trace.iter().map(|t| t.best_mse).collect(),
        }
    }

    fn digest(&self) -> RepeatDigest {
        RepeatDigest {
            best_mae: self.best_mae,
            nodes: self.nodes,
            edges: self.edges,
            rec_edges: self.rec_edges,
        }
    }
}

/// Persisted outcome of one (strategy, budget) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub bp_epochs: usize,
    pub total_epoch_budget: usize,
    pub base_seed: u64,
    pub repeats: Vec<RepeatRecord>,
}

impl RunRecord {
    pub fn file_name(label: &str, bp_epochs: usize) -> String {
        format!("cell_{label}_{bp_epochs}.json")
    }
}

/// Counts of work done by [`run_plan`], for resume verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub executed_cells: usize,
    pub loaded_cells: usize,
}

fn records_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("records")
}

fn reports_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("reports")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn load_record(path: &Path, expected_repeats: usize) -> Option<RunRecord> {
    let text = std::fs::read_to_string(path).ok()?;
    let record: RunRecord = serde_json::from_str(&text).ok()?;
    (record.repeats.len() == expected_repeats).then_some(record)
}

struct Cell {
    label: String,
    bp_epochs: usize,
    path: PathBuf,
}

fn run_cell(plan: &ExperimentPlan, data: &TrainValSplit, cell: &Cell, workers: usize) -> Result<RunRecord> {
    let settings = SearchSettings {
        strategy: WeightStrategyTriple::parse(&cell.label)?,
        islands: plan.islands.clone(),
        budget: Budget {
            bp_epochs_per_genome: cell.bp_epochs,
            total_bp_epochs: plan.plan.total_epoch_budget,
        },
        sampler: plan.sampler.clone(),
        variation: plan.variation.clone(),
        train: plan.train.clone(),
        workers,
    };
    let mut repeats = Vec::with_capacity(plan.plan.repeats);
    for r in 0..plan.plan.repeats {
        let seed = plan.plan.base_seed + r as u64;
        let result = run_search(&settings, data, seed)?;
        repeats.push(RepeatRecord::from_result(seed, &result));
    }
    Ok(RunRecord {
        label: cell.label.clone(),
        bp_epochs: cell.bp_epochs,
        total_epoch_budget: plan.plan.total_epoch_budget,
        base_seed: plan.plan.base_seed,
        repeats,
    })
}

/// Execute every (strategy, budget) cell of the plan, skipping cells whose
/// record file already exists with the full repeat count. Records are
/// persisted as they complete, so an interrupted plan resumes at cell
/// granularity.
pub fn run_plan(plan: &ExperimentPlan, out_dir: &Path) -> Result<(Vec<RunRecord>, RunStats)> {
    plan.validate()?;
    let data = plan.dataset.load()?;
    let rec_dir = records_dir(out_dir);
    std::fs::create_dir_all(&rec_dir).map_err(|e| Error::io(rec_dir.display().to_string(), e))?;

    let mut records: Vec<Option<RunRecord>> = Vec::new();
    let mut pending: Vec<(usize, Cell)> = Vec::new();
    let mut loaded = 0usize;
    for &bp in &plan.plan.budgets {
        for label in &plan.plan.strategies {
            let path = rec_dir.join(RunRecord::file_name(label, bp));
            if let Some(existing) = load_record(&path, plan.plan.repeats) {
                loaded += 1;
                records.push(Some(existing));
            } else {
                pending.push((
                    records.len(),
                    Cell {
                        label: label.clone(),
                        bp_epochs: bp,
                        path,
                    },
                ));
                records.push(None);
            }
        }
    }

    let executed = pending.len();
    if plan.plan.parallel_cells && plan.workers > 1 && pending.len() > 1 {
        // Whole cells run concurrently, each search single-worker so every
        // repeat stays bit-deterministic.
        let next = AtomicUsize::new(0);
        let done: Mutex<Vec<(usize, Result<RunRecord>)>> = Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..plan.workers.min(pending.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= pending.len() {
                        break;
                    }
                    let (slot, cell) = &pending[i];
                    let record = run_cell(plan, &data, cell, 1);
                    done.lock().unwrap().push((*slot, record));
                });
            }
        });
        for (slot, record) in done.into_inner().unwrap() {
            let record = record?;
            let cell = pending.iter().find(|(s, _)| *s == slot).map(|(_, c)| c).unwrap();
            write_file(&cell.path, &serde_json::to_string_pretty(&record).unwrap())?;
            records[slot] = Some(record);
        }
    } else {
        for (slot, cell) in &pending {
            let record = run_cell(plan, &data, cell, plan.workers)?;
            write_file(&cell.path, &serde_json::to_string_pretty(&record).unwrap())?;
            records[*slot] = Some(record);
        }
    }

    Ok((
        records.into_iter().map(|r| r.unwrap()).collect(),
        RunStats {
            executed_cells: executed,
            loaded_cells: loaded,
        },
    ))
}

/// Write the report files: a summary CSV over all cells, one convergence
/// trace CSV per cell, and one pairwise Mann-Whitney matrix (CSV and text)
/// per (initial-strategy family, budget) with at least two strategies.
/// Rendering is a pure function of the records; re-rendering is
/// byte-identical.
pub fn render_reports(records: &[RunRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = reports_dir(out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();

    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (a.bp_epochs, &a.label).cmp(&(b.bp_epochs, &b.label)));

    // (a) Summary table mirroring the per-cell best-genome statistics.
    let mut summary = String::from(
        "bp_epochs,strategy,avg_nodes,avg_edges,avg_rec_edges,worst_mae,avg_mae,best_mae\n",
    );
    for r in &sorted {
        let s = summarize(
            &r.label,
            r.bp_epochs,
            &r.repeats.iter().map(|x| x.digest()).collect::<Vec<_>>(),
        )?;
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.bp_epochs,
            r.label,
            s.avg_nodes,
            s.avg_edges,
            s.avg_rec_edges,
            s.worst_mae,
            s.avg_mae,
            s.best_mae
        ));
    }
    let path = dir.join("summary.csv");
    write_file(&path, &summary)?;
    written.push(path);

    // (b) Convergence traces for external plotting.
    for r in &sorted {
        let mut out = String::from("repeat,trained_count,best_mse\n");
        for (ri, rep) in r.repeats.iter().enumerate() {
            for (t, mse) in rep.convergence.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", ri, t + 1, mse));
            }
        }
        let path = dir.join(format!("trace_{}_{}.csv", r.label, r.bp_epochs));
        write_file(&path, &out)?;
        written.push(path);
    }

    // (c) Pairwise significance matrices per (initial letter, budget).
    let mut families: Vec<(char, usize)> = sorted
        .iter()
        .map(|r| (r.label.chars().next().unwrap(), r.bp_epochs))
        .collect();
    families.sort();
    families.dedup();
    for (family, bp) in families {
        let groups: Vec<(String, Vec<f64>)> = sorted
            .iter()
            .filter(|r| r.bp_epochs == bp && r.label.starts_with(family))
            .map(|r| {
                (
                    r.label.clone(),
                    r.repeats.iter().map(|x| x.best_mae).collect(),
                )
            })
            .collect();
        if groups.len() < 2 {
            continue;
        }
        let matrix = pairwise_matrix(&groups, Alternative::Less, 0.05)?;
        let base = format!("utest_{family}_{bp}");
        let csv_path = dir.join(format!("{base}.csv"));
        write_file(&csv_path, &matrix.to_csv())?;
        written.push(csv_path);
        let txt_path = dir.join(format!("{base}.txt"));
        write_file(&txt_path, &matrix.to_text())?;
        written.push(txt_path);
    }

    Ok(written)
}
