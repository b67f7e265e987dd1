//! Repeat aggregation and Mann-Whitney U significance testing between
//! strategy variants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Test sidedness. The default alternative is one-sided: the first sample
/// is stochastically smaller (lower MAE is better).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    Less,
    TwoSided,
}

impl Default for Alternative {
    fn default() -> Self {
        Alternative::Less
    }
}

/// How the p-value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UTestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    pub u_statistic: f64,
    pub p_value: f64,
    pub method: UTestMethod,
}

/// Standard normal CDF, double precision (West's algorithm).
pub fn normal_cdf(z: f64) -> f64 {
    let x = z.abs();
    if x > 37.0 {
        return if z > 0.0 { 1.0 } else { 0.0 };
    }
    let e = (-x * x / 2.0).exp();
    let p = if x < 7.071_067_811_865_47 {
        let mut b = 3.526_249_659_989_11e-2 * x + 0.700_383_064_443_688;
        b = b * x + 6.373_962_203_531_65;
        b = b * x + 33.912_866_078_383;
        b = b * x + 112.079_291_497_871;
        b = b * x + 221.213_596_169_931;
        b = b * x + 220.206_867_912_376;
        let mut q = 8.838_834_764_831_84e-2 * x + 1.755_667_163_182_64;
        q = q * x + 16.064_177_579_207;
        q = q * x + 86.780_732_202_946_1;
        q = q * x + 296.564_248_779_674;
        q = q * x + 637.333_633_378_831;
        q = q * x + 793.826_512_519_948;
        q = q * x + 440.413_735_824_752;
        e * b / q
    } else {
        let mut b = x + 0.65;
        b = x + 4.0 / b;
        b = x + 3.0 / b;
        b = x + 2.0 / b;
        b = x + 1.0 / b;
        e / (b * 2.506_628_274_631)
    };
    if z > 0.0 {
        1.0 - p
    } else {
        p
    }
}

/// Midranks of the pooled samples, and the tie-group sizes.
fn midranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a
        .iter()
        .chain(b.iter())
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("no NaN in samples"));
    let mut ranks = vec![0.0; pooled.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let rank = (i + 1 + j) as f64 / 2.0;
        for k in i..j {
            ranks[pooled[k].1] = rank;
        }
        tie_sizes.push(j - i);
        i = j;
    }
    (ranks, tie_sizes)
}

/// Exact null distribution of U for sample sizes (n1, n2): counts[u] is the
/// number of labelings with statistic exactly u.
fn exact_u_counts(n1: usize, n2: usize) -> Vec<f64> {
    let u_max = n1 * n2;
    // f[j][u] for the current i; build up over i = 0..n1.
    let mut f = vec![vec![0.0f64; u_max + 1]; n2 + 1];
    for row in f.iter_mut() {
        row[0] = 1.0;
    }
    for _i in 1..=n1 {
        let mut next = vec![vec![0.0f64; u_max + 1]; n2 + 1];
        for j in 0..=n2 {
            for u in 0..=u_max {
                let take_a = if u >= j { f[j][u - j] } else { 0.0 };
                let take_b = if j >= 1 { next[j - 1][u] } else { 0.0 };
                next[j][u] = take_a + take_b;
            }
        }
        f = next;
    }
    f[n2].clone()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Mann-Whitney U test with rank-sum U, midrank ties, exact enumeration for
/// small tie-free samples (both sizes <= 12) and a tie-corrected,
/// continuity-corrected normal approximation otherwise.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<UTestResult> {
    mann_whitney_with(a, b, Alternative::Less)
}

pub fn mann_whitney_with(a: &[f64], b: &[f64], alternative: Alternative) -> Result<UTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "mann_whitney needs at least one observation per sample".to_string(),
        ));
    }
    let (n1, n2) = (a.len(), b.len());
    let (ranks, tie_sizes) = midranks(a, b);
    let r1: f64 = ranks[..n1].iter().sum();
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let has_ties = tie_sizes.iter().any(|&t| t > 1);

    if !has_ties && n1 <= 12 && n2 <= 12 {
        let counts = exact_u_counts(n1, n2);
        let total = binomial(n1 + n2, n1);
        let u = u1.round() as usize;
        let p_le: f64 = counts[..=u].iter().sum::<f64>() / total;
        let p = match alternative {
            Alternative::Less => p_le,
            Alternative::TwoSided => {
                let p_ge: f64 = counts[u..].iter().sum::<f64>() / total;
                (2.0 * p_le.min(p_ge)).min(1.0)
            }
        };
        return Ok(UTestResult {
            u_statistic: u1,
            p_value: p,
            method: UTestMethod::Exact,
        });
    }

    let n = (n1 + n2) as f64;
    let mean = (n1 * n2) as f64 / 2.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| (t * t * t - t) as f64)
        .sum::<f64>()
        / (n * (n - 1.0));
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        // All observations identical: no evidence either way.
        return Ok(UTestResult {
            u_statistic: u1,
            p_value: match alternative {
                Alternative::Less => 0.5,
                Alternative::TwoSided => 1.0,
            },
            method: UTestMethod::NormalApprox,
        });
    }
    let sd = var.sqrt();
    let p = match alternative {
        Alternative::Less => normal_cdf((u1 + 0.5 - mean) / sd),
        Alternative::TwoSided => {
            let z = ((u1 - mean).abs() - 0.5) / sd;
            (2.0 * (1.0 - normal_cdf(z))).min(1.0)
        }
    };
    Ok(UTestResult {
        u_statistic: u1,
        p_value: p,
        method: UTestMethod::NormalApprox,
    })
}

/// One cell's digest of a repeated experiment: the per-repeat best-genome
/// MAE plus structure sizes of those best genomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub label: String,
    pub bp_epochs: usize,
    pub best_mae_per_repeat: Vec<f64>,
    pub worst_mae: f64,
    pub avg_mae: f64,
    pub best_mae: f64,
    pub avg_nodes: f64,
    pub avg_edges: f64,
    pub avg_rec_edges: f64,
}

/// Per-repeat inputs to [`summarize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatDigest {
    pub best_mae: f64,
    pub nodes: usize,
    pub edges: usize,
    pub rec_edges: usize,
}

/// Worst/avg/best MAE and average best-genome sizes over repeats.
pub fn summarize(label: &str, bp_epochs: usize, repeats: &[RepeatDigest]) -> Result<RepeatSummary> {
    if repeats.is_empty() {
        return Err(Error::InvalidInput("summarize needs at least one repeat".to_string()));
    }
    let maes: Vec<f64> = repeats.iter().map(|r| r.best_mae).collect();
    let n = repeats.len() as f64;
    Ok(RepeatSummary {
        label: label.to_string(),
        bp_epochs,
        worst_mae: maes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        avg_mae: maes.iter().sum::<f64>() / n,
        best_mae: maes.iter().copied().fold(f64::INFINITY, f64::min),
        best_mae_per_repeat: maes,
        avg_nodes: repeats.iter().map(|r| r.nodes as f64).sum::<f64>() / n,
        avg_edges: repeats.iter().map(|r| r.edges as f64).sum::<f64>() / n,
        avg_rec_edges: repeats.iter().map(|r| r.rec_edges as f64).sum::<f64>() / n,
    })
}

/// All ordered-pair U tests between labeled groups, diagonal not applicable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub labels: Vec<String>,
    /// results[i][j] is the test of group i against group j; None on the
    /// diagonal.
    pub results: Vec<Vec<Option<UTestResult>>>,
    pub alpha: f64,
}

impl PairwiseMatrix {
    pub fn significant(&self, i: usize, j: usize) -> bool {
        self.results[i][j]
            .map(|r| r.p_value <= self.alpha)
            .unwrap_or(false)
    }

    /// Aligned text grid; significant entries are starred.
    pub fn to_text(&self) -> String {
        let width = self
            .labels
            .iter()
            .map(|l| l.len())
            .max()
            .unwrap_or(5)
            .max(8);
        let mut out = String::new();
        out.push_str(&format!("{:width$}", ""));
        for l in &self.labels {
            out.push_str(&format!(" {l:>width$}"));
        }
        out.push('\n');
        for (i, row_label) in self.labels.iter().enumerate() {
            out.push_str(&format!("{row_label:width$}"));
            for j in 0..self.labels.len() {
                match &self.results[i][j] {
                    None => out.push_str(&format!(" {:>width$}", "/")),
                    Some(r) => {
                        let star = if r.p_value <= self.alpha { "*" } else { "" };
                        out.push_str(&format!(" {:>width$}", format!("{:.4}{star}", r.p_value)));
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Long-format CSV: one row per ordered pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group_a,group_b,u_statistic,p_value,method,significant\n");
        for (i, la) in self.labels.iter().enumerate() {
            for (j, lb) in self.labels.iter().enumerate() {
                if let Some(r) = &self.results[i][j] {
                    out.push_str(&format!(
                        "{la},{lb},{},{},{},{}\n",
                        r.u_statistic,
                        r.p_value,
                        match r.method {
                            UTestMethod::Exact => "exact",
                            UTestMethod::NormalApprox => "normal_approx",
                        },
                        r.p_value <= self.alpha
                    ));
                }
            }
        }
        out
    }
}

/// Pairwise one-sided tests over every ordered pair of groups.
pub fn pairwise_matrix(
    groups: &[(String, Vec<f64>)],
    alternative: Alternative,
    alpha: f64,
) -> Result<PairwiseMatrix> {
    if groups.len() < 2 {
        return Err(Error::InvalidInput(
            "pairwise_matrix needs at least two groups".to_string(),
        ));
    }
    let labels: Vec<String> = groups.iter().map(|(l, _)| l.clone()).collect();
    let mut results = Vec::with_capacity(groups.len());
    for (i, (_, a)) in groups.iter().enumerate() {
        let mut row = Vec::with_capacity(groups.len());
        for (j, (_, b)) in groups.iter().enumerate() {
            if i == j {
                row.push(None);
            } else {
                row.push(Some(mann_whitney_with(a, b, alternative)?));
            }
        }
        results.push(row);
    }
    Ok(PairwiseMatrix {
        labels,
        results,
        alpha,
    })
}
