//! Weight initialization and inheritance strategies: uniform random, Xavier,
//! Kaiming, the stochastic line-search recombination used at crossover, and
//! parent-statistics sampling for components created by mutation.
//!
//! A strategy triple is written `<initial>-<crossover>-<mutation>` with
//! letters R (uniform random), X (Xavier), K (Kaiming) and L (Lamarckian),
//! e.g. `K-L-L`.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{Genome, NodeType};
use crate::rnn::cell::LSTM_FORGET_BIAS;

/// Strategy for weights of initial (seed) genomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialStrategy {
    UniformRandom,
    Xavier,
    Kaiming,
}

impl InitialStrategy {
    pub fn letter(self) -> char {
        match self {
            InitialStrategy::UniformRandom => 'R',
            InitialStrategy::Xavier => 'X',
            InitialStrategy::Kaiming => 'K',
        }
    }

    fn from_letter(c: char) -> Option<Self> {
        Some(match c {
            'R' => InitialStrategy::UniformRandom,
            'X' => InitialStrategy::Xavier,
            'K' => InitialStrategy::Kaiming,
            _ => return None,
        })
    }
}

/// Strategy for weights created at crossover or mutation: either rerun the
/// initial sampler or inherit Lamarckian-style from the parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InheritStrategy {
    SameAsInitial,
    Lamarckian,
}

/// The (initial, crossover, mutation) strategy selection. Lamarckian is not
/// a valid initial strategy: no parents exist at seed time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightStrategyTriple {
    pub initial: InitialStrategy,
    pub crossover: InheritStrategy,
    pub mutation: InheritStrategy,
}

impl WeightStrategyTriple {
    /// Parse a code like `K-L-L` or `X-X-X`. The crossover and mutation
    /// letters must be either `L` or the initial strategy's own letter.
    pub fn parse(code: &str) -> Result<Self> {
        let bad = |why: &str| {
            Err(Error::Config(format!(
                "invalid strategy code {code:?}: {why} (expected e.g. K-L-L with letters R/X/K/L)"
            )))
        };
        let parts: Vec<&str> = code.split('-').collect();
        if parts.len() != 3 || parts.iter().any(|p| p.chars().count() != 1) {
            return bad("need three single letters separated by dashes");
        }
        let letters: Vec<char> = parts.iter().map(|p| p.chars().next().unwrap()).collect();
        let initial = match InitialStrategy::from_letter(letters[0]) {
            Some(s) => s,
            None => return bad("initial strategy must be R, X, or K"),
        };
        let inherit = |c: char| -> Option<InheritStrategy> {
            if c == 'L' {
                Some(InheritStrategy::Lamarckian)
            } else if c == initial.letter() {
                Some(InheritStrategy::SameAsInitial)
            } else {
                None
            }
        };
        let crossover = match inherit(letters[1]) {
            Some(s) => s,
            None => return bad("crossover letter must be L or the initial letter"),
        };
        let mutation = match inherit(letters[2]) {
            Some(s) => s,
            None => return bad("mutation letter must be L or the initial letter"),
        };
        Ok(WeightStrategyTriple {
            initial,
            crossover,
            mutation,
        })
    }

    pub fn code(&self) -> String {
        let inherit_letter = |s: InheritStrategy| match s {
            InheritStrategy::Lamarckian => 'L',
            InheritStrategy::SameAsInitial => self.initial.letter(),
        };
        format!(
            "{}-{}-{}",
            self.initial.letter(),
            inherit_letter(self.crossover),
            inherit_letter(self.mutation)
        )
    }
}

impl fmt::Display for WeightStrategyTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

/// Sampler tuning shared by all strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Uniform-random bounds.
    #[serde(default = "default_uniform_lo")]
    pub uniform_lo: f64,
    #[serde(default = "default_uniform_hi")]
    pub uniform_hi: f64,
    /// Use the canonical sqrt(2/fan_in) Kaiming scale instead of the
    /// sqrt(2)/fan_in form.
    #[serde(default)]
    pub kaiming_canonical: bool,
}

fn default_uniform_lo() -> f64 {
    -0.5
}
fn default_uniform_hi() -> f64 {
    0.5
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            uniform_lo: default_uniform_lo(),
            uniform_hi: default_uniform_hi(),
            kaiming_canonical: false,
        }
    }
}

/// Enabled in/out connection counts at a node,
/// recomputed at sampling time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FanCounts {
    pub fan_in: usize,
    pub fan_out: usize,
}

impl FanCounts {
    pub fn of(g: &Genome, node: u64) -> FanCounts {
        let (fan_in, fan_out) = g.fan_counts(node);
        FanCounts { fan_in, fan_out }
    }
}

/// Xavier bound sqrt(6) / sqrt(fan_in + fan_out).
pub fn xavier_bound(fans: FanCounts) -> Result<f64> {
    let sum = fans.fan_in + fans.fan_out;
    if sum == 0 {
        return Err(Error::DegenerateFan {
            fan_in: fans.fan_in,
            fan_out: fans.fan_out,
        });
    }
    Ok(6f64.sqrt() / (sum as f64).sqrt())
}

/// Uniform draw from [-b, b] with the Xavier bound.
pub fn xavier_sample<R: Rng + ?Sized>(fans: FanCounts, rng: &mut R) -> Result<f64> {
    let b = xavier_bound(fans)?;
    Ok(rng.random_range(-b..=b))
}

/// Kaiming scale: sqrt(2)/fan_in as printed, or the canonical sqrt(2/fan_in).
pub fn kaiming_scale(fans: FanCounts, canonical: bool) -> Result<f64> {
    if fans.fan_in == 0 {
        return Err(Error::DegenerateFan {
            fan_in: fans.fan_in,
            fan_out: fans.fan_out,
        });
    }
    Ok(if canonical {
        (2.0 / fans.fan_in as f64).sqrt()
    } else {
        2f64.sqrt() / fans.fan_in as f64
    })
}

/// Normal draw N(0,1) times the Kaiming scale.
pub fn kaiming_sample<R: Rng + ?Sized>(fans: FanCounts, canonical: bool, rng: &mut R) -> Result<f64> {
    let scale = kaiming_scale(fans, canonical)?;
    let n: f64 = StandardNormal.sample(rng);
    Ok(n * scale)
}

/// Uniform draw from [lo, hi].
pub fn uniform_sample<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::InvalidRange { lo, hi });
    }
    Ok(rng.random_range(lo..=hi))
}

/// The line-search coefficient r ~ U[-0.5, 1.5], drawn exactly once per
/// crossover event and shared by all recombined weights.
pub fn crossover_r<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-0.5..=1.5)
}

/// Child weight on the line through the parents: r(w_p2 - w_p1) + w_p1,
/// where `w_p1` belongs to the more fit parent.
pub fn lamarckian_blend(w_p1: f64, w_p2: f64, r: f64) -> f64 {
    r * (w_p2 - w_p1) + w_p1
}

/// Mean and population variance of a genome's weights and biases, disabled
/// genes included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub mu: f64,
    pub sigma2: f64,
}

/// Statistics over every trainable parameter of the genome.
pub fn weight_stats(g: &Genome) -> Result<WeightStats> {
    let mut count = 0usize;
    let mut sum = 0.0;
    for w in g.all_parameters() {
        count += 1;
        sum += w;
    }
    if count == 0 {
        return Err(Error::EmptyGenome);
    }
    let mu = sum / count as f64;
    let sigma2 = g.all_parameters().map(|w| (w - mu) * (w - mu)).sum::<f64>() / count as f64;
    Ok(WeightStats { mu, sigma2 })
}

/// Draw from N(mu, sigma2). A zero-variance parent yields mu exactly.
pub fn lamarckian_mutation_sample<R: Rng + ?Sized>(stats: WeightStats, rng: &mut R) -> f64 {
    debug_assert!(stats.sigma2 >= 0.0);
    if stats.sigma2 <= 0.0 {
        return stats.mu;
    }
    Normal::new(stats.mu, stats.sigma2.sqrt())
        .expect("finite variance")
        .sample(rng)
}

/// One draw from the configured initial-strategy sampler.
pub fn initial_sample<R: Rng + ?Sized>(
    strategy: InitialStrategy,
    fans: FanCounts,
    scfg: &SamplerConfig,
    rng: &mut R,
) -> Result<f64> {
    match strategy {
        InitialStrategy::UniformRandom => uniform_sample(scfg.uniform_lo, scfg.uniform_hi, rng),
        InitialStrategy::Xavier => xavier_sample(fans, rng),
        InitialStrategy::Kaiming => kaiming_sample(fans, scfg.kaiming_canonical, rng),
    }
}

/// Like [`initial_sample`] but never fails: fans are clamped to at least one
/// connection. Used when sampling weights into evolved structures, where a
/// node stranded by edge disabling can legitimately have zero enabled
/// connections.
pub fn initial_sample_clamped<R: Rng + ?Sized>(
    strategy: InitialStrategy,
    fans: FanCounts,
    scfg: &SamplerConfig,
    rng: &mut R,
) -> f64 {
    let fans = FanCounts {
        fan_in: fans.fan_in.max(1),
        fan_out: fans.fan_out,
    };
    initial_sample(strategy, fans, scfg, rng).expect("clamped fans are non-degenerate")
}

/// Draw fresh weights for every gene of a genome: edge and recurrent-edge
/// weights use the target node's fans; node parameter blocks use the node's
/// own fans. LSTM forget-gate biases get +1.0 added after sampling.
pub fn initialize_genome_weights<R: Rng + ?Sized>(
    g: &Genome,
    strategy: InitialStrategy,
    scfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Genome> {
    let mut out = g.clone();
    for i in 0..out.edges.len() {
        let fans = FanCounts::of(&out, out.edges[i].target);
        out.edges[i].weight = initial_sample(strategy, fans, scfg, rng)?;
    }
    for i in 0..out.rec_edges.len() {
        let fans = FanCounts::of(&out, out.rec_edges[i].target);
        out.rec_edges[i].weight = initial_sample(strategy, fans, scfg, rng)?;
    }
    for i in 0..out.nodes.len() {
        if out.nodes[i].params.is_empty() {
            continue;
        }
        let fans = FanCounts::of(&out, out.nodes[i].innovation);
        for k in 0..out.nodes[i].params.len() {
            out.nodes[i].params[k] = initial_sample(strategy, fans, scfg, rng)?;
        }
        if out.nodes[i].node_type == NodeType::Lstm {
            out.nodes[i].params[LSTM_FORGET_BIAS] += 1.0;
        }
    }
    out.fitness = None;
    Ok(out)
}
