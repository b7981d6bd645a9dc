//! p-values for the graph-based statistics: Monte Carlo permutation,
//! full enumeration of the permutation null, asymptotic limits and the
//! bootstrap-null moments.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builders::GraphSpec;
use crate::error::{Error, Result};
use crate::graph::{DegreeStats, SimilarityGraph};
use crate::normal::{std_normal_cdf, std_normal_sf};
use crate::stats::{
    count_edges, count_with_mask, inverse_covariance, null_sd, permutation_moments, quadratic_form, weighted_statistics,
    z_diff, EdgeCounts, PermutationMoments, TwoSampleLayout,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    Edge,
    Weighted,
    WeightedTilde,
    Generalized,
    #[serde(rename = "maxtype")]
    MaxType,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 5] = [
        StatisticKind::Edge,
        StatisticKind::Weighted,
        StatisticKind::WeightedTilde,
        StatisticKind::Generalized,
        StatisticKind::MaxType,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Edge => "edge",
            StatisticKind::Weighted => "weighted",
            StatisticKind::WeightedTilde => "weighted_tilde",
            StatisticKind::Generalized => "generalized",
            StatisticKind::MaxType => "maxtype",
        }
    }

    /// Tail in which the statistic signals a difference between samples.
    pub fn direction(self) -> Direction {
        match self {
            StatisticKind::Edge => Direction::Lower,
            _ => Direction::Upper,
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StatisticKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown statistic {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Lower,
    Upper,
}

/// Which p-values to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMode {
    Perm,
    Asym,
    Both,
}

impl PValueMode {
    pub fn permutation(self) -> bool {
        matches!(self, PValueMode::Perm | PValueMode::Both)
    }

    pub fn asymptotic(self) -> bool {
        matches!(self, PValueMode::Asym | PValueMode::Both)
    }
}

impl FromStr for PValueMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perm" => Ok(PValueMode::Perm),
            "asym" => Ok(PValueMode::Asym),
            "both" => Ok(PValueMode::Both),
            _ => Err(Error::InvalidSpec(format!("unknown p-value mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub n_permutations: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self { n_permutations: 1000, seed: 0, parallel: true }
    }
}

impl PermutationConfig {
    pub fn new(n_permutations: usize, seed: u64) -> Result<Self> {
        if n_permutations == 0 {
            return Err(Error::InvalidSpec("n_permutations must be at least 1".into()));
        }
        Ok(Self { n_permutations, seed, parallel: true })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphInfo {
    pub kind: String,
    pub k: Option<usize>,
    pub edges: usize,
}

impl GraphInfo {
    pub fn new(spec: &GraphSpec, graph: &SimilarityGraph) -> Self {
        Self { kind: spec.kind().to_string(), k: spec.k(), edges: graph.edge_count() }
    }

    fn unspecified(graph: &SimilarityGraph) -> Self {
        Self { kind: "custom".into(), k: None, edges: graph.edge_count() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: Option<u64>,
    pub n_permutations: Option<usize>,
}

/// One test outcome. For `generalized` the reference distribution is
/// chi-square with 2 degrees of freedom (mean 2, sd 2); for `maxtype` the
/// statistic is already on the standard normal scale (mean 0, sd 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: StatisticKind,
    pub value: f64,
    pub mean: f64,
    pub sd: f64,
    pub z: f64,
    pub p_perm: Option<f64>,
    pub p_asym: Option<f64>,
    pub direction: Direction,
    pub graph: GraphInfo,
    pub config: ConfigEcho,
}

/// Evaluates one statistic on arbitrary `(R1, R2)` counts for a fixed graph
/// and sample sizes.
#[derive(Debug, Clone)]
pub struct Scorer {
    kind: StatisticKind,
    m: u64,
    n: u64,
    edge_count: u64,
    moments: PermutationMoments,
    inverse: [[f64; 2]; 2],
    sd_w: f64,
    sd_diff: f64,
    sd_r: f64,
}

/// Ordering key: exact integers where the statistic is a rational function
/// of the counts with a common denominator, floats otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Key {
    Exact(u64),
    Real(f64),
}

/// Relative tolerance for treating two real-valued statistics as tied.
const TIE_TOLERANCE: f64 = 1e-12;

impl Scorer {
    pub fn new(graph: &SimilarityGraph, layout: &TwoSampleLayout, kind: StatisticKind) -> Result<Self> {
        let stats = graph.degree_stats();
        let moments = permutation_moments(&stats, layout)?;
        Self::from_moments(moments, graph.edge_count(), layout, kind)
    }

    pub fn from_moments(
        moments: PermutationMoments,
        edge_count: usize,
        layout: &TwoSampleLayout,
        kind: StatisticKind,
    ) -> Result<Self> {
        let mut scorer = Self {
            kind,
            m: layout.m() as u64,
            n: layout.n() as u64,
            edge_count: edge_count as u64,
            inverse: [[0.0; 2]; 2],
            sd_w: 0.0,
            sd_diff: 0.0,
            sd_r: 0.0,
            moments,
        };
        let mo = &scorer.moments;
        match kind {
            StatisticKind::Edge => scorer.sd_r = null_sd(mo.var_r, mo.e_r, "R")?,
            StatisticKind::Weighted => scorer.sd_w = null_sd(mo.var_rw, mo.e_rw, "R_w")?,
            StatisticKind::WeightedTilde => scorer.sd_w = null_sd(mo.var_rwt, mo.e_rwt, "R~_w")?,
            StatisticKind::Generalized => scorer.inverse = inverse_covariance(mo)?,
            StatisticKind::MaxType => {
                scorer.sd_w = null_sd(mo.var_rw, mo.e_rw, "R_w")?;
                let probe = EdgeCounts { between: 0, within1: 0, within2: 0 };
                z_diff(&probe, mo)?;
                scorer.sd_diff = mo.var_diff().sqrt();
            }
        }
        Ok(scorer)
    }

    pub fn kind(&self) -> StatisticKind {
        self.kind
    }

    pub fn moments(&self) -> &PermutationMoments {
        &self.moments
    }

    fn total(&self) -> f64 {
        (self.m + self.n) as f64
    }

    /// The statistic on its natural scale.
    pub fn value(&self, counts: &EdgeCounts) -> f64 {
        let (r1, r2) = (counts.within1 as f64, counts.within2 as f64);
        let (m, n) = (self.m as f64, self.n as f64);
        match self.kind {
            StatisticKind::Edge => (self.edge_count - counts.within1 - counts.within2) as f64,
            StatisticKind::Weighted => (n * r1 + m * r2) / self.total(),
            StatisticKind::WeightedTilde => ((n - 1.0) * r1 + (m - 1.0) * r2) / (self.total() - 2.0),
            StatisticKind::Generalized => quadratic_form(&self.inverse, counts, &self.moments),
            StatisticKind::MaxType => {
                let z_w = ((n * r1 + m * r2) / self.total() - self.moments.e_rw) / self.sd_w;
                let z_d = ((r1 - r2) - (self.moments.e_r1 - self.moments.e_r2)) / self.sd_diff;
                z_w.max(z_d.abs())
            }
        }
    }

    /// `(mean, sd)` of the reference scale used for `z`.
    pub fn reference(&self) -> (f64, f64) {
        let mo = &self.moments;
        match self.kind {
            StatisticKind::Edge => (mo.e_r, self.sd_r),
            StatisticKind::Weighted => (mo.e_rw, self.sd_w),
            StatisticKind::WeightedTilde => (mo.e_rwt, self.sd_w),
            StatisticKind::Generalized => (2.0, 2.0),
            StatisticKind::MaxType => (0.0, 1.0),
        }
    }

    pub fn z(&self, counts: &EdgeCounts) -> f64 {
        let (mean, sd) = self.reference();
        (self.value(counts) - mean) / sd
    }

    pub fn asymptotic_pvalue(&self, counts: &EdgeCounts) -> f64 {
        let arg = match self.kind {
            StatisticKind::Generalized | StatisticKind::MaxType => self.value(counts),
            _ => self.z(counts),
        };
        asymptotic_pvalue(self.kind, arg)
    }

    fn key(&self, counts: &EdgeCounts) -> Key {
        match self.kind {
            StatisticKind::Edge => Key::Exact(self.edge_count - counts.within1 - counts.within2),
            StatisticKind::Weighted => Key::Exact(self.n * counts.within1 + self.m * counts.within2),
            StatisticKind::WeightedTilde => {
                Key::Exact((self.n - 1) * counts.within1 + (self.m - 1) * counts.within2)
            }
            _ => Key::Real(self.value(counts)),
        }
    }

    /// Whether `candidate` is at least as extreme as `observed`.
    fn at_least_as_extreme(&self, candidate: Key, observed: Key) -> bool {
        match (candidate, observed) {
            (Key::Exact(c), Key::Exact(o)) => match self.kind.direction() {
                Direction::Lower => c <= o,
                Direction::Upper => c >= o,
            },
            (Key::Real(c), Key::Real(o)) => c >= o - TIE_TOLERANCE * o.abs().max(1.0),
            _ => unreachable!("keys of one scorer share a variant"),
        }
    }

    /// True when `candidate` counts as extreme relative to `observed`.
    pub fn is_extreme(&self, candidate: &EdgeCounts, observed: &EdgeCounts) -> bool {
        self.at_least_as_extreme(self.key(candidate), self.key(observed))
    }
}

/// Asymptotic p-value. `x` is the z-score for `edge`, `weighted` and
/// `weighted_tilde`, `S` for `generalized` and `M` for `maxtype`.
pub fn asymptotic_pvalue(kind: StatisticKind, x: f64) -> f64 {
    match kind {
        StatisticKind::Edge => std_normal_cdf(x),
        StatisticKind::Weighted | StatisticKind::WeightedTilde => std_normal_sf(x),
        StatisticKind::Generalized => (-x.max(0.0) / 2.0).exp(),
        StatisticKind::MaxType => {
            if x <= 0.0 {
                1.0
            } else {
                let c = std_normal_cdf(x);
                // 1 - c(2c - 1) = sf(x) + c * 2 sf(x), written to keep the upper tail accurate
                let sf = std_normal_sf(x);
                sf + 2.0 * c * sf
            }
        }
    }
}

/// Random `m`-subset of `0..N` for permutation `index` of the stream `seed`.
fn permuted_mask(seed: u64, index: u64, m: usize, order: &mut [usize], mask: &mut [bool]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    for (i, slot) in order.iter_mut().enumerate() {
        *slot = i;
    }
    mask.fill(false);
    let (chosen, _) = order.partial_shuffle(&mut rng, m);
    for &i in chosen.iter() {
        mask[i] = true;
    }
}

/// Number of permutations whose statistic is at least as extreme as the
/// observed one, for every scorer, from one shared set of permutations.
fn count_extremes(graph: &SimilarityGraph, m: usize, scorers: &[Scorer], observed: &EdgeCounts, config: &PermutationConfig) -> Vec<u64> {
    let n_nodes = graph.node_count();
    let edges = graph.edges();
    let observed_keys: Vec<Key> = scorers.iter().map(|s| s.key(observed)).collect();
    let one = |state: &mut (Vec<usize>, Vec<bool>), index: usize| -> Vec<u64> {
        let (order, mask) = state;
        permuted_mask(config.seed, index as u64, m, order, mask);
        let counts = count_with_mask(edges, |i| mask[i]);
        scorers
            .iter()
            .zip(&observed_keys)
            .map(|(s, &o)| s.at_least_as_extreme(s.key(&counts), o) as u64)
            .collect()
    };
    let init = || (vec![0usize; n_nodes], vec![false; n_nodes]);
    let add = |mut a: Vec<u64>, b: Vec<u64>| {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        a
    };
    let zero = vec![0u64; scorers.len()];
    if config.parallel {
        (0..config.n_permutations)
            .into_par_iter()
            .map_init(init, one)
            .reduce(|| zero.clone(), add)
    } else {
        let mut state = init();
        (0..config.n_permutations).map(|i| one(&mut state, i)).fold(zero, add)
    }
}

fn check_config(config: &PermutationConfig) -> Result<()> {
    if config.n_permutations == 0 {
        return Err(Error::InvalidSpec("n_permutations must be at least 1".into()));
    }
    Ok(())
}

/// Monte Carlo permutation p-values `(1 + #extreme) / (1 + B)` for several
/// statistics sharing the same permutations.
pub fn permutation_pvalues(
    graph: &SimilarityGraph,
    layout: &TwoSampleLayout,
    kinds: &[StatisticKind],
    config: &PermutationConfig,
) -> Result<Vec<f64>> {
    check_config(config)?;
    let scorers = kinds.iter().map(|&k| Scorer::new(graph, layout, k)).collect::<Result<Vec<_>>>()?;
    let observed = count_edges(graph, layout)?;
    let extremes = count_extremes(graph, layout.m(), &scorers, &observed, config);
    Ok(extremes.iter().map(|&e| (1 + e) as f64 / (1 + config.n_permutations) as f64).collect())
}

/// Runs the requested statistics with the chosen p-value methods.
pub fn run_tests(
    graph: &SimilarityGraph,
    layout: &TwoSampleLayout,
    kinds: &[StatisticKind],
    mode: PValueMode,
    config: &PermutationConfig,
) -> Result<Vec<TestResult>> {
    let scorers = kinds.iter().map(|&k| Scorer::new(graph, layout, k)).collect::<Result<Vec<_>>>()?;
    let observed = count_edges(graph, layout)?;
    let p_perm = if mode.permutation() {
        check_config(config)?;
        let extremes = count_extremes(graph, layout.m(), &scorers, &observed, config);
        extremes.iter().map(|&e| Some((1 + e) as f64 / (1 + config.n_permutations) as f64)).collect()
    } else {
        vec![None; scorers.len()]
    };
    let echo = if mode.permutation() {
        ConfigEcho { seed: Some(config.seed), n_permutations: Some(config.n_permutations) }
    } else {
        ConfigEcho { seed: None, n_permutations: None }
    };
    Ok(scorers
        .iter()
        .zip(p_perm)
        .map(|(s, p_perm)| {
            let (mean, sd) = s.reference();
            let value = s.value(&observed);
            TestResult {
                statistic: s.kind(),
                value,
                mean,
                sd,
                z: (value - mean) / sd,
                p_perm,
                p_asym: mode.asymptotic().then(|| s.asymptotic_pvalue(&observed)),
                direction: s.kind().direction(),
                graph: GraphInfo::unspecified(graph),
                config: echo,
            }
        })
        .collect())
}

/// Single-statistic permutation test.
pub fn permutation_pvalue(
    graph: &SimilarityGraph,
    layout: &TwoSampleLayout,
    kind: StatisticKind,
    config: &PermutationConfig,
) -> Result<TestResult> {
    let mut results = run_tests(graph, layout, &[kind], PValueMode::Perm, config)?;
    Ok(results.remove(0))
}

/// Single-statistic asymptotic test.
pub fn asymptotic_test(graph: &SimilarityGraph, layout: &TwoSampleLayout, kind: StatisticKind) -> Result<TestResult> {
    let mut results = run_tests(graph, layout, &[kind], PValueMode::Asym, &PermutationConfig::default())?;
    Ok(results.remove(0))
}

/// Largest number of labelings enumerated by [`exhaustive_null`].
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// The full permutation distribution of `(R1, R2)`: distinct outcomes with
/// their multiplicities among all `C(N, m)` labelings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExhaustiveNull {
    pub m: usize,
    pub n: usize,
    pub edge_count: u64,
    pub outcomes: Vec<(EdgeCounts, u64)>,
    pub total: u64,
}

/// Mean and variance of a statistic under an exact distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactMoments {
    pub mean: f64,
    pub var: f64,
}

pub fn exhaustive_null(graph: &SimilarityGraph, m: usize) -> Result<ExhaustiveNull> {
    let big_n = graph.node_count();
    if m > big_n {
        return Err(Error::LengthMismatch { expected: big_n, found: m });
    }
    let count = binomial(big_n, m);
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge { count, limit: EXHAUSTIVE_LIMIT });
    }
    let mut tally = std::collections::BTreeMap::new();
    let mut chosen: Vec<usize> = (0..m).collect();
    let mut mask = vec![false; big_n];
    loop {
        mask.fill(false);
        for &c in &chosen {
            mask[c] = true;
        }
        *tally.entry(count_with_mask(graph.edges(), |i| mask[i])).or_insert(0u64) += 1;
        // next combination in lexicographic order
        let mut i = m;
        while i > 0 && chosen[i - 1] == big_n - m + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        chosen[i - 1] += 1;
        for j in i..m {
            chosen[j] = chosen[j - 1] + 1;
        }
    }
    Ok(ExhaustiveNull {
        m,
        n: big_n - m,
        edge_count: graph.edge_count() as u64,
        outcomes: tally.into_iter().collect(),
        total: count as u64,
    })
}

impl ExhaustiveNull {
    /// Exact moments of `(a R1 + b R2) / denom`, accumulated in integers.
    pub fn linear_moments(&self, a: i128, b: i128, denom: f64) -> ExactMoments {
        let (mut s1, mut s2) = (0i128, 0i128);
        for (c, w) in &self.outcomes {
            let x = a * c.within1 as i128 + b * c.within2 as i128;
            s1 += *w as i128 * x;
            s2 += *w as i128 * x * x;
        }
        let t = self.total as i128;
        let var_num = t * s2 - s1 * s1;
        ExactMoments {
            mean: s1 as f64 / t as f64 / denom,
            var: var_num as f64 / (t as f64 * t as f64) / (denom * denom),
        }
    }

    /// Exact `Cov(R1, R2)`.
    pub fn covariance(&self) -> f64 {
        let (mut s1, mut s2, mut s12) = (0i128, 0i128, 0i128);
        for (c, w) in &self.outcomes {
            let (x, y, w) = (c.within1 as i128, c.within2 as i128, *w as i128);
            s1 += w * x;
            s2 += w * y;
            s12 += w * x * y;
        }
        let t = self.total as i128;
        (t * s12 - s1 * s2) as f64 / (t as f64 * t as f64)
    }

    /// All permutation-null moments, computed from the enumeration.
    pub fn moments(&self) -> PermutationMoments {
        let (m, n) = (self.m as i128, self.n as i128);
        let big_n = (self.m + self.n) as f64;
        let r1 = self.linear_moments(1, 0, 1.0);
        let r2 = self.linear_moments(0, 1, 1.0);
        let within = self.linear_moments(1, 1, 1.0);
        let rw = self.linear_moments(n, m, big_n);
        let rwt = self.linear_moments(n - 1, m - 1, big_n - 2.0);
        let cov = self.covariance();
        PermutationMoments {
            e_r: self.edge_count as f64 - within.mean,
            var_r: within.var,
            e_r1: r1.mean,
            e_r2: r2.mean,
            sigma_r: [[r1.var, cov], [cov, r2.var]],
            e_rw: rw.mean,
            var_rw: rw.var,
            e_rwt: rwt.mean,
            var_rwt: rwt.var,
        }
    }

    /// Probability of a labeling at least as extreme as `observed`.
    pub fn pvalue(&self, scorer: &Scorer, observed: &EdgeCounts) -> f64 {
        let hits: u64 = self
            .outcomes
            .iter()
            .filter(|(c, _)| scorer.is_extreme(c, observed))
            .map(|(_, w)| w)
            .sum();
        hits as f64 / self.total as f64
    }
}

/// Closed-form moments under independent labeling with probability `m / N`,
/// alongside the permutation-null mean and variance of `R_w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapMoments {
    pub e_r1: f64,
    pub e_r2: f64,
    pub var_r1: f64,
    pub var_r2: f64,
    pub cov: f64,
    pub mu_b: f64,
    pub sigma2_b: f64,
    pub mu_p: f64,
    pub sigma2_p: f64,
}

pub fn bootstrap_moments(stats: &DegreeStats, layout: &TwoSampleLayout) -> Result<BootstrapMoments> {
    let perm = permutation_moments(stats, layout)?;
    let (m, n) = (layout.m() as f64, layout.n() as f64);
    let big_n = m + n;
    let n4 = big_n.powi(4);
    let g = stats.edge_count as f64;
    let sum_sq = stats.degree_square_sum as f64;
    Ok(BootstrapMoments {
        e_r1: m * m * g / (big_n * big_n),
        e_r2: n * n * g / (big_n * big_n),
        var_r1: m * m * n * n * g / n4 + m.powi(3) * n * sum_sq / n4,
        var_r2: m * m * n * n * g / n4 + n.powi(3) * m * sum_sq / n4,
        cov: m * m * n * n * (g - sum_sq) / n4,
        mu_b: m * n * g / (big_n * big_n),
        sigma2_b: m * m * n * n * g / n4,
        mu_p: perm.e_rw,
        sigma2_p: perm.var_rw,
    })
}

/// Observed `(R_w, R~_w)` together with the edge counts.
pub fn observed_statistics(graph: &SimilarityGraph, layout: &TwoSampleLayout) -> Result<(EdgeCounts, f64, f64)> {
    let counts = count_edges(graph, layout)?;
    let (rw, rwt) = weighted_statistics(&counts, layout);
    Ok((counts, rw, rwt))
}
