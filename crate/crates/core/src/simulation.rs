//! Seeded simulation studies: power across graph densities, the variance
//! boosting experiment and the accuracy of asymptotic p-values.
//!
//! Trial `t` of a study seeded with `s` draws from `ChaCha8Rng` seeded with
//! `s` on stream `t`, so reports do not depend on thread count.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builders::GraphSpec;
use crate::distances::{euclidean_distances, VectorDataset};
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::inference::{run_tests, PValueMode, PermutationConfig, StatisticKind};
use crate::stats::{count_edges, permutation_moments, TwoSampleLayout};

/// Marginal distribution of every coordinate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Family {
    #[default]
    Gaussian,
    StudentT(u32),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian => f.write_str("gaussian"),
            Family::StudentT(dof) => write!(f, "t{dof}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "gaussian" {
            return Ok(Family::Gaussian);
        }
        s.strip_prefix('t')
            .and_then(|d| d.parse::<u32>().ok())
            .filter(|&d| d >= 1)
            .map(Family::StudentT)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown family {s:?} (gaussian, t5, t10, ...)")))
    }
}

impl Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_statistics() -> Vec<StatisticKind> {
    StatisticKind::ALL.to_vec()
}

fn default_pvalue() -> PValueMode {
    PValueMode::Asym
}

fn default_permutations() -> usize {
    1000
}

/// One simulation scenario, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub family: Family,
    pub graph: GraphSpec,
    /// Graph densities to evaluate; defaults to the `k` in `graph`.
    #[serde(default)]
    pub k_values: Option<Vec<usize>>,
    #[serde(default = "default_statistics")]
    pub statistics: Vec<StatisticKind>,
    pub trials: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pvalue")]
    pub pvalue: PValueMode,
    #[serde(default = "default_permutations")]
    pub n_permutations: usize,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.d == 0 {
            return bad("d must be at least 1");
        }
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return bad("shift must be finite and nonnegative");
        }
        if self.m < 2 || self.n < 2 {
            return bad("m and n must be at least 2");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.statistics.is_empty() {
            return bad("statistics must not be empty");
        }
        if matches!(self.graph, GraphSpec::External(_)) {
            return bad("simulated data need a kmst, knn or kmdp graph");
        }
        if self.pvalue == PValueMode::Both {
            return bad("pvalue must be perm or asym");
        }
        if self.pvalue == PValueMode::Perm && self.n_permutations == 0 {
            return bad("n_permutations must be at least 1");
        }
        if self.k_values.as_ref().is_some_and(|ks| ks.is_empty() || ks.contains(&0)) {
            return bad("k_values must be nonempty positive integers");
        }
        Ok(())
    }

    pub fn k_values(&self) -> Vec<usize> {
        self.k_values.clone().unwrap_or_else(|| vec![self.graph.k().unwrap_or(1)])
    }
}

/// `m` rows from `F1` followed by `n` rows from `F2`, where `F2` is `F1`
/// shifted by `shift` along the first coordinate.
pub fn sample_two_samples<R: Rng + ?Sized>(
    family: Family,
    m: usize,
    n: usize,
    d: usize,
    shift: f64,
    rng: &mut R,
) -> Result<(VectorDataset, TwoSampleLayout)> {
    let mut values = Vec::with_capacity((m + n) * d);
    for row in 0..m + n {
        for col in 0..d {
            let x = draw(family, rng);
            values.push(if row >= m && col == 0 { x + shift } else { x });
        }
    }
    Ok((VectorDataset::new(m + n, d, values)?, TwoSampleLayout::from_sizes(m, n)?))
}

pub fn sample_gaussian_shift<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    d: usize,
    shift: f64,
    rng: &mut R,
) -> Result<(VectorDataset, TwoSampleLayout)> {
    sample_two_samples(Family::Gaussian, m, n, d, shift, rng)
}

pub fn sample_t_product<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    d: usize,
    shift: f64,
    dof: u32,
    rng: &mut R,
) -> Result<(VectorDataset, TwoSampleLayout)> {
    sample_two_samples(Family::StudentT(dof), m, n, d, shift, rng)
}

/// Rows drawn from one distribution, shifted by `shift` on coordinate 0.
pub fn sample_rows<R: Rng + ?Sized>(family: Family, rows: usize, d: usize, shift: f64, rng: &mut R) -> Result<VectorDataset> {
    let mut values = Vec::with_capacity(rows * d);
    for _ in 0..rows {
        for col in 0..d {
            let x = draw(family, rng);
            values.push(if col == 0 { x + shift } else { x });
        }
    }
    VectorDataset::new(rows, d, values)
}

fn draw<R: Rng + ?Sized>(family: Family, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    match family {
        Family::Gaussian => z,
        Family::StudentT(dof) => {
            let chi2: f64 = (0..dof).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum();
            z / (chi2 / dof as f64).sqrt()
        }
    }
}

pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub k: usize,
    pub statistic: StatisticKind,
    pub power: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub scenario: ScenarioSpec,
    pub rows: Vec<PowerRow>,
}

impl PowerReport {
    pub fn power(&self, k: usize, statistic: StatisticKind) -> Option<f64> {
        self.rows.iter().find(|r| r.k == k && r.statistic == statistic).map(|r| r.power)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["k", "statistic", "power", "stderr", "trials"]).map_err(csv_to_io)?;
        for r in &self.rows {
            writer
                .write_record([
                    r.k.to_string(),
                    r.statistic.to_string(),
                    r.power.to_string(),
                    r.stderr.to_string(),
                    r.trials.to_string(),
                ])
                .map_err(csv_to_io)?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn csv_to_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Internal(format!("csv writer: {other:?}")),
    }
}

/// Rejection indicators for every `(k, statistic)` on one simulated data set.
fn power_trial(spec: &ScenarioSpec, ks: &[usize], trial: usize) -> Result<Vec<bool>> {
    let mut rng = trial_rng(spec.seed, trial);
    let (data, layout) = sample_two_samples(spec.family, spec.m, spec.n, spec.d, spec.shift, &mut rng)?;
    let perm_seed = rng.next_u64();
    let dist = euclidean_distances(&data)?;
    let graphs = spec.graph.build_family(&dist, ks)?;
    let config = PermutationConfig { n_permutations: spec.n_permutations, seed: perm_seed, parallel: true };
    let mut rejected = Vec::with_capacity(ks.len() * spec.statistics.len());
    for graph in &graphs {
        for result in run_tests(graph, &layout, &spec.statistics, spec.pvalue, &config)? {
            let p = result.p_perm.or(result.p_asym).expect("one p-value mode is selected");
            rejected.push(p <= spec.alpha);
        }
    }
    Ok(rejected)
}

pub fn run_power_study(spec: &ScenarioSpec) -> Result<PowerReport> {
    spec.validate()?;
    let ks = spec.k_values();
    let outcomes = (0..spec.trials)
        .into_par_iter()
        .map(|t| power_trial(spec, &ks, t))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut slot = 0;
    for &k in &ks {
        for &statistic in &spec.statistics {
            let hits = outcomes.iter().filter(|o| o[slot]).count();
            let power = hits as f64 / spec.trials as f64;
            rows.push(PowerRow {
                k,
                statistic,
                power,
                stderr: (power * (1.0 - power) / spec.trials as f64).sqrt(),
                trials: spec.trials,
            });
            slot += 1;
        }
    }
    Ok(PowerReport { scenario: spec.clone(), rows })
}

/// Settings for the experiment that enlarges sample 2 of an existing
/// two-sample data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingSpec {
    pub m: usize,
    pub n: usize,
    /// Extra sample-2 observations added in the second stage.
    pub extra: usize,
    pub d: usize,
    pub shift: f64,
    #[serde(default)]
    pub family: Family,
    pub graph: GraphSpec,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BoostingSpec {
    fn default() -> Self {
        Self {
            m: 50,
            n: 50,
            extra: 50,
            d: 50,
            shift: 1.3,
            family: Family::Gaussian,
            graph: GraphSpec::Kmst(5),
            trials: 100,
            seed: 0,
        }
    }
}

/// Edge-count summary of one data set: `E(R) - R`, `sd(R)` and `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCountSummary {
    pub deficit: f64,
    pub sd: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingTrial {
    pub before: EdgeCountSummary,
    pub after: EdgeCountSummary,
    pub sd_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingReport {
    pub spec: BoostingSpec,
    pub trials: Vec<BoostingTrial>,
    pub mean_sd_ratio: f64,
    pub mean_deficit_change: f64,
    pub mean_z_change: f64,
}

fn edge_summary(graph: &SimilarityGraph, layout: &TwoSampleLayout) -> Result<EdgeCountSummary> {
    let moments = permutation_moments(&graph.degree_stats(), layout)?;
    let r = count_edges(graph, layout)?.between as f64;
    let sd = moments.var_r.sqrt();
    Ok(EdgeCountSummary { deficit: moments.e_r - r, sd, z: (r - moments.e_r) / sd })
}

pub fn variance_boosting_experiment(spec: &BoostingSpec) -> Result<BoostingReport> {
    if spec.trials == 0 || spec.d == 0 || spec.m < 2 || spec.n < 2 {
        return Err(Error::InvalidSpec("boosting study needs trials, d >= 1 and m, n >= 2".into()));
    }
    let trials = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(spec.seed, t);
            let (base, layout) = sample_two_samples(spec.family, spec.m, spec.n, spec.d, spec.shift, &mut rng)?;
            let more = sample_rows(spec.family, spec.extra, spec.d, spec.shift, &mut rng)?;
            let before = edge_summary(&spec.graph.build(&euclidean_distances(&base)?)?, &layout)?;
            let grown = base.concat(&more)?;
            let grown_layout = TwoSampleLayout::from_sizes(spec.m, spec.n + spec.extra)?;
            let after = edge_summary(&spec.graph.build(&euclidean_distances(&grown)?)?, &grown_layout)?;
            Ok(BoostingTrial { before, after, sd_ratio: after.sd / before.sd })
        })
        .collect::<Result<Vec<_>>>()?;
    let count = trials.len() as f64;
    let mean = |f: &dyn Fn(&BoostingTrial) -> f64| trials.iter().map(f).sum::<f64>() / count;
    Ok(BoostingReport {
        spec: spec.clone(),
        mean_sd_ratio: mean(&|t| t.sd_ratio),
        mean_deficit_change: mean(&|t| t.after.deficit - t.before.deficit),
        mean_z_change: mean(&|t| t.after.z - t.before.z),
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub statistic: StatisticKind,
    /// `(p_asym, p_perm)` per run.
    pub pairs: Vec<(f64, f64)>,
    pub median_abs_diff: f64,
    pub p95_abs_diff: f64,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub scenario: ScenarioSpec,
    pub k: usize,
    pub summaries: Vec<AccuracySummary>,
}

/// Nearest-rank quantile of a sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Compares asymptotic and permutation p-values on null data; `trials` is the
/// number of runs and the first `k` in the scenario selects the graph.
pub fn pvalue_accuracy_study(spec: &ScenarioSpec) -> Result<AccuracyReport> {
    let mut check = spec.clone();
    check.pvalue = PValueMode::Perm;
    check.validate()?;
    if spec.shift != 0.0 {
        return Err(Error::InvalidSpec("accuracy study runs on null data (shift = 0)".into()));
    }
    let k = spec.k_values()[0];
    let graph_spec = spec.graph.with_k(k);
    let runs = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(spec.seed, t);
            let (data, layout) = sample_two_samples(spec.family, spec.m, spec.n, spec.d, 0.0, &mut rng)?;
            let config = PermutationConfig { n_permutations: spec.n_permutations, seed: rng.next_u64(), parallel: true };
            let graph = graph_spec.build(&euclidean_distances(&data)?)?;
            let results = run_tests(&graph, &layout, &spec.statistics, PValueMode::Both, &config)?;
            Ok(results.iter().map(|r| (r.p_asym.unwrap(), r.p_perm.unwrap())).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries = spec
        .statistics
        .iter()
        .enumerate()
        .map(|(s, &statistic)| {
            let pairs: Vec<(f64, f64)> = runs.iter().map(|r| r[s]).collect();
            let mut diffs: Vec<f64> = pairs.iter().map(|(a, p)| (a - p).abs()).collect();
            diffs.sort_by(f64::total_cmp);
            AccuracySummary {
                statistic,
                median_abs_diff: quantile(&diffs, 0.5),
                p95_abs_diff: quantile(&diffs, 0.95),
                max_abs_diff: *diffs.last().unwrap(),
                pairs,
            }
        })
        .collect();
    Ok(AccuracyReport { scenario: spec.clone(), k, summaries })
}
