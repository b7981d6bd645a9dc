//! Edge counts, weighted statistics and their exact permutation-null moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DegreeStats, GraphSummary, SimilarityGraph};

/// Assignment of each pooled observation to sample 1 or sample 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoSampleLayout {
    labels: Vec<u8>,
    m: usize,
    n: usize,
}

impl TwoSampleLayout {
    /// Labels must be 1 or 2; each sample needs at least two members.
    pub fn from_labels(labels: Vec<u8>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l != 1 && l != 2) {
            return Err(Error::InvalidLabel(bad.to_string()));
        }
        let m = labels.iter().filter(|&&l| l == 1).count();
        let n = labels.len() - m;
        if m < 2 || n < 2 {
            return Err(Error::SampleTooSmall { m, n });
        }
        Ok(Self { labels, m, n })
    }

    /// First `m` observations in sample 1, the remaining `n` in sample 2.
    pub fn from_sizes(m: usize, n: usize) -> Result<Self> {
        let mut labels = vec![1u8; m];
        labels.resize(m + n, 2);
        Self::from_labels(labels)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> usize {
        self.m + self.n
    }

    pub fn in_sample1(&self, node: usize) -> bool {
        self.labels[node] == 1
    }

    /// `m / N`.
    pub fn p(&self) -> f64 {
        self.m as f64 / self.total() as f64
    }

    /// `n / N`.
    pub fn q(&self) -> f64 {
        self.n as f64 / self.total() as f64
    }

    /// `(m - 1) / (N - 2)`.
    pub fn p_tilde(&self) -> f64 {
        (self.m - 1) as f64 / (self.total() - 2) as f64
    }

    /// `(n - 1) / (N - 2)`.
    pub fn q_tilde(&self) -> f64 {
        (self.n - 1) as f64 / (self.total() - 2) as f64
    }

    /// The same partition with the roles of the two samples exchanged.
    pub fn swapped(&self) -> Self {
        let labels = self.labels.iter().map(|&l| 3 - l).collect();
        Self { labels, m: self.n, n: self.m }
    }
}

/// Between-sample edges `R` and within-sample edges `R1`, `R2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub between: u64,
    pub within1: u64,
    pub within2: u64,
}

impl EdgeCounts {
    pub fn total(&self) -> u64 {
        self.between + self.within1 + self.within2
    }
}

pub fn count_edges(graph: &SimilarityGraph, layout: &TwoSampleLayout) -> Result<EdgeCounts> {
    if layout.total() != graph.node_count() {
        return Err(Error::LengthMismatch { expected: graph.node_count(), found: layout.total() });
    }
    Ok(count_with_mask(graph.edges(), |i| layout.in_sample1(i)))
}

#[inline]
pub(crate) fn count_with_mask(edges: &[(usize, usize)], in_sample1: impl Fn(usize) -> bool) -> EdgeCounts {
    let mut counts = EdgeCounts { between: 0, within1: 0, within2: 0 };
    for &(i, j) in edges {
        match (in_sample1(i), in_sample1(j)) {
            (true, true) => counts.within1 += 1,
            (false, false) => counts.within2 += 1,
            _ => counts.between += 1,
        }
    }
    counts
}

/// `(R_w, R~_w)`. Each within-sample count is weighted by the other sample's
/// proportion.
pub fn weighted_statistics(counts: &EdgeCounts, layout: &TwoSampleLayout) -> (f64, f64) {
    let (r1, r2) = (counts.within1 as f64, counts.within2 as f64);
    (
        layout.q() * r1 + layout.p() * r2,
        layout.q_tilde() * r1 + layout.p_tilde() * r2,
    )
}

/// Exact means, variances and covariances under the permutation null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationMoments {
    pub e_r: f64,
    pub var_r: f64,
    pub e_r1: f64,
    pub e_r2: f64,
    /// Covariance matrix of `(R1, R2)`.
    pub sigma_r: [[f64; 2]; 2],
    pub e_rw: f64,
    pub var_rw: f64,
    pub e_rwt: f64,
    pub var_rwt: f64,
}

impl PermutationMoments {
    pub fn var_r1(&self) -> f64 {
        self.sigma_r[0][0]
    }

    pub fn var_r2(&self) -> f64 {
        self.sigma_r[1][1]
    }

    pub fn cov_r1_r2(&self) -> f64 {
        self.sigma_r[0][1]
    }

    /// `Var(R1 - R2)`.
    pub fn var_diff(&self) -> f64 {
        self.var_r1() + self.var_r2() - 2.0 * self.cov_r1_r2()
    }

    pub fn from_summary(summary: &GraphSummary, layout: &TwoSampleLayout) -> Result<Self> {
        check_moment_inputs(summary, layout)?;
        let (m, n) = (layout.m() as f64, layout.n() as f64);
        let big_n = m + n;
        let g = summary.edge_count as f64;
        let gap = summary.flatness_gap();
        let c = variance_scale(layout);

        let e_r1 = g * m * (m - 1.0) / (big_n * (big_n - 1.0));
        let e_r2 = g * n * (n - 1.0) / (big_n * (big_n - 1.0));
        let e_r = 2.0 * m * n * g / (big_n * (big_n - 1.0));
        let var_r = c
            * (4.0 * g + ((n - m).powi(2) - (big_n - 2.0)) / ((m - 1.0) * (n - 1.0)) * gap
                - 8.0 / (big_n * (big_n - 1.0)) * g * g);

        // Var(a R1 + (1 - a) R2) at a = 1, 0, 1/2 pins down the 2x2 covariance.
        let v1 = combo_variance(summary, layout, 1.0);
        let v2 = combo_variance(summary, layout, 0.0);
        let v_half = combo_variance(summary, layout, 0.5);
        let cov = 2.0 * v_half - 0.5 * (v1 + v2);

        let e_rw = layout.q() * e_r1 + layout.p() * e_r2;
        let var_rw = c
            * (g - (m * n * big_n - 2.0 * m * m - 2.0 * n * n + 2.0 * m * n)
                / (big_n * big_n * (m - 1.0) * (n - 1.0))
                * gap
                - 2.0 / (big_n * (big_n - 1.0)) * g * g);
        let e_rwt = layout.q_tilde() * e_r1 + layout.p_tilde() * e_r2;
        let var_rwt = c * (g - gap / (big_n - 2.0) - 2.0 / (big_n * (big_n - 1.0)) * g * g);

        Ok(Self {
            e_r,
            var_r,
            e_r1,
            e_r2,
            sigma_r: [[v1, cov], [cov, v2]],
            e_rw,
            var_rw,
            e_rwt,
            var_rwt,
        })
    }
}

pub fn permutation_moments(stats: &DegreeStats, layout: &TwoSampleLayout) -> Result<PermutationMoments> {
    PermutationMoments::from_summary(&stats.summary(), layout)
}

fn check_moment_inputs(summary: &GraphSummary, layout: &TwoSampleLayout) -> Result<()> {
    if summary.node_count != layout.total() {
        return Err(Error::LengthMismatch { expected: summary.node_count, found: layout.total() });
    }
    if layout.m() < 2 || layout.n() < 2 || layout.total() < 4 {
        return Err(Error::TooFewNodes(format!(
            "permutation moments need m, n >= 2 (m = {}, n = {})",
            layout.m(),
            layout.n()
        )));
    }
    Ok(())
}

/// `mn(m-1)(n-1) / (N(N-1)(N-2)(N-3))`.
fn variance_scale(layout: &TwoSampleLayout) -> f64 {
    let (m, n) = (layout.m() as f64, layout.n() as f64);
    let big_n = m + n;
    m * n * (m - 1.0) * (n - 1.0) / (big_n * (big_n - 1.0) * (big_n - 2.0) * (big_n - 3.0))
}

fn combo_variance(summary: &GraphSummary, layout: &TwoSampleLayout, a: f64) -> f64 {
    let (m, n) = (layout.m() as f64, layout.n() as f64);
    let big_n = m + n;
    let b = 1.0 - a;
    let g = summary.edge_count as f64;
    let shape = a * a * (m - 2.0) / (n - 1.0) + b * b * (n - 2.0) / (m - 1.0) - 2.0 * a * b;
    variance_scale(layout) * (g + shape * summary.flatness_gap() - 2.0 / (big_n * (big_n - 1.0)) * g * g)
}

/// `Var(a R1 + (1 - a) R2)` under the permutation null; minimized at
/// `a = (n - 1) / (N - 2)`.
pub fn linear_combo_variance(stats: &DegreeStats, layout: &TwoSampleLayout, a: f64) -> Result<f64> {
    let summary = stats.summary();
    check_moment_inputs(&summary, layout)?;
    Ok(combo_variance(&summary, layout, a))
}

/// `Var(R_w)` and `Var(R~_w)` never exceed this value when `m, n >= 2`.
pub fn weighted_variance_bound(edge_count: usize, layout: &TwoSampleLayout) -> f64 {
    variance_scale(layout) * edge_count as f64
}

/// Relative determinant threshold below which `Sigma_R` counts as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

/// Generalized edge-count statistic: Mahalanobis form of the `(R1, R2)`
/// deviations under `Sigma_R`.
pub fn generalized_statistic(counts: &EdgeCounts, moments: &PermutationMoments) -> Result<f64> {
    let inverse = inverse_covariance(moments)?;
    Ok(quadratic_form(&inverse, counts, moments))
}

pub(crate) fn inverse_covariance(moments: &PermutationMoments) -> Result<[[f64; 2]; 2]> {
    let [[a, b], [_, d]] = moments.sigma_r;
    let det = a * d - b * b;
    if !(det > SINGULAR_TOLERANCE * a * d) {
        return Err(Error::SingularCovariance);
    }
    Ok([[d / det, -b / det], [-b / det, a / det]])
}

#[inline]
pub(crate) fn quadratic_form(inverse: &[[f64; 2]; 2], counts: &EdgeCounts, moments: &PermutationMoments) -> f64 {
    let x = counts.within1 as f64 - moments.e_r1;
    let y = counts.within2 as f64 - moments.e_r2;
    (inverse[0][0] * x * x + 2.0 * inverse[0][1] * x * y + inverse[1][1] * y * y).max(0.0)
}

/// Standardized weighted and difference scores and their max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxTypeScores {
    pub z_w: f64,
    pub z_diff: f64,
    pub max: f64,
}

/// Relative threshold below which a null variance counts as zero.
pub const ZERO_VARIANCE_TOLERANCE: f64 = 1e-12;

/// Null standard deviation, rejecting variances that are zero up to rounding
/// relative to the squared mean.
pub fn null_sd(var: f64, mean: f64, name: &'static str) -> Result<f64> {
    if !(var > ZERO_VARIANCE_TOLERANCE * (mean * mean).max(1.0)) {
        return Err(Error::ZeroVariance(name));
    }
    Ok(var.sqrt())
}

pub fn z_weighted(counts: &EdgeCounts, moments: &PermutationMoments, layout: &TwoSampleLayout) -> Result<f64> {
    let sd = null_sd(moments.var_rw, moments.e_rw, "R_w")?;
    let (rw, _) = weighted_statistics(counts, layout);
    Ok((rw - moments.e_rw) / sd)
}

pub fn z_diff(counts: &EdgeCounts, moments: &PermutationMoments) -> Result<f64> {
    let var = moments.var_diff();
    if !(var > ZERO_VARIANCE_TOLERANCE * (moments.var_r1() + moments.var_r2())) {
        return Err(Error::ZeroVariance("R1 - R2"));
    }
    let diff = counts.within1 as f64 - counts.within2 as f64;
    Ok((diff - (moments.e_r1 - moments.e_r2)) / var.sqrt())
}

/// `(Z_w, Z_diff, max(Z_w, |Z_diff|))` standardized with exact finite-sample moments.
pub fn zw_zdiff(counts: &EdgeCounts, moments: &PermutationMoments, layout: &TwoSampleLayout) -> Result<MaxTypeScores> {
    let z_w = z_weighted(counts, moments, layout)?;
    let z_diff = z_diff(counts, moments)?;
    Ok(MaxTypeScores { z_w, z_diff, max: z_w.max(z_diff.abs()) })
}
