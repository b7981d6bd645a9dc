//! Similarity graphs and the degree / neighborhood quantities consumed by the
//! permutation-moment formulas and the asymptotic-condition diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::TwoSampleLayout;

/// Undirected simple graph on `node_count` nodes.
///
/// Edges are stored canonically: smaller endpoint first, list sorted
/// lexicographically. Construction rejects self-loops and duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

impl SimilarityGraph {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut canonical = Vec::with_capacity(edges.len());
        for (i, j) in edges {
            for index in [i, j] {
                if index >= node_count {
                    return Err(Error::IndexOutOfRange { index, node_count });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            canonical.push((i.min(j), i.max(j)));
        }
        canonical.sort_unstable();
        if let Some(w) = canonical.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge(w[0].0, w[0].1));
        }
        Ok(Self { node_count, edges: canonical })
    }

    /// Union of several edge-disjoint edge sets on the same node set.
    pub(crate) fn from_disjoint_rounds(node_count: usize, rounds: &[Vec<(usize, usize)>]) -> Result<Self> {
        Self::new(node_count, rounds.iter().flatten().copied().collect())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut degrees = vec![0usize; self.node_count];
        for &(i, j) in &self.edges {
            degrees[i] += 1;
            degrees[j] += 1;
        }
        degrees
    }

    /// Incident edge indices per node.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut incident = vec![Vec::new(); self.node_count];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            incident[i].push(e);
            incident[j].push(e);
        }
        incident
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees = self.degrees();
        let edge_count = self.edges.len();
        let degree_square_sum: u64 = degrees.iter().map(|&d| (d as u64) * (d as u64)).sum();
        let flatness_gap = flatness_gap(self.node_count, edge_count, degree_square_sum);
        DegreeStats { degrees, edge_count, degree_square_sum, flatness_gap }
    }

    /// Sizes of `A_e` (edges sharing a node with `e`, including `e`) and
    /// `B_e` (edges sharing a node with any member of `A_e`).
    pub fn neighborhood_stats(&self) -> NeighborhoodStats {
        let incident = self.incidence();
        let mut a_sizes = Vec::with_capacity(self.edges.len());
        let mut b_sizes = Vec::with_capacity(self.edges.len());
        // `mark[e] == stamp` means edge e is already counted for the current edge.
        let mut mark = vec![usize::MAX; self.edges.len()];
        let mut node_mark = vec![usize::MAX; self.node_count];
        let mut frontier = Vec::new();

        for (e, &(i, j)) in self.edges.iter().enumerate() {
            a_sizes.push(incident[i].len() + incident[j].len() - 1);

            // Nodes touched by A_e.
            frontier.clear();
            for &f in incident[i].iter().chain(&incident[j]) {
                let (u, v) = self.edges[f];
                for w in [u, v] {
                    if node_mark[w] != e {
                        node_mark[w] = e;
                        frontier.push(w);
                    }
                }
            }
            let mut b = 0usize;
            for &w in &frontier {
                for &f in &incident[w] {
                    if mark[f] != e {
                        mark[f] = e;
                        b += 1;
                    }
                }
            }
            b_sizes.push(b);
        }

        let sum_a_sq = a_sizes.iter().map(|&a| (a as u64) * (a as u64)).sum();
        let sum_ab = a_sizes.iter().zip(&b_sizes).map(|(&a, &b)| (a as u64) * (b as u64)).sum();
        NeighborhoodStats { a_sizes, b_sizes, sum_a_sq, sum_ab }
    }

    /// Asymptotic-condition diagnostics, plus the variance-boosting term when a
    /// layout is supplied.
    pub fn diagnose(&self, layout: Option<&TwoSampleLayout>) -> Result<GraphDiagnostics> {
        if self.node_count < 3 {
            return Err(Error::TooFewNodes(format!("diagnostics need N >= 3, got {}", self.node_count)));
        }
        if self.edges.is_empty() {
            return Err(Error::DegenerateGraph);
        }
        if let Some(layout) = layout {
            if layout.total() != self.node_count {
                return Err(Error::LengthMismatch { expected: self.node_count, found: layout.total() });
            }
        }
        let degree = self.degree_stats();
        let neigh = self.neighborhood_stats();
        let n_nodes = self.node_count as f64;
        let edges = self.edges.len() as f64;
        let alpha_hat = edges.ln() / n_nodes.ln();
        let boosting_term = layout.map(|l| {
            let (m, n) = (l.m() as f64, l.n() as f64);
            (n - m).powi(2) / ((m - 1.0) * (n - 1.0)) * degree.flatness_gap
        });
        Ok(GraphDiagnostics {
            node_count: self.node_count,
            edge_count: self.edges.len(),
            degree_square_sum: degree.degree_square_sum,
            flatness_gap: degree.flatness_gap,
            sum_ab: neigh.sum_ab,
            sum_a_sq: neigh.sum_a_sq,
            alpha_hat,
            ratio_ab: neigh.sum_ab as f64 / n_nodes.powf(1.5 * alpha_hat),
            ratio_a2: neigh.sum_a_sq as f64 / n_nodes.powf(alpha_hat + 0.5),
            flatness_gap_over_edges: degree.flatness_gap / edges,
            boosting_term,
        })
    }
}

/// `sum |G_i|^2 - 4 |G|^2 / N`.
pub(crate) fn flatness_gap(node_count: usize, edge_count: usize, degree_square_sum: u64) -> f64 {
    let g = edge_count as f64;
    // Exact zero for regular graphs: N * sum d^2 == 4 |G|^2.
    let lhs = node_count as u128 * degree_square_sum as u128;
    let rhs = 4 * (edge_count as u128) * (edge_count as u128);
    if lhs == rhs {
        return 0.0;
    }
    degree_square_sum as f64 - 4.0 * g * g / node_count as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub degrees: Vec<usize>,
    pub edge_count: usize,
    pub degree_square_sum: u64,
    /// `D = sum |G_i|^2 - 4 |G|^2 / N`; zero iff all degrees are equal.
    pub flatness_gap: f64,
}

impl DegreeStats {
    pub fn node_count(&self) -> usize {
        self.degrees.len()
    }

    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            node_count: self.degrees.len(),
            edge_count: self.edge_count,
            degree_square_sum: self.degree_square_sum,
        }
    }
}

/// The three graph numbers that the permutation moments depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub degree_square_sum: u64,
}

impl GraphSummary {
    pub fn flatness_gap(&self) -> f64 {
        flatness_gap(self.node_count, self.edge_count, self.degree_square_sum)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodStats {
    pub a_sizes: Vec<usize>,
    pub b_sizes: Vec<usize>,
    pub sum_a_sq: u64,
    pub sum_ab: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    pub node_count: usize,
    pub edge_count: usize,
    pub degree_square_sum: u64,
    pub flatness_gap: f64,
    pub sum_ab: u64,
    pub sum_a_sq: u64,
    /// `log |G| / log N`.
    pub alpha_hat: f64,
    /// `sum |A_e||B_e| / N^(1.5 alpha_hat)`.
    pub ratio_ab: f64,
    /// `sum |A_e|^2 / N^(alpha_hat + 0.5)`.
    pub ratio_a2: f64,
    pub flatness_gap_over_edges: f64,
    /// `(n - m)^2 / ((m - 1)(n - 1)) * D`, present when a layout was given.
    pub boosting_term: Option<f64>,
}
