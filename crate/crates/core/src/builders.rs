//! Similarity-graph construction from a distance matrix: k-MST, k-NN and
//! k-MDP (minimum distance non-bipartite pairing).
//!
//! Equal distances are broken by canonical edge order `(i, j)`, so every
//! builder is deterministic.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::matching::max_weight_matching;

/// Symmetric, zero-diagonal, nonnegative pairwise distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    size: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// `values` is row-major `size x size`.
    pub fn new(size: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {size}x{size} matrix, found {}",
                size * size,
                values.len()
            )));
        }
        for i in 0..size {
            for j in 0..size {
                let v = values[i * size + j];
                if !v.is_finite() {
                    return Err(Error::InvalidDistance { row: i, column: j, reason: "not finite" });
                }
                if v < 0.0 {
                    return Err(Error::InvalidDistance { row: i, column: j, reason: "negative" });
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidDistance { row: i, column: j, reason: "nonzero diagonal" });
                }
                if j > i && v != values[j * size + i] {
                    return Err(Error::Asymmetric(i, j));
                }
            }
        }
        Ok(Self { size, values })
    }

    /// Builds from the upper triangle of a pairwise function.
    pub fn from_fn(size: usize, mut dist: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = vec![0.0; size * size];
        for i in 0..size {
            for j in i + 1..size {
                let v = dist(i, j);
                values[i * size + j] = v;
                values[j * size + i] = v;
            }
        }
        Self::new(size, values)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All pairs `i < j`, sorted by distance then by `(i, j)`.
    fn sorted_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.size;
        let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        pairs.sort_by(|&a, &b| self.get(a.0, a.1).total_cmp(&self.get(b.0, b.1)).then(a.cmp(&b)));
        pairs
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal over pre-sorted pairs, skipping excluded ones.
fn kruskal(n: usize, sorted: &[(usize, usize)], excluded: &HashSet<(usize, usize)>) -> Option<Vec<(usize, usize)>> {
    let mut sets = DisjointSets::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for &pair in sorted {
        if tree.len() + 1 == n {
            break;
        }
        if excluded.contains(&pair) {
            continue;
        }
        if sets.union(pair.0, pair.1) {
            tree.push(pair);
        }
    }
    (tree.len() + 1 == n || n == 0).then_some(tree)
}

fn canonical_set(excluded: &[(usize, usize)]) -> HashSet<(usize, usize)> {
    excluded.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect()
}

/// Minimum spanning tree over all pairs not in `excluded`.
pub fn minimum_spanning_tree(d: &DistanceMatrix, excluded: &[(usize, usize)]) -> Result<SimilarityGraph> {
    let tree = kruskal(d.size(), &d.sorted_pairs(), &canonical_set(excluded)).ok_or(Error::Disconnected { round: 1 })?;
    SimilarityGraph::new(d.size(), tree)
}

/// The successive edge-disjoint MSTs, one edge list per round.
pub fn kmst_rounds(d: &DistanceMatrix, k: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let n = d.size();
    let sorted = d.sorted_pairs();
    let mut excluded = HashSet::with_capacity(k * n);
    let mut rounds = Vec::with_capacity(k);
    for round in 1..=k {
        let tree = kruskal(n, &sorted, &excluded).ok_or(Error::Disconnected { round })?;
        excluded.extend(tree.iter().copied());
        rounds.push(tree);
    }
    Ok(rounds)
}

/// Union of the first `k` edge-disjoint minimum spanning trees.
pub fn build_kmst(d: &DistanceMatrix, k: usize) -> Result<SimilarityGraph> {
    SimilarityGraph::from_disjoint_rounds(d.size(), &kmst_rounds(d, k)?)
}

/// Each node linked to its `k` nearest neighbours (ties to lower index),
/// symmetrized by union.
pub fn build_knn(d: &DistanceMatrix, k: usize) -> Result<SimilarityGraph> {
    let n = d.size();
    if k == 0 {
        return Err(Error::InvalidK);
    }
    if k + 1 > n {
        return Err(Error::KTooLarge { k, max: n.saturating_sub(1) });
    }
    let mut edges = HashSet::new();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        let row = d.row(i);
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        for &j in &order[..k] {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    SimilarityGraph::new(n, edges.into_iter().collect())
}

/// Fixed-point resolution for matching weights, relative to the largest distance.
const MATCHING_SCALE: f64 = (1u64 << 40) as f64;

/// Exact minimum-total-distance perfect matching over pairs not in `excluded`.
pub fn min_weight_perfect_matching(d: &DistanceMatrix, excluded: &[(usize, usize)]) -> Result<SimilarityGraph> {
    let pairs = perfect_matching_pairs(d, &canonical_set(excluded)).ok_or(Error::NoPerfectMatching { round: 1 })?;
    SimilarityGraph::new(d.size(), pairs)
}

fn perfect_matching_pairs(d: &DistanceMatrix, excluded: &HashSet<(usize, usize)>) -> Option<Vec<(usize, usize)>> {
    let n = d.size();
    if n % 2 == 1 {
        return None;
    }
    let max_distance = d.values().iter().copied().fold(0.0, f64::max);
    let scale = if max_distance > 0.0 { MATCHING_SCALE / max_distance } else { 0.0 };
    let ceiling = MATCHING_SCALE as i64 + 1;
    let mut edges = Vec::with_capacity(n * n / 2);
    for i in 0..n {
        for j in i + 1..n {
            if excluded.contains(&(i, j)) {
                continue;
            }
            let cost = (d.get(i, j) * scale).round() as i64;
            edges.push((i, j, ceiling - cost));
        }
    }
    let mate = max_weight_matching(n, &edges, true);
    let mut pairs = Vec::with_capacity(n / 2);
    for (v, partner) in mate.iter().enumerate() {
        match partner {
            Some(u) if v < *u => pairs.push((v, *u)),
            Some(_) => {}
            None => return None,
        }
    }
    Some(pairs)
}

/// The successive edge-disjoint minimum matchings, real-node pairs only.
///
/// For odd `N` each round appends a fresh pseudo node at distance 0 from
/// every observation and drops the pair containing it.
pub fn kmdp_rounds(d: &DistanceMatrix, k: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let n = d.size();
    let odd = n % 2 == 1;
    let work = if odd { augment_with_pseudo_point(d) } else { d.clone() };
    let mut excluded = HashSet::new();
    let mut rounds = Vec::with_capacity(k);
    for round in 1..=k {
        let pairs = perfect_matching_pairs(&work, &excluded).ok_or(Error::NoPerfectMatching { round })?;
        let real: Vec<(usize, usize)> = pairs.into_iter().filter(|&(_, j)| j < n).collect();
        excluded.extend(real.iter().copied());
        rounds.push(real);
    }
    Ok(rounds)
}

/// Union of the first `k` edge-disjoint minimum distance pairings.
pub fn build_kmdp(d: &DistanceMatrix, k: usize) -> Result<SimilarityGraph> {
    SimilarityGraph::from_disjoint_rounds(d.size(), &kmdp_rounds(d, k)?)
}

fn augment_with_pseudo_point(d: &DistanceMatrix) -> DistanceMatrix {
    let n = d.size();
    let mut values = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..n {
        values[i * (n + 1)..i * (n + 1) + n].copy_from_slice(d.row(i));
    }
    DistanceMatrix { size: n + 1, values }
}

/// Graph family and parameter, written `kmst:K`, `knn:K`, `kmdp:K` or
/// `external:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSpec {
    Kmst(usize),
    Knn(usize),
    Kmdp(usize),
    External(PathBuf),
}

impl GraphSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            GraphSpec::Kmst(_) => "kmst",
            GraphSpec::Knn(_) => "knn",
            GraphSpec::Kmdp(_) => "kmdp",
            GraphSpec::External(_) => "external",
        }
    }

    pub fn k(&self) -> Option<usize> {
        match *self {
            GraphSpec::Kmst(k) | GraphSpec::Knn(k) | GraphSpec::Kmdp(k) => Some(k),
            GraphSpec::External(_) => None,
        }
    }

    /// Same family with a different `k` (external specs are returned unchanged).
    pub fn with_k(&self, k: usize) -> Self {
        match self {
            GraphSpec::Kmst(_) => GraphSpec::Kmst(k),
            GraphSpec::Knn(_) => GraphSpec::Knn(k),
            GraphSpec::Kmdp(_) => GraphSpec::Kmdp(k),
            GraphSpec::External(p) => GraphSpec::External(p.clone()),
        }
    }

    pub fn build(&self, d: &DistanceMatrix) -> Result<SimilarityGraph> {
        match self {
            GraphSpec::Kmst(k) => build_kmst(d, *k),
            GraphSpec::Knn(k) => build_knn(d, *k),
            GraphSpec::Kmdp(k) => build_kmdp(d, *k),
            GraphSpec::External(path) => crate::io::read_edge_list(path, d.size()),
        }
    }

    /// Graphs for every `k` in `ks`, building nested families once.
    pub fn build_family(&self, d: &DistanceMatrix, ks: &[usize]) -> Result<Vec<SimilarityGraph>> {
        let k_max = ks.iter().copied().max().unwrap_or(0);
        let rounds = match self {
            GraphSpec::Kmst(_) => kmst_rounds(d, k_max)?,
            GraphSpec::Kmdp(_) => kmdp_rounds(d, k_max)?,
            _ => return ks.iter().map(|&k| self.with_k(k).build(d)).collect(),
        };
        ks.iter()
            .map(|&k| {
                if k == 0 {
                    return Err(Error::InvalidK);
                }
                SimilarityGraph::from_disjoint_rounds(d.size(), &rounds[..k])
            })
            .collect()
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::External(path) => write!(f, "external:{}", path.display()),
            other => write!(f, "{}:{}", other.kind(), other.k().unwrap_or_default()),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidSpec(format!("graph spec {s:?} must look like kmst:K")))?;
        if kind == "external" {
            if arg.is_empty() {
                return Err(Error::InvalidSpec("external graph needs a path".into()));
            }
            return Ok(GraphSpec::External(PathBuf::from(arg)));
        }
        let k: usize = arg.parse().map_err(|_| Error::InvalidSpec(format!("invalid k in graph spec {s:?}")))?;
        if k == 0 {
            return Err(Error::InvalidK);
        }
        match kind {
            "kmst" => Ok(GraphSpec::Kmst(k)),
            "knn" => Ok(GraphSpec::Knn(k)),
            "kmdp" => Ok(GraphSpec::Kmdp(k)),
            _ => Err(Error::InvalidSpec(format!("unknown graph kind {kind:?}"))),
        }
    }
}

impl Serialize for GraphSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GraphSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
