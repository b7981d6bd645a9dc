//! Euclidean distances for vector data and the two network distances for
//! binary adjacency matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builders::DistanceMatrix;
use crate::error::{Error, Result};

/// `N` observations of `d` real features, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorDataset {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl VectorDataset {
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {rows} x {dim} = {} values, found {}",
                rows * dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { row: pos / dim, column: pos % dim });
        }
        Ok(Self { rows, dim, values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} columns, expected {dim}",
                rows[bad].len()
            )));
        }
        let n = rows.len();
        Self::new(n, dim, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &VectorDataset) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!("dimensions {} and {}", self.dim, other.dim)));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Self { rows: self.rows + other.rows, dim: self.dim, values })
    }
}

fn pairwise(size: usize, dist: impl Fn(usize, usize) -> f64 + Sync) -> Result<DistanceMatrix> {
    let rows: Vec<Vec<f64>> = (0..size)
        .into_par_iter()
        .map(|i| (0..size).map(|j| if j > i { dist(i, j) } else { 0.0 }).collect())
        .collect();
    let mut values = vec![0.0; size * size];
    for (i, row) in rows.iter().enumerate() {
        for j in i + 1..size {
            values[i * size + j] = row[j];
            values[j * size + i] = row[j];
        }
    }
    DistanceMatrix::new(size, values)
}

pub fn euclidean_distances(data: &VectorDataset) -> Result<DistanceMatrix> {
    pairwise(data.rows(), |i, j| {
        data.row(i).iter().zip(data.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    })
}

/// `N` binary directed adjacency matrices over the same `s` subjects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDataset {
    subjects: usize,
    matrices: Vec<Vec<u8>>,
}

impl NetworkDataset {
    /// Each matrix is row-major `s x s` with entries 0 or 1.
    pub fn new(subjects: usize, matrices: Vec<Vec<u8>>) -> Result<Self> {
        for (k, a) in matrices.iter().enumerate() {
            if a.len() != subjects * subjects {
                return Err(Error::ShapeMismatch(format!(
                    "observation {k} has {} entries, expected {subjects} x {subjects}",
                    a.len()
                )));
            }
            if let Some(pos) = a.iter().position(|&x| x > 1) {
                return Err(Error::ShapeMismatch(format!(
                    "observation {k} has non-binary entry {} at ({}, {})",
                    a[pos],
                    pos / subjects,
                    pos % subjects
                )));
            }
        }
        Ok(Self { subjects, matrices })
    }

    pub fn subjects(&self) -> usize {
        self.subjects
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrix(&self, i: usize) -> &[u8] {
        &self.matrices[i]
    }

    pub fn matrices(&self) -> &[Vec<u8>] {
        &self.matrices
    }

    /// Number of edges `||A_i||_F^2`.
    pub fn edge_count(&self, i: usize) -> u64 {
        self.matrices[i].iter().map(|&x| x as u64).sum()
    }

    fn differing(&self, i: usize, j: usize) -> u64 {
        self.matrices[i].iter().zip(&self.matrices[j]).filter(|(a, b)| a != b).count() as u64
    }
}

/// Number of differing entries, `||A_i - A_j||_F^2`.
pub fn network_distance_d1(nets: &NetworkDataset) -> Result<DistanceMatrix> {
    pairwise(nets.len(), |i, j| nets.differing(i, j) as f64)
}

/// `||A_i - A_j||_F^2 / (||A_i||_F ||A_j||_F)`; all networks must be nonempty.
pub fn network_distance_d2(nets: &NetworkDataset) -> Result<DistanceMatrix> {
    let norms: Vec<f64> = (0..nets.len()).map(|i| (nets.edge_count(i) as f64).sqrt()).collect();
    if let Some(empty) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::ZeroNetwork(empty));
    }
    pairwise(nets.len(), |i, j| nets.differing(i, j) as f64 / (norms[i] * norms[j]))
}
