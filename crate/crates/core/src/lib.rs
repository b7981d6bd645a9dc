//! Graph-based two-sample testing.
//!
//! Observations from two samples are pooled and connected by a similarity
//! graph (k-MST, k-NN, k-MDP or a user-supplied edge list). The tests count
//! between-sample and within-sample edges and compare them against their
//! exact permutation-null moments:
//!
//! * the edge-count statistic `R`,
//! * the weighted edge-count statistics `R_w = q R1 + p R2` and
//!   `R~_w = q~ R1 + p~ R2`,
//! * the generalized statistic `S` (quadratic form in `(R1, R2)`),
//! * the max-type statistic `max(Z_w, |Z_diff|)`.
//!
//! p-values come from Monte Carlo permutation, full enumeration (small `N`)
//! or the normal / chi-square limits.

pub mod builders;
pub mod distances;
pub mod error;
pub mod graph;
pub mod inference;
pub mod io;
pub mod matching;
pub mod normal;
pub mod simulation;
pub mod stats;

pub use builders::{DistanceMatrix, GraphSpec};
pub use error::{Error, Result};
pub use graph::{DegreeStats, GraphDiagnostics, NeighborhoodStats, SimilarityGraph};
pub use inference::{Direction, PermutationConfig, StatisticKind, TestResult};
pub use stats::{EdgeCounts, PermutationMoments, TwoSampleLayout};
