use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graphtest::builders::{build_knn, kmdp_rounds, kmst_rounds};
use graphtest::inference::{bootstrap_moments, exhaustive_null, permutation_pvalues, Scorer};
use graphtest::stats::{count_edges, permutation_moments};
use graphtest::{DistanceMatrix, GraphSpec, PermutationConfig, SimilarityGraph, StatisticKind, TwoSampleLayout};

fn points(max_n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 4..=max_n)
}

fn distances(pts: &[(f64, f64)]) -> DistanceMatrix {
    DistanceMatrix::from_fn(pts.len(), |i, j| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt())
        .unwrap()
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> SimilarityGraph {
    loop {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|_| rng.random_bool(0.5))
            .collect();
        if !edges.is_empty() {
            return SimilarityGraph::new(n, edges).unwrap();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kmst_rounds_are_disjoint_spanning_trees(pts in points(14), k in 1usize..4) {
        let d = distances(&pts);
        let n = pts.len();
        prop_assume!(k * (n - 1) <= n * (n - 1) / 2);
        if let Ok(rounds) = kmst_rounds(&d, k) {
            let mut seen = HashSet::new();
            for round in &rounds {
                prop_assert_eq!(round.len(), n - 1);
                prop_assert!(connected(n, round));
                for e in round {
                    prop_assert!(seen.insert(*e));
                }
            }
            prop_assert_eq!(rounds, kmst_rounds(&d, k).unwrap());
        }
    }

    #[test]
    fn kmdp_rounds_are_disjoint_matchings(pts in points(14), k in 1usize..4) {
        let d = distances(&pts);
        let n = pts.len();
        prop_assume!(k < n - 1);
        if let Ok(rounds) = kmdp_rounds(&d, k) {
            let mut seen = HashSet::new();
            for round in &rounds {
                prop_assert_eq!(round.len(), n / 2);
                let mut touched = HashSet::new();
                for &(i, j) in round {
                    prop_assert!(touched.insert(i) && touched.insert(j));
                }
                for e in round {
                    prop_assert!(seen.insert(*e));
                }
            }
            let g = GraphSpec::Kmdp(k).build(&d).unwrap();
            if n % 2 == 0 {
                prop_assert_eq!(g.degree_stats().flatness_gap, 0.0);
            }
        }
    }

    #[test]
    fn knn_gives_every_node_k_neighbors(pts in points(14), k in 1usize..4) {
        let d = distances(&pts);
        let g = build_knn(&d, k).unwrap();
        prop_assert!(g.degrees().iter().all(|&deg| deg >= k));
        prop_assert!(g.edge_count() <= k * pts.len());
        prop_assert_eq!(g, build_knn(&d, k).unwrap());
    }

    #[test]
    fn nested_family_matches_individual_builds(pts in points(12)) {
        let d = distances(&pts);
        let ks = [1, 2, 3];
        if let Ok(family) = GraphSpec::Kmst(1).build_family(&d, &ks) {
            for (k, g) in ks.iter().zip(family) {
                prop_assert_eq!(g, GraphSpec::Kmst(*k).build(&d).unwrap());
            }
        }
    }

    #[test]
    fn counts_partition_edges_and_swap_with_labels(seed in any::<u64>(), n in 4usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n);
        let m = rng.random_range(2..=n - 2);
        let layout = TwoSampleLayout::from_sizes(m, n - m).unwrap();
        let c = count_edges(&g, &layout).unwrap();
        prop_assert_eq!(c.total() as usize, g.edge_count());
        let s = count_edges(&g, &layout.swapped()).unwrap();
        prop_assert_eq!((s.between, s.within1, s.within2), (c.between, c.within2, c.within1));

        let mo = permutation_moments(&g.degree_stats(), &layout).unwrap();
        let ms = permutation_moments(&g.degree_stats(), &layout.swapped()).unwrap();
        prop_assert!((mo.e_r1 - ms.e_r2).abs() < 1e-9 * mo.e_r1.abs().max(1.0));
        prop_assert!((mo.var_r1() - ms.var_r2()).abs() < 1e-9 * mo.var_r1().abs().max(1.0));
        prop_assert!((mo.var_r - ms.var_r).abs() < 1e-9 * mo.var_r.abs().max(1.0));
        prop_assert!((mo.e_r + mo.e_r1 + mo.e_r2 - g.edge_count() as f64).abs() < 1e-9 * g.edge_count() as f64);
    }

    #[test]
    fn node_relabeling_leaves_counts_unchanged(seed in any::<u64>(), n in 4usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let relabeled = SimilarityGraph::new(n, g.edges().iter().map(|&(i, j)| (perm[i], perm[j])).collect()).unwrap();
        let labels: Vec<u8> = (0..n).map(|i| if i < n / 2 { 1 } else { 2 }).collect();
        let mut moved = vec![0u8; n];
        for i in 0..n {
            moved[perm[i]] = labels[i];
        }
        let a = count_edges(&g, &TwoSampleLayout::from_labels(labels).unwrap()).unwrap();
        let b = count_edges(&relabeled, &TwoSampleLayout::from_labels(moved).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn monte_carlo_pvalues_agree_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let config = PermutationConfig::new(100_000, 13).unwrap();
    let mut compared = 0;
    for _ in 0..8 {
        let n = rng.random_range(6..=8);
        let g = random_graph(&mut rng, n);
        let m = rng.random_range(2..=n - 2);
        let mut labels = vec![1u8; m];
        labels.resize(n, 2);
        for i in (1..n).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        let layout = TwoSampleLayout::from_labels(labels).unwrap();
        let observed = count_edges(&g, &layout).unwrap();
        let null = exhaustive_null(&g, m).unwrap();
        let kinds: Vec<StatisticKind> =
            StatisticKind::ALL.into_iter().filter(|&k| Scorer::new(&g, &layout, k).is_ok()).collect();
        let mc = permutation_pvalues(&g, &layout, &kinds, &config).unwrap();
        for (kind, p_mc) in kinds.iter().zip(mc) {
            let scorer = Scorer::new(&g, &layout, *kind).unwrap();
            let exact = null.pvalue(&scorer, &observed);
            assert!((p_mc - exact).abs() < 0.01, "{kind}: monte carlo {p_mc} vs exact {exact}");
            compared += 1;
        }
    }
    assert!(compared >= 16);
}

/// Moments under independent labels, by weighting all `2^N` label vectors.
#[test]
fn bootstrap_closed_forms_match_weighted_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..25 {
        let n = rng.random_range(4..=12);
        let g = random_graph(&mut rng, n);
        let m = rng.random_range(2..=n - 2);
        let layout = TwoSampleLayout::from_sizes(m, n - m).unwrap();
        let closed = bootstrap_moments(&g.degree_stats(), &layout).unwrap();
        let p = m as f64 / n as f64;
        let q = 1.0 - p;
        let (mut e1, mut e2, mut e11, mut e22, mut e12) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for mask in 0u32..1 << n {
            let ones = mask.count_ones() as i32;
            let w = p.powi(ones) * q.powi(n as i32 - ones);
            let (mut r1, mut r2) = (0.0, 0.0);
            for &(i, j) in g.edges() {
                match (mask >> i & 1, mask >> j & 1) {
                    (1, 1) => r1 += 1.0,
                    (0, 0) => r2 += 1.0,
                    _ => {}
                }
            }
            e1 += w * r1;
            e2 += w * r2;
            e11 += w * r1 * r1;
            e22 += w * r2 * r2;
            e12 += w * r1 * r2;
        }
        let var1 = e11 - e1 * e1;
        let var2 = e22 - e2 * e2;
        let cov = e12 - e1 * e2;
        let mu = q * e1 + p * e2;
        let sigma2 = q * q * var1 + p * p * var2 + 2.0 * p * q * cov;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        assert!(close(closed.e_r1, e1) && close(closed.e_r2, e2));
        assert!(close(closed.var_r1, var1) && close(closed.var_r2, var2) && close(closed.cov, cov));
        assert!(close(closed.mu_b, mu) && close(closed.sigma2_b, sigma2));
    }
}

#[test]
fn null_rejection_rate_of_weighted_test() {
    let mut rejections = 0;
    let trials = 300;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + t);
        let data = graphtest::simulation::sample_gaussian_shift(25, 35, 3, 0.0, &mut rng).unwrap();
        let g = GraphSpec::Kmst(3).build(&graphtest::distances::euclidean_distances(&data.0).unwrap()).unwrap();
        let config = PermutationConfig::new(400, t).unwrap();
        let p = permutation_pvalues(&g, &data.1, &[StatisticKind::Weighted], &config).unwrap()[0];
        if p <= 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    // five binomial standard deviations at 300 trials
    assert!((rate - 0.05).abs() < 0.063, "null rejection rate {rate}");
}
