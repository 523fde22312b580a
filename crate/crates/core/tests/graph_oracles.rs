mod common;

use cellpatch::eigen::symmetric_eigenvalues;
use cellpatch::features::cell_graph_features;
use cellpatch::graph::{build_radius_graph, minimum_spanning_tree, UNREACHABLE};
use cellpatch::{Point, PointSet, UndirectedGraph};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn topology_matches_floyd_warshall_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for trial in 0..100 {
        let n = rng.random_range(0..=40);
        let p = rng.random_range(0.0..0.3);
        let g = random_graph(&mut rng, n, p);
        let got = cell_graph_features(&g);
        let want = oracle_topology(&g);
        assert_eq!(&got[..12], &want[..], "trial {trial}, n {n}");
    }
}

#[test]
fn bfs_matches_floyd_warshall() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..50 {
        let n = rng.random_range(1..=30);
        let g = random_graph(&mut rng, n, 0.1);
        let d = floyd_warshall(&adjacency(&g));
        for s in 0..n {
            let b = g.bfs_distances(s);
            for t in 0..n {
                let want = if d[s][t] == INF { UNREACHABLE } else { d[s][t] };
                assert_eq!(b[t], want);
            }
        }
    }
}

#[test]
fn spectral_entries_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for trial in 0..100 {
        let n = rng.random_range(1..=40);
        let p = rng.random_range(0.0..0.5);
        let g = random_graph(&mut rng, n, p);
        let got = cell_graph_features(&g);
        let want = oracle_spectral(&g);
        for k in 0..6 {
            let (a, b) = (got[12 + k], want[k]);
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "trial {trial} entry {k}: {a} vs {b}");
        }
    }
}

#[test]
fn eigenvalues_match_nalgebra_on_dense_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..50 {
        let n = rng.random_range(1..=30);
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rng.random_range(-5.0..5.0);
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        let got = symmetric_eigenvalues(&m, n).unwrap();
        let mut want: Vec<f64> = nalgebra::DMatrix::from_row_slice(n, n, &m)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        want.sort_by(f64::total_cmp);
        let scale = m.iter().map(|v| v.abs()).fold(1.0, f64::max) * n as f64;
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        }
    }
}

#[test]
fn eigen_residual_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..20 {
        let n = rng.random_range(2..=25);
        let g = random_graph(&mut rng, n, 0.3);
        let a = g.adjacency_matrix();
        let m = nalgebra::DMatrix::from_row_slice(n, n, &a);
        let norm = m.norm();
        for lambda in symmetric_eigenvalues(&a, n).unwrap() {
            // smallest singular value of M - lambda I bounds the residual
            let shifted = &m - nalgebra::DMatrix::identity(n, n) * lambda;
            let smin = shifted.singular_values().min();
            assert!(smin <= 1e-8 * norm.max(1.0), "lambda {lambda}: residual {smin}");
        }
    }
}

#[test]
fn k4_minus_edge_clustering() {
    let g = UndirectedGraph::from_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0), (1, 3, 1.0)]).unwrap();
    let c = g.clustering_coefficients();
    let mean = c.iter().sum::<f64>() / 4.0;
    assert!((mean - 5.0 / 6.0).abs() < 1e-15);
    assert_eq!(oracle_topology(&g)[1], cell_graph_features(&g)[1]);
}

#[test]
fn mst_matches_exhaustive_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for trial in 0..100 {
        let n = rng.random_range(1..=8);
        let pts = random_points(&mut rng, n, 100.0, 100.0);
        let tree = minimum_spanning_tree(&pts);
        assert_eq!(tree.edge_count(), pts.len().saturating_sub(1));
        let w: f64 = tree.edges().iter().map(|e| e.weight).sum();
        let want = exhaustive_mst_weight(pts.points());
        assert!((w - want).abs() <= 1e-9 * want.max(1.0), "trial {trial}: {w} vs {want}");
    }
}

#[test]
fn mst_collinear_example() {
    let pts = PointSet::new([Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(3.0, 0.0)], 4.0, 1.0).unwrap();
    let t = minimum_spanning_tree(&pts);
    let mut e: Vec<(usize, usize)> = t.edges().iter().map(|e| (e.u.min(e.v), e.u.max(e.v))).collect();
    e.sort();
    assert_eq!(e, vec![(0, 1), (1, 2)]);
    assert_eq!(exhaustive_mst_weight(pts.points()), 3.0);
}

fn arb_graph() -> impl Strategy<Value = UndirectedGraph> {
    (0usize..25).prop_flat_map(|n| {
        let pairs = n * n.saturating_sub(1) / 2;
        proptest::collection::vec(any::<bool>(), pairs).prop_map(move |bits| {
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if bits[k] {
                        edges.push((i, j, 1.0));
                    }
                    k += 1;
                }
            }
            UndirectedGraph::from_edges(n, edges).unwrap()
        })
    })
}

fn arb_points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((0.0f64..200.0, 0.0f64..200.0), 0..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn degree_sum_is_twice_edges(g in arb_graph()) {
        let s: usize = (0..g.node_count()).map(|v| g.degree(v)).sum();
        prop_assert_eq!(s, 2 * g.edge_count());
        for e in g.edges() {
            prop_assert!(g.has_edge(e.v, e.u) && e.u != e.v);
        }
    }

    #[test]
    fn radius_diameter_bounds_per_component(g in arb_graph()) {
        let ecc = g.eccentricities();
        let labels = g.connected_components();
        let k = labels.iter().max().map_or(0, |m| m + 1);
        for c in 0..k {
            let e: Vec<usize> = (0..g.node_count()).filter(|&v| labels[v] == c).map(|v| ecc[v]).collect();
            let (r, d) = (*e.iter().min().unwrap(), *e.iter().max().unwrap());
            prop_assert!(r <= d && d <= 2 * r);
        }
    }

    #[test]
    fn clustering_in_unit_interval(g in arb_graph()) {
        for c in g.clustering_coefficients() {
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn component_labels_are_dense(g in arb_graph()) {
        let labels = g.connected_components();
        let k = labels.iter().max().map_or(0, |m| m + 1);
        for c in 0..k {
            prop_assert!(labels.contains(&c));
        }
        for e in g.edges() {
            prop_assert_eq!(labels[e.u], labels[e.v]);
        }
    }

    #[test]
    fn eigen_trace_and_count(g in arb_graph(), diag in proptest::collection::vec(-3.0f64..3.0, 25)) {
        let n = g.node_count();
        let mut a = g.adjacency_matrix();
        for i in 0..n {
            a[i * n + i] = diag[i];
        }
        let ev = symmetric_eigenvalues(&a, n).unwrap();
        prop_assert_eq!(ev.len(), n);
        let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
        let sum: f64 = ev.iter().sum();
        prop_assert!((sum - trace).abs() <= 1e-8 * trace.abs().max(1.0));
        prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mst_weight_rigid_motion_invariant(
        pts in arb_points(30), angle in 0.0f64..std::f64::consts::TAU, dx in -50.0f64..50.0, dy in -50.0f64..50.0,
    ) {
        let base = PointSet::new(pts.iter().map(|&(x, y)| Point::new(x, y)), 200.0, 200.0).unwrap();
        let (s, c) = angle.sin_cos();
        // move into a larger frame so every image stays in bounds
        let moved = PointSet::new(
            base.points().iter().map(|p| Point::new(c * p.x - s * p.y + dx + 400.0, s * p.x + c * p.y + dy + 400.0)),
            800.0,
            800.0,
        ).unwrap();
        let w = |t: &UndirectedGraph| t.edges().iter().map(|e| e.weight).sum::<f64>();
        let (a, b) = (w(&minimum_spanning_tree(&base)), w(&minimum_spanning_tree(&moved)));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn radius_graph_permutation_equivariant(pts in arb_points(30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let base = PointSet::new(pts.iter().map(|&(x, y)| Point::new(x, y)), 200.0, 200.0).unwrap();
        let n = base.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let permuted = PointSet::new(perm.iter().map(|&i| base.points()[i]), 200.0, 200.0).unwrap();
        let g = build_radius_graph(&base, 64.0).unwrap();
        let h = build_radius_graph(&permuted, 64.0).unwrap();
        prop_assert_eq!(g.edge_count(), h.edge_count());
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(h.has_edge(a, b), g.has_edge(perm[a], perm[b]));
            }
        }
    }

    #[test]
    fn radius_graph_matches_brute_force(pts in arb_points(40), r in 1.0f64..100.0) {
        let set = PointSet::new(pts.iter().map(|&(x, y)| Point::new(x, y)), 200.0, 200.0).unwrap();
        let g = build_radius_graph(&set, r).unwrap();
        let p = set.points();
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                prop_assert_eq!(g.has_edge(i, j), p[i].dist(p[j]) < r);
            }
        }
    }
}
