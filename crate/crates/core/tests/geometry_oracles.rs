mod common;

use cellpatch::tessellation::{delaunay_triangulation, voronoi_cells};
use cellpatch::{Point, PointSet};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIZE: f64 = 256.0;

fn empty_circle_violations(pts: &PointSet) -> usize {
    let tri = delaunay_triangulation(pts).unwrap();
    let p = tri.points();
    let mut bad = 0;
    for t in tri.triangles() {
        let (c, r2) = circumcircle(p[t[0]], p[t[1]], p[t[2]]);
        for (k, q) in p.iter().enumerate() {
            if t.contains(&k) {
                continue;
            }
            if c.dist_sq(*q) < r2 * (1.0 - 1e-9) {
                bad += 1;
            }
        }
    }
    bad
}

#[test]
fn delaunay_has_no_empty_circle_violations() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for _ in 0..100 {
        let n = rng.random_range(3..=200);
        let pts = random_points(&mut rng, n, SIZE, SIZE);
        assert_eq!(empty_circle_violations(&pts), 0);
    }
}

#[test]
fn delaunay_on_integer_grid_has_no_violations() {
    let pts = PointSet::new(
        (0..8).flat_map(|i| (0..8).map(move |j| Point::new(10.0 * i as f64 + 5.0, 10.0 * j as f64 + 5.0))),
        100.0,
        100.0,
    )
    .unwrap();
    assert_eq!(empty_circle_violations(&pts), 0);
    let tri = delaunay_triangulation(&pts).unwrap();
    assert_eq!(tri.triangles().len(), 2 * 7 * 7);
}

#[test]
fn triangle_areas_sum_to_hull_area() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    for _ in 0..100 {
        let n = rng.random_range(3..=150);
        let pts = random_points(&mut rng, n, SIZE, SIZE);
        let tri = delaunay_triangulation(&pts).unwrap();
        let sum: f64 = tri.triangles().iter().map(|t| tri.triangle_area(t)).sum();
        let hull = hull_area(pts.points());
        assert!((sum - hull).abs() <= 1e-9 * hull, "{sum} vs {hull}");
        // Euler: t = 2n - 2 - h, so at most 2n - 5 triangles
        assert!(tri.triangles().len() <= 2 * pts.len() - 5);
    }
}

#[test]
fn collinear_and_tiny_inputs_are_degenerate() {
    let line = PointSet::new((0..10).map(|i| Point::new(i as f64, 2.0 * i as f64)), 20.0, 20.0).unwrap();
    assert!(delaunay_triangulation(&line).is_err());
    let two = PointSet::new([Point::new(1.0, 1.0), Point::new(2.0, 2.0)], 5.0, 5.0).unwrap();
    assert!(delaunay_triangulation(&two).is_err());
}

#[test]
fn voronoi_areas_sum_to_patch_area() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..100 {
        let n = rng.random_range(1..=300);
        let pts = random_points(&mut rng, n, SIZE, SIZE);
        let total: f64 = voronoi_cells(&pts).areas().iter().sum();
        let area = SIZE * SIZE;
        assert!((total - area).abs() <= 1e-6 * area, "{total} vs {area}");
    }
}

#[test]
fn voronoi_cells_match_nearest_generator() {
    let mut rng = ChaCha8Rng::seed_from_u64(203);
    for _ in 0..10 {
        let n = rng.random_range(2..=60);
        let pts = random_points(&mut rng, n, SIZE, SIZE);
        let cells = voronoi_cells(&pts);
        let p = pts.points();
        for _ in 0..1000 {
            let q = Point::new(rng.random_range(0.0..SIZE), rng.random_range(0.0..SIZE));
            let mut d: Vec<(f64, usize)> = p.iter().enumerate().map(|(i, g)| (g.dist(q), i)).collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0));
            // skip samples on a near-tie
            if d[1].0 - d[0].0 < 1e-6 {
                continue;
            }
            let owner = d[0].1;
            assert!(in_convex_polygon(&cells.cells()[owner], q, 1e-9));
            for (i, c) in cells.cells().iter().enumerate() {
                if i != owner {
                    assert!(!in_convex_polygon(c, q, -1e-9), "sample in cell {i}, owner {owner}");
                }
            }
        }
    }
}

#[test]
fn voronoi_neighbours_are_delaunay_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(204);
    for _ in 0..50 {
        let n = rng.random_range(3..=120);
        let pts = random_points(&mut rng, n, SIZE, SIZE);
        let tri = delaunay_triangulation(&pts).unwrap();
        let edges: std::collections::HashSet<(usize, usize)> = tri.edges().into_iter().collect();
        let cells = voronoi_cells(&pts);
        for i in 0..cells.len() {
            let poly = &cells.cells()[i];
            for (k, src) in cells.edge_sources(i).iter().enumerate() {
                let Some(j) = *src else { continue };
                // zero-length pieces come from vertex ties
                if poly[k].dist(poly[(k + 1) % poly.len()]) < 1e-9 {
                    continue;
                }
                assert!(edges.contains(&(i.min(j), i.max(j))), "bisector {i}-{j} has no Delaunay edge");
            }
        }
    }
}

fn arb_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((0.0f64..SIZE, 0.0f64..SIZE), 3..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn delaunay_is_input_order_invariant(pts in arb_points(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let a = PointSet::new(pts.iter().map(|&p| p.into()), SIZE, SIZE).unwrap();
        prop_assume!(delaunay_triangulation(&a).is_ok());
        let mut shuffled: Vec<Point> = a.points().to_vec();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = PointSet::new(shuffled, SIZE, SIZE).unwrap();
        let canon = |s: &PointSet| {
            let tri = delaunay_triangulation(s).unwrap();
            let mut out: Vec<[(u64, u64); 3]> = tri
                .triangles()
                .iter()
                .map(|t| {
                    let mut v = t.map(|i| (s.points()[i].x.to_bits(), s.points()[i].y.to_bits()));
                    v.sort();
                    v
                })
                .collect();
            out.sort();
            out
        };
        prop_assert_eq!(canon(&a), canon(&b));
    }

    #[test]
    fn delaunay_empty_circle(pts in arb_points()) {
        let set = PointSet::new(pts.iter().map(|&p| p.into()), SIZE, SIZE).unwrap();
        prop_assume!(delaunay_triangulation(&set).is_ok());
        prop_assert_eq!(empty_circle_violations(&set), 0);
    }

    #[test]
    fn voronoi_area_partition(pts in proptest::collection::vec((0.0f64..SIZE, 0.0f64..SIZE), 1..80)) {
        let set = PointSet::new(pts.iter().map(|&p| p.into()), SIZE, SIZE).unwrap();
        let cells = voronoi_cells(&set);
        prop_assert_eq!(cells.len(), set.len());
        let total: f64 = cells.areas().iter().sum();
        prop_assert!((total - SIZE * SIZE).abs() <= 1e-6 * SIZE * SIZE);
        for (i, c) in cells.cells().iter().enumerate() {
            prop_assert!(cells.cell_contains(i, set.points()[i], 1e-9));
            prop_assert!(c.iter().all(|v| v.x >= -1e-9 && v.x <= SIZE + 1e-9 && v.y >= -1e-9 && v.y <= SIZE + 1e-9));
        }
    }
}

#[test]
fn nearly_collinear_set_triangulates_consistently() {
    let raw = [
        (18.856009161166412, 38.36521983123681),
        (21.111184344146906, 38.88569300399155),
        (37.50475821146505, 42.66917531077874),
        (104.32712523651364, 58.091147687462865),
        (165.26214142045217, 72.15437498992038),
        (56.08461712399531, 46.957231595949246),
        (30.981887765635733, 41.163758302809526),
        (162.49262301976893, 71.51519625121983),
        (148.36092664048283, 68.25373394601083),
        (77.75374106894907, 51.958261128182855),
        (102.70568943119, 57.71693558882687),
        (176.1302040883878, 74.6626214007389),
        (154.37748203566136, 69.64229821330851),
    ];
    let pts = PointSet::new(raw.map(Point::from), SIZE, SIZE).unwrap();
    if let Ok(tri) = delaunay_triangulation(&pts) {
        let sum: f64 = tri.triangles().iter().map(|t| tri.triangle_area(t)).sum();
        assert!((sum - hull_area(pts.points())).abs() <= 1e-9);
        assert_eq!(empty_circle_violations(&pts), 0);
    }
}
