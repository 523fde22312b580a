//! Brute-force reference implementations and input generators shared by the
//! integration tests. The oracles do not call into the library's algorithms.

#![allow(dead_code)]

use cellpatch::gcn::{Architecture, GcnModel, Mode, NormalizedAdjacency};
use cellpatch::{Point, PointSet, UndirectedGraph};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INF: usize = usize::MAX;

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> UndirectedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    UndirectedGraph::from_edges(n, edges).unwrap()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, w: f64, h: f64) -> PointSet {
    PointSet::new(
        (0..n).map(|_| Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h))),
        w,
        h,
    )
    .unwrap()
}

pub fn adjacency(g: &UndirectedGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut a = vec![vec![false; n]; n];
    for e in g.edges() {
        a[e.u][e.v] = true;
        a[e.v][e.u] = true;
    }
    a
}

pub fn floyd_warshall(a: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = a.len();
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] != INF && d[k][j] != INF && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Table II topology block computed from Floyd-Warshall distances and
/// triple-loop triangle counts. Indices 0..12 of the cell-graph block.
pub fn oracle_topology(g: &UndirectedGraph) -> [f64; 12] {
    let n = g.node_count();
    if n == 0 {
        return [0.0; 12];
    }
    let a = adjacency(g);
    let d = floyd_warshall(&a);
    let deg: Vec<usize> = a.iter().map(|r| r.iter().filter(|&&x| x).count()).collect();
    let m = deg.iter().sum::<usize>() / 2;

    let mut clustering = 0.0;
    for v in 0..n {
        if deg[v] < 2 {
            continue;
        }
        let mut t = 0;
        for i in 0..n {
            for j in i + 1..n {
                if a[v][i] && a[v][j] && a[i][j] {
                    t += 1;
                }
            }
        }
        clustering += 2.0 * t as f64 / (deg[v] * (deg[v] - 1)) as f64;
    }
    clustering /= n as f64;

    // components: smallest reachable index names the component
    let mut reps: Vec<usize> = (0..n).map(|i| (0..n).find(|&j| d[i][j] != INF).unwrap()).collect();
    let giant = (0..n).map(|r| reps.iter().filter(|&&x| x == r).count()).max().unwrap();
    reps.sort();
    reps.dedup();

    let ecc: Vec<usize> = (0..n)
        .map(|i| (0..n).filter(|&j| d[i][j] != INF).map(|j| d[i][j]).max().unwrap())
        .collect();
    let diameter = *ecc.iter().max().unwrap();
    let connected: Vec<usize> = (0..n).filter(|&v| deg[v] > 0).collect();
    let radius = connected.iter().map(|&v| ecc[v]).min().unwrap_or(0);
    let central = connected.iter().filter(|&&v| ecc[v] == radius).count();
    let (mut sum, mut pairs) = (0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            if d[i][j] != INF {
                sum += d[i][j];
                pairs += 1;
            }
        }
    }
    [
        2.0 * m as f64 / n as f64,
        clustering,
        giant as f64 / n as f64,
        reps.len() as f64,
        ecc.iter().sum::<usize>() as f64 / n as f64,
        diameter as f64,
        radius as f64,
        if pairs == 0 { 0.0 } else { sum as f64 / pairs as f64 },
        central as f64,
        100.0 * central as f64 / n as f64,
        n as f64,
        m as f64,
    ]
}

/// Ascending adjacency spectrum from nalgebra's symmetric eigensolver.
pub fn oracle_spectrum(g: &UndirectedGraph) -> Vec<f64> {
    let n = g.node_count();
    let a = adjacency(g);
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| if a[i][j] { 1.0 } else { 0.0 });
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Ordinary least-squares slope of `y` against `0..len`, via the normal
/// equations in raw sums.
pub fn ols_slope(y: &[f64]) -> f64 {
    let k = y.len() as f64;
    if y.len() < 2 {
        return 0.0;
    }
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let x = i as f64;
        sx += x;
        sy += v;
        sxx += x * x;
        sxy += x * v;
    }
    (k * sxy - sx * sy) / (k * sxx - sx * sx)
}

/// Spectral block (indices 12..18) from the oracle spectrum.
pub fn oracle_spectral(g: &UndirectedGraph) -> [f64; 6] {
    let n = g.node_count();
    if n == 0 {
        return [0.0; 6];
    }
    let ev = oracle_spectrum(g);
    let half = n.div_ceil(2);
    let deg_sum: usize = adjacency(g).iter().map(|r| r.iter().filter(|&&x| x).count()).sum();
    [
        ev[n - 1],
        ev.iter().sum(),
        ev.iter().map(|l| l.abs()).sum(),
        ols_slope(&ev[..half]),
        ols_slope(&ev[n - half..]),
        deg_sum as f64,
    ]
}

/// Minimum spanning-tree weight by decoding every Prüfer sequence.
pub fn exhaustive_mst_weight(pts: &[Point]) -> f64 {
    let n = pts.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return pts[0].dist(pts[1]);
    }
    let len = n - 2;
    let total = n.pow(len as u32);
    let mut best = f64::INFINITY;
    let mut seq = vec![0usize; len];
    for code in 0..total {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = c % n;
            c /= n;
        }
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut w = 0.0;
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            w += pts[leaf].dist(pts[s]);
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        w += pts[rest[0]].dist(pts[rest[1]]);
        best = best.min(w);
    }
    best
}

/// Circumcentre and squared radius of a non-degenerate triangle.
pub fn circumcircle(a: Point, b: Point, c: Point) -> (Point, f64) {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    let a2 = a.x * a.x + a.y * a.y;
    let b2 = b.x * b.x + b.y * b.y;
    let c2 = c.x * c.x + c.y * c.y;
    let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
    let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
    let centre = Point::new(ux, uy);
    (centre, centre.dist_sq(a))
}

/// Point-in-convex-polygon with a boundary tolerance, for counterclockwise
/// polygons.
pub fn in_convex_polygon(poly: &[Point], q: Point, tol: f64) -> bool {
    let n = poly.len();
    n >= 3
        && (0..n).all(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            let len = a.dist(b);
            len == 0.0 || ((b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x)) / len >= -tol
        })
}

/// Convex hull area by gift wrapping.
pub fn hull_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let start = (0..n)
        .min_by(|&i, &j| pts[i].x.total_cmp(&pts[j].x).then(pts[i].y.total_cmp(&pts[j].y)))
        .unwrap();
    let mut hull = vec![start];
    let mut cur = start;
    loop {
        let mut next = (cur + 1) % n;
        for j in 0..n {
            let (a, b, c) = (pts[cur], pts[next], pts[j]);
            let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
            if cross < 0.0 || (cross == 0.0 && a.dist_sq(c) > a.dist_sq(b)) {
                next = j;
            }
        }
        if next == start {
            break;
        }
        hull.push(next);
        cur = next;
        if hull.len() > n {
            break;
        }
    }
    let mut area = 0.0;
    for k in 0..hull.len() {
        let (a, b) = (pts[hull[k]], pts[hull[(k + 1) % hull.len()]]);
        area += a.x * b.y - b.x * a.y;
    }
    0.5 * area.abs()
}

/// Greedy one-to-one matching of detections to truth within `tol`, nearest
/// pairs first. Returns the number of matched pairs.
pub fn greedy_match(truth: &[Point], found: &[Point], tol: f64) -> usize {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, f) in found.iter().enumerate() {
            let d = t.dist(*f);
            if d <= tol {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut ut, mut uf) = (vec![false; truth.len()], vec![false; found.len()]);
    let mut matched = 0;
    for (_, i, j) in pairs {
        if !ut[i] && !uf[j] {
            ut[i] = true;
            uf[j] = true;
            matched += 1;
        }
    }
    matched
}

/// The 69 values assembled block by block, without the final non-finite
/// guard in `patch_feature_vector`.
pub fn raw_feature_blocks(points: &PointSet, radius: f64) -> Vec<f64> {
    use cellpatch::features::*;
    use cellpatch::graph::{build_radius_graph, minimum_spanning_tree};
    use cellpatch::tessellation::{delaunay_triangulation, voronoi_cells};
    let mut v = Vec::new();
    v.extend(cell_graph_features(&build_radius_graph(points, radius).unwrap()));
    let cells = voronoi_cells(points);
    v.extend(voronoi_features(&cells));
    match delaunay_triangulation(points) {
        Ok(t) => v.extend(delaunay_features(&t)),
        Err(_) => v.extend([0.0; DELAUNAY_FEATURES]),
    }
    v.extend(mst_features(&minimum_spanning_tree(points)));
    v.extend(density_features(points, cells.areas().iter().sum()));
    v
}

/// Random point set drawn from one of several shapes: uniform, clustered,
/// collinear, duplicated or tiny.
pub fn random_feature_input(rng: &mut ChaCha8Rng, w: f64, h: f64) -> PointSet {
    let kind = rng.random_range(0..6);
    let pts: Vec<Point> = match kind {
        0 => {
            let n = rng.random_range(0..=2);
            (0..n).map(|_| Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h))).collect()
        }
        1 => {
            // collinear, possibly axis aligned
            let n = rng.random_range(3..40);
            let (x0, y0) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
            let (dx, dy) = match rng.random_range(0..3) {
                0 => (1.0, 0.0),
                1 => (0.0, 1.0),
                _ => (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            };
            (0..n)
                .map(|_| {
                    let t = rng.random_range(-w..w);
                    Point::new((x0 + t * dx).clamp(0.0, w - 1e-6), (y0 + t * dy).clamp(0.0, h - 1e-6))
                })
                .collect()
        }
        2 => {
            // tight cluster
            let n = rng.random_range(3..60);
            let (cx, cy) = (rng.random_range(5.0..w - 5.0), rng.random_range(5.0..h - 5.0));
            (0..n)
                .map(|_| Point::new(cx + rng.random_range(-2.0..2.0), cy + rng.random_range(-2.0..2.0)))
                .collect()
        }
        3 => {
            // integer lattice points with repeats
            let n = rng.random_range(3..80);
            (0..n)
                .map(|_| Point::new(rng.random_range(0..5) as f64 * 10.0, rng.random_range(0..5) as f64 * 10.0))
                .collect()
        }
        _ => {
            let n = rng.random_range(3..250);
            (0..n).map(|_| Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h))).collect()
        }
    };
    PointSet::new(pts, w, h).unwrap()
}

pub fn random_arch(rng: &mut ChaCha8Rng) -> Architecture {
    Architecture {
        input_dim: rng.random_range(1..6),
        gcn_dims: (0..rng.random_range(1..4)).map(|_| rng.random_range(1..6)).collect(),
        head_dims: (0..rng.random_range(0..3)).map(|_| rng.random_range(1..6)).collect(),
        classes: rng.random_range(2..5),
    }
}

pub fn random_edges(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize, f64)> {
    let mut e = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.4) {
                e.push((i, j, rng.random_range(0.8..1.0)));
            }
        }
    }
    e
}

pub fn random_x(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
}

/// Glorot weights with nonzero biases, so no pre-activation starts exactly
/// on the ReLU kink.
pub fn random_model(rng: &mut ChaCha8Rng, arch: Architecture, dropout: f64) -> GcnModel {
    let mut model = GcnModel::new(arch, dropout, rng).unwrap();
    for b in model.params.linear_b.iter_mut() {
        b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    model
}

fn gcn_loss(model: &GcnModel, x: &Array2<f64>, adj: &NormalizedAdjacency, label: usize, mode: Mode, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    -model.forward(x, adj, mode, &mut rng).unwrap().probs[label].ln()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

/// Worst central-difference error over every parameter and input entry.
pub fn gradient_check(model: &GcnModel, x: &Array2<f64>, adj: &NormalizedAdjacency, label: usize, mode: Mode) -> f64 {
    const H: f64 = 1e-6;
    let seed = 7;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cache = model.forward(x, adj, mode, &mut rng).unwrap();
    let (grads, dx) = model.backward(&cache, adj, label, 1.0, true).unwrap();
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let mut plus = model.clone();
        *plus.params.iter_mut().nth(k).unwrap() += H;
        let mut minus = model.clone();
        *minus.params.iter_mut().nth(k).unwrap() -= H;
        let fd = (gcn_loss(&plus, x, adj, label, mode, seed) - gcn_loss(&minus, x, adj, label, mode, seed)) / (2.0 * H);
        worst = worst.max(rel_err(a, fd));
    }
    let dx = dx.unwrap();
    for idx in 0..x.len() {
        let (i, j) = (idx / x.ncols(), idx % x.ncols());
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[[i, j]] += H;
        xm[[i, j]] -= H;
        let fd = (gcn_loss(model, &xp, adj, label, mode, seed) - gcn_loss(model, &xm, adj, label, mode, seed)) / (2.0 * H);
        worst = worst.max(rel_err(dx[[i, j]], fd));
    }
    worst
}
