use crate::points::{Point, PointSet};

/// Voronoi cells of a point set, each clipped to the patch rectangle
/// `[0, width] x [0, height]`.
///
/// Cell `i` belongs to input point `i` and is a convex counterclockwise
/// polygon. Edge `k` of a cell runs from vertex `k` to vertex `k + 1`;
/// `edge_sources` records the neighbouring generator whose bisector produced
/// it, or `None` for a piece of the rectangle boundary.
#[derive(Clone, Debug)]
pub struct VoronoiCells {
    cells: Vec<Vec<Point>>,
    edge_sources: Vec<Vec<Option<usize>>>,
    width: f64,
    height: f64,
}

impl VoronoiCells {
    pub fn cells(&self) -> &[Vec<Point>] {
        &self.cells
    }

    pub fn edge_sources(&self, cell: usize) -> &[Option<usize>] {
        &self.edge_sources[cell]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn areas(&self) -> Vec<f64> {
        self.cells.iter().map(|c| polygon_area(c)).collect()
    }

    pub fn perimeters(&self) -> Vec<f64> {
        self.cells.iter().map(|c| polygon_perimeter(c)).collect()
    }

    /// Distances between every pair of vertices of each polygon, pooled over
    /// all polygons.
    pub fn chord_lengths(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for cell in &self.cells {
            for (i, a) in cell.iter().enumerate() {
                for b in &cell[i + 1..] {
                    out.push(a.dist(*b));
                }
            }
        }
        out
    }

    /// Whether `q` lies in cell `i` (boundary included, with tolerance `eps`).
    pub fn cell_contains(&self, i: usize, q: Point, eps: f64) -> bool {
        let c = &self.cells[i];
        let n = c.len();
        n >= 3
            && (0..n).all(|k| {
                let (a, b) = (c[k], c[(k + 1) % n]);
                let cross = (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x);
                cross >= -eps * a.dist(b).max(1.0)
            })
    }
}

/// Shoelace area of a simple polygon, positive for counterclockwise order.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

pub fn polygon_perimeter(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 2 {
        return 0.0;
    }
    (0..n).map(|i| poly[i].dist(poly[(i + 1) % n])).sum()
}

/// Builds each cell by intersecting the patch rectangle with the half-planes
/// closer to its generator than to every other point.
///
/// Neighbours are visited nearest first and the scan stops once a neighbour
/// is more than twice as far as the furthest remaining cell vertex, since
/// its bisector can no longer cut the cell.
pub fn voronoi_cells(points: &PointSet) -> VoronoiCells {
    let pts = points.points();
    let (w, h) = (points.width(), points.height());
    let rect = [
        Point::new(0.0, 0.0),
        Point::new(w, 0.0),
        Point::new(w, h),
        Point::new(0.0, h),
    ];
    let mut cells = Vec::with_capacity(pts.len());
    let mut edge_sources = Vec::with_capacity(pts.len());
    let mut others: Vec<(f64, usize)> = Vec::with_capacity(pts.len());
    for (i, &p) in pts.iter().enumerate() {
        others.clear();
        others.extend(
            pts.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (p.dist_sq(*q), j)),
        );
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut poly: Vec<(Point, Option<usize>)> = rect.iter().map(|&v| (v, None)).collect();
        let mut reach_sq = max_dist_sq(p, &poly);
        for &(d_sq, j) in &others {
            if d_sq > 4.0 * reach_sq {
                break;
            }
            poly = clip_half_plane(&poly, p, pts[j], j);
            reach_sq = max_dist_sq(p, &poly);
        }
        let (verts, srcs) = poly.into_iter().unzip();
        cells.push(verts);
        edge_sources.push(srcs);
    }
    VoronoiCells {
        cells,
        edge_sources,
        width: w,
        height: h,
    }
}

fn max_dist_sq(p: Point, poly: &[(Point, Option<usize>)]) -> f64 {
    poly.iter().map(|(v, _)| p.dist_sq(*v)).fold(0.0, f64::max)
}

/// Keeps the part of `poly` at least as close to `p` as to `q`.
fn clip_half_plane(poly: &[(Point, Option<usize>)], p: Point, q: Point, q_index: usize) -> Vec<(Point, Option<usize>)> {
    let (nx, ny) = (q.x - p.x, q.y - p.y);
    let (mx, my) = (0.5 * (p.x + q.x), 0.5 * (p.y + q.y));
    let side = |v: Point| (v.x - mx) * nx + (v.y - my) * ny;

    let n = poly.len();
    let mut out: Vec<(Point, Option<usize>)> = Vec::with_capacity(n + 1);
    for k in 0..n {
        let (cur, label) = poly[k];
        let next = poly[(k + 1) % n].0;
        let (fc, fn_) = (side(cur), side(next));
        let crossing = |t: f64| Point::new(cur.x + t * (next.x - cur.x), cur.y + t * (next.y - cur.y));
        match (fc <= 0.0, fn_ <= 0.0) {
            (true, true) => out.push((cur, label)),
            (true, false) => {
                out.push((cur, label));
                out.push((crossing(fc / (fc - fn_)), Some(q_index)));
            }
            (false, true) => out.push((crossing(fc / (fc - fn_)), label)),
            (false, false) => {}
        }
    }
    dedup_ring(out)
}

/// Removes consecutive (near-)coincident vertices; the later vertex's edge
/// label wins since the earlier one starts a zero-length edge.
fn dedup_ring(ring: Vec<(Point, Option<usize>)>) -> Vec<(Point, Option<usize>)> {
    let scale = ring
        .iter()
        .map(|(v, _)| v.x.abs().max(v.y.abs()))
        .fold(1.0, f64::max);
    let tol_sq = (1e-12 * scale).powi(2);
    let mut out: Vec<(Point, Option<usize>)> = Vec::with_capacity(ring.len());
    for item in ring {
        if let Some(last) = out.last_mut() {
            if last.0.dist_sq(item.0) <= tol_sq {
                *last = item;
                continue;
            }
        }
        out.push(item);
    }
    // closing vertex duplicates the first: its edge is the zero-length one
    while out.len() > 1 && out[0].0.dist_sq(out[out.len() - 1].0) <= tol_sq {
        out.pop();
    }
    out
}
