use crate::points::{Point, PointSet};
use crate::{Error, Result};

use super::{INCIRCLE_EPS, MERGE_TOLERANCE};

const NONE: usize = usize::MAX;

fn coord(p: Point) -> robust::Coord<f64> {
    robust::Coord { x: p.x, y: p.y }
}

/// Twice the signed area of `(a, b, c)`; positive when counterclockwise.
/// The sign is exact.
pub fn orient2d(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Scale-normalised in-circle determinant: positive when `d` lies inside the
/// circumcircle of the counterclockwise triangle `(a, b, c)`.
///
/// Coordinates are taken relative to `d` and divided by the largest of the
/// three offsets, so the result is dimensionless and comparable against
/// [`INCIRCLE_EPS`].
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let s = a.dist(d).max(b.dist(d)).max(c.dist(d));
    if s == 0.0 {
        return 0.0;
    }
    let (adx, ady) = ((a.x - d.x) / s, (a.y - d.y) / s);
    let (bdx, bdy) = ((b.x - d.x) / s, (b.y - d.y) / s);
    let (cdx, cdy) = ((c.x - d.x) / s, (c.y - d.y) / s);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    ad * (bdx * cdy - cdx * bdy) + bd * (cdx * ady - adx * cdy) + cd * (adx * bdy - bdx * ady)
}

/// Delaunay triangulation of a point set.
///
/// Triangles index into the original [`PointSet`] and are stored
/// counterclockwise. Points within [`MERGE_TOLERANCE`] of an earlier point
/// are not triangulated.
#[derive(Clone, Debug)]
pub struct Triangulation {
    points: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    vertex_count: usize,
}

impl Triangulation {
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Number of distinct input points that are triangle vertices.
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Unique undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn triangle_area(&self, t: &[usize; 3]) -> f64 {
        0.5 * orient2d(self.points[t[0]], self.points[t[1]], self.points[t[2]]).abs()
    }

    /// Side lengths of every triangle, three per triangle (shared edges are
    /// counted once per incident triangle).
    pub fn side_lengths(&self) -> Vec<f64> {
        let p = &self.points;
        self.triangles
            .iter()
            .flat_map(|t| [p[t[0]].dist(p[t[1]]), p[t[1]].dist(p[t[2]]), p[t[2]].dist(p[t[0]])])
            .collect()
    }
}

/// Triangulates `points`.
///
/// Construction: the convex hull is fan-triangulated and made Delaunay by
/// edge flips, then the remaining points are inserted one at a time in
/// lexicographic order, each followed by local flips. Cocircular ties are
/// resolved in favour of the diagonal touching the lexicographically smallest
/// of the four points, so the result does not depend on input order.
///
/// Fails with [`Error::Degenerate`] for fewer than three distinct points or
/// when all points are collinear.
pub fn delaunay_triangulation(points: &PointSet) -> Result<Triangulation> {
    let merged = merge_indices(points.points());
    if merged.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 distinct points, got {}",
            merged.len()
        )));
    }
    // local index = rank in lexicographic order
    let mut order = merged;
    order.sort_by(|&a, &b| points.points()[a].lex_cmp(&points.points()[b]));
    let local: Vec<Point> = order.iter().map(|&i| points.points()[i]).collect();

    let mut mesh = Mesh::from_hull(&local)?;
    mesh.legalize_all();
    let on_hull = {
        let mut v = vec![false; local.len()];
        for t in &mesh.tris {
            for &i in t {
                v[i] = true;
            }
        }
        v
    };
    for p in 0..local.len() {
        if !on_hull[p] {
            mesh.insert(p);
        }
    }
    let triangles = mesh
        .tris
        .iter()
        .map(|t| [order[t[0]], order[t[1]], order[t[2]]])
        .collect();
    Ok(Triangulation {
        points: points.points().to_vec(),
        triangles,
        vertex_count: local.len(),
    })
}

/// Indices of points that survive near-duplicate merging, in input order.
fn merge_indices(pts: &[Point]) -> Vec<usize> {
    let mut by_x: Vec<usize> = (0..pts.len()).collect();
    by_x.sort_by(|&a, &b| pts[a].lex_cmp(&pts[b]).then(a.cmp(&b)));
    let mut dropped = vec![false; pts.len()];
    let tol_sq = MERGE_TOLERANCE * MERGE_TOLERANCE;
    for (k, &i) in by_x.iter().enumerate() {
        if dropped[i] {
            continue;
        }
        for &j in &by_x[k + 1..] {
            if pts[j].x - pts[i].x >= MERGE_TOLERANCE {
                break;
            }
            if !dropped[j] && pts[i].dist_sq(pts[j]) < tol_sq {
                // keep whichever came first in the input
                if j < i {
                    dropped[i] = true;
                    break;
                }
                dropped[j] = true;
            }
        }
    }
    (0..pts.len()).filter(|&i| !dropped[i]).collect()
}

/// Triangle mesh with adjacency; `nbr[t][i]` is the triangle across the edge
/// opposite vertex `i` of triangle `t`.
struct Mesh<'a> {
    pts: &'a [Point],
    tris: Vec<[usize; 3]>,
    nbr: Vec<[usize; 3]>,
    last: usize,
}

enum Location {
    Inside(usize),
    OnEdge(usize, usize),
    OnVertex,
}

impl<'a> Mesh<'a> {
    /// Fan triangulation of the strict convex hull of lexicographically
    /// sorted points.
    fn from_hull(pts: &'a [Point]) -> Result<Self> {
        let hull = convex_hull(pts);
        if hull.len() < 3 {
            return Err(Error::Degenerate("all points are collinear".into()));
        }
        let m = hull.len();
        let mut tris = Vec::with_capacity(m - 2);
        let mut nbr = Vec::with_capacity(m - 2);
        for k in 1..m - 1 {
            tris.push([hull[0], hull[k], hull[k + 1]]);
            // opposite hull[0]: boundary; opposite hull[k]: next fan triangle;
            // opposite hull[k+1]: previous fan triangle
            let next = if k + 2 < m { k } else { NONE };
            let prev = if k > 1 { k - 2 } else { NONE };
            nbr.push([NONE, next, prev]);
        }
        Ok(Mesh {
            pts,
            tris,
            nbr,
            last: 0,
        })
    }

    fn p(&self, i: usize) -> Point {
        self.pts[i]
    }

    fn replace_nbr(&mut self, t: usize, old: usize, new: usize) {
        if t == NONE {
            return;
        }
        for k in 0..3 {
            if self.nbr[t][k] == old {
                self.nbr[t][k] = new;
                return;
            }
        }
        unreachable!("triangle {t} is not adjacent to {old}");
    }

    fn legalize_all(&mut self) {
        let stack: Vec<(usize, usize)> = (0..self.tris.len())
            .flat_map(|t| (0..3).map(move |i| (t, i)))
            .collect();
        self.legalize(stack);
    }

    fn locate(&self, p: Point) -> Location {
        let classify = |t: usize| -> Result<Location, usize> {
            let v = self.tris[t];
            let mut on_edge = None;
            for i in 0..3 {
                let a = self.p(v[(i + 1) % 3]);
                let b = self.p(v[(i + 2) % 3]);
                let o = orient2d(a, b, p);
                if o == 0.0 {
                    on_edge = Some(i);
                } else if o < 0.0 {
                    return Err(i);
                }
            }
            Ok(match on_edge {
                Some(i) => {
                    let v = self.tris[t];
                    let (a, b) = (self.p(v[(i + 1) % 3]), self.p(v[(i + 2) % 3]));
                    if a.dist(p) <= MERGE_TOLERANCE || b.dist(p) <= MERGE_TOLERANCE {
                        Location::OnVertex
                    } else {
                        Location::OnEdge(t, i)
                    }
                }
                None => Location::Inside(t),
            })
        };

        let mut t = self.last.min(self.tris.len() - 1);
        for _ in 0..self.tris.len() + 8 {
            match classify(t) {
                Ok(loc) => return loc,
                Err(i) => {
                    let next = self.nbr[t][i];
                    if next == NONE {
                        break;
                    }
                    t = next;
                }
            }
        }
        // the walk should not cycle; scan as a safeguard
        let mut best = (f64::NEG_INFINITY, 0);
        for t in 0..self.tris.len() {
            if let Ok(loc) = classify(t) {
                return loc;
            }
            let v = self.tris[t];
            let worst = (0..3)
                .map(|i| orient2d(self.p(v[(i + 1) % 3]), self.p(v[(i + 2) % 3]), p))
                .fold(f64::INFINITY, f64::min);
            if worst > best.0 {
                best = (worst, t);
            }
        }
        Location::Inside(best.1)
    }

    fn insert(&mut self, p: usize) {
        match self.locate(self.p(p)) {
            Location::OnVertex => {}
            Location::Inside(t) => self.split_triangle(t, p),
            Location::OnEdge(t, i) => self.split_edge(t, i, p),
        }
    }

    fn split_triangle(&mut self, t: usize, p: usize) {
        let [a, b, c] = self.tris[t];
        let [na, nb, nc] = self.nbr[t];
        let t1 = self.tris.len();
        let t2 = t1 + 1;
        self.tris[t] = [a, b, p];
        self.nbr[t] = [t1, t2, nc];
        self.tris.push([b, c, p]);
        self.nbr.push([t2, t, na]);
        self.tris.push([c, a, p]);
        self.nbr.push([t, t1, nb]);
        self.replace_nbr(na, t, t1);
        self.replace_nbr(nb, t, t2);
        self.last = t;
        self.legalize(vec![(t, 2), (t1, 2), (t2, 2)]);
    }

    /// `p` lies on the edge of `t` opposite its vertex `i`.
    fn split_edge(&mut self, t: usize, i: usize, p: usize) {
        let v = self.tris[t];
        let (c, a, b) = (v[i], v[(i + 1) % 3], v[(i + 2) % 3]);
        let n_bc = self.nbr[t][(i + 1) % 3];
        let n_ca = self.nbr[t][(i + 2) % 3];
        let u = self.nbr[t][i];

        let t2 = self.tris.len();
        if u == NONE {
            self.tris[t] = [c, a, p];
            self.nbr[t] = [NONE, t2, n_ca];
            self.tris.push([p, b, c]);
            self.nbr.push([n_bc, t, NONE]);
            self.replace_nbr(n_bc, t, t2);
            self.last = t;
            self.legalize(vec![(t, 2), (t2, 0)]);
            return;
        }

        let j = (0..3).find(|&k| self.nbr[u][k] == t).expect("adjacency is symmetric");
        let d = self.tris[u][j];
        let n_db = self.nbr[u][(j + 2) % 3];
        let n_ad = self.nbr[u][(j + 1) % 3];
        let u2 = t2 + 1;
        self.tris[t] = [c, a, p];
        self.nbr[t] = [u2, t2, n_ca];
        self.tris.push([p, b, c]);
        self.nbr.push([n_bc, t, u]);
        self.tris[u] = [d, b, p];
        self.nbr[u] = [t2, u2, n_db];
        self.tris.push([d, p, a]);
        self.nbr.push([t, n_ad, u]);
        self.replace_nbr(n_bc, t, t2);
        self.replace_nbr(n_ad, u, u2);
        self.last = t;
        self.legalize(vec![(t, 2), (t2, 0), (u, 2), (u2, 1)]);
    }

    /// Whether the edge of `t` opposite vertex `i` should be flipped, given
    /// the opposite vertex `d` of the neighbouring triangle.
    fn should_flip(&self, t: usize, i: usize, d: usize) -> bool {
        let v = self.tris[t];
        let (c, a, b) = (v[i], v[(i + 1) % 3], v[(i + 2) % 3]);
        let (pc, pa, pb, pd) = (self.p(c), self.p(a), self.p(b), self.p(d));
        // the flipped pair must be a valid (strictly convex) quad
        if orient2d(pc, pa, pd) <= 0.0 || orient2d(pc, pd, pb) <= 0.0 {
            return false;
        }
        let det = incircle(pc, pa, pb, pd);
        if det > INCIRCLE_EPS {
            return true;
        }
        if det < -INCIRCLE_EPS {
            return false;
        }
        // cocircular: prefer the diagonal through the smallest index
        let lo = a.min(b).min(c).min(d);
        (lo == c || lo == d) && lo != a && lo != b
    }

    fn legalize(&mut self, mut stack: Vec<(usize, usize)>) {
        // safeguard against flip cycles
        let mut budget = 64 * (self.tris.len() + 16) * (self.tris.len() + 16);
        while let Some((t, i)) = stack.pop() {
            let u = self.nbr[t][i];
            if u == NONE {
                continue;
            }
            let j = (0..3).find(|&k| self.nbr[u][k] == t).expect("adjacency is symmetric");
            let d = self.tris[u][j];
            if !self.should_flip(t, i, d) {
                continue;
            }
            if budget == 0 {
                log::warn!("delaunay flip budget exhausted; triangulation may be non-optimal");
                return;
            }
            budget -= 1;

            let v = self.tris[t];
            let (c, a, b) = (v[i], v[(i + 1) % 3], v[(i + 2) % 3]);
            let n_bc = self.nbr[t][(i + 1) % 3];
            let n_ca = self.nbr[t][(i + 2) % 3];
            let n_db = self.nbr[u][(j + 2) % 3];
            let n_ad = self.nbr[u][(j + 1) % 3];
            self.tris[t] = [c, a, d];
            self.nbr[t] = [n_ad, u, n_ca];
            self.tris[u] = [c, d, b];
            self.nbr[u] = [n_db, n_bc, t];
            self.replace_nbr(n_ad, u, t);
            self.replace_nbr(n_bc, t, u);
            stack.extend([(t, 0), (t, 2), (u, 0), (u, 1)]);
        }
    }
}

/// Strict convex hull (no collinear vertices), counterclockwise, of points
/// already sorted lexicographically. Returns local indices.
fn convex_hull(pts: &[Point]) -> Vec<usize> {
    let n = pts.len();
    let mut hull: Vec<usize> = Vec::with_capacity(2 * n);
    for i in 0..n {
        while hull.len() >= 2 && orient2d(pts[hull[hull.len() - 2]], pts[hull[hull.len() - 1]], pts[i]) <= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    let lower = hull.len() + 1;
    for i in (0..n.saturating_sub(1)).rev() {
        while hull.len() >= lower && orient2d(pts[hull[hull.len() - 2]], pts[hull[hull.len() - 1]], pts[i]) <= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}
