//! Nuclei centroids within one patch.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Lexicographic comparison on (x, y).
    pub fn lex_cmp(&self, other: &Point) -> std::cmp::Ordering {
        self.x
            .total_cmp(&other.x)
            .then_with(|| self.y.total_cmp(&other.y))
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// Detected nuclei centroids of a single `width x height` patch, in pixel
/// coordinates relative to the patch origin.
///
/// Every point lies in `[0, width) x [0, height)` and no two points are
/// identical: exact duplicates are dropped on construction, keeping the first
/// occurrence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    points: Vec<Point>,
    width: f64,
    height: f64,
}

impl PointSet {
    pub fn new(points: impl IntoIterator<Item = Point>, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::invalid(format!(
                "patch dimensions must be positive and finite, got {width} x {height}"
            )));
        }
        let mut kept: Vec<Point> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for p in points {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::invalid(format!("non-finite point ({}, {})", p.x, p.y)));
            }
            if p.x < 0.0 || p.x >= width || p.y < 0.0 || p.y >= height {
                return Err(Error::invalid(format!(
                    "point ({}, {}) outside patch [0, {width}) x [0, {height})",
                    p.x, p.y
                )));
            }
            // -0.0 and 0.0 are the same location
            let key = ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits());
            if seen.insert(key) {
                kept.push(p);
            }
        }
        Ok(PointSet {
            points: kept,
            width,
            height,
        })
    }

    pub fn empty(width: f64, height: f64) -> Result<Self> {
        Self::new(std::iter::empty(), width, height)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Pairwise Euclidean distance matrix, row-major `n x n`.
    pub fn distance_matrix(&self) -> Vec<f64> {
        let n = self.points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.points[i].dist(self.points[j]);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        d
    }

    /// Copy of the set with points closer than `tol` to an earlier point
    /// removed.
    pub fn merged_within(&self, tol: f64) -> PointSet {
        let tol_sq = tol * tol;
        let mut kept: Vec<Point> = Vec::with_capacity(self.points.len());
        for &p in &self.points {
            if kept.iter().all(|q| q.dist_sq(p) >= tol_sq) {
                kept.push(p);
            }
        }
        PointSet {
            points: kept,
            width: self.width,
            height: self.height,
        }
    }
}
