//! Delaunay triangulation and rectangle-clipped Voronoi cells of nuclei.

mod delaunay;
mod voronoi;

pub use delaunay::{delaunay_triangulation, incircle, orient2d, Triangulation};
pub use voronoi::{polygon_area, polygon_perimeter, voronoi_cells, VoronoiCells};

/// Points closer than this (in pixels) are merged before triangulating.
pub const MERGE_TOLERANCE: f64 = 1e-6;

/// Tolerance on the scale-normalised in-circle determinant.
pub const INCIRCLE_EPS: f64 = 1e-9;
