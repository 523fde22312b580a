//! The 69-value patch descriptor.
//!
//! Layout (indices into [`PatchFeatureVector::values`]):
//!
//! | range   | block                          | count |
//! |---------|--------------------------------|-------|
//! | 0..18   | cell-graph topology & spectrum | 18    |
//! | 18..30  | Voronoi area, chord, perimeter | 12    |
//! | 30..38  | Delaunay side length, area     | 8     |
//! | 38..42  | MST edge length                | 4     |
//! | 42..69  | nuclei density / neighbours    | 27    |
//!
//! Exact column names are in [`FEATURE_NAMES`]. The cell-graph block (0..18),
//! the Delaunay block and the MST block are invariant under translation of
//! the nuclei. The Voronoi and density blocks are not, because cells are
//! clipped to the patch rectangle.

use serde::{Deserialize, Serialize};

use crate::graph::{self, UndirectedGraph};
use crate::points::PointSet;
use crate::tessellation::{self, Triangulation, VoronoiCells};
use crate::{eigen, Error, Result};

pub const FEATURE_COUNT: usize = 69;
pub const CELL_GRAPH_FEATURES: usize = 18;
pub const VORONOI_FEATURES: usize = 12;
pub const DELAUNAY_FEATURES: usize = 8;
pub const MST_FEATURES: usize = 4;
pub const DENSITY_FEATURES: usize = 27;

/// Default cell-graph linking distance in pixels.
pub const DEFAULT_CELL_GRAPH_RADIUS: f64 = 64.0;

pub const KNN_ORDERS: [usize; 3] = [3, 5, 7];
pub const NEIGHBOUR_RADII: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "cg_avg_degree",
    "cg_clustering_coefficient",
    "cg_giant_component_ratio",
    "cg_connected_components",
    "cg_avg_eccentricity",
    "cg_diameter",
    "cg_radius",
    "cg_avg_path_length",
    "cg_central_points",
    "cg_central_points_pct",
    "cg_vertices",
    "cg_edges",
    "cg_adj_largest_eigenvalue",
    "cg_adj_trace",
    "cg_adj_energy",
    "cg_spectrum_lower_slope",
    "cg_spectrum_upper_slope",
    "cg_laplacian_trace",
    "vor_area_mean",
    "vor_area_sd",
    "vor_area_min_max",
    "vor_area_disorder",
    "vor_chord_mean",
    "vor_chord_sd",
    "vor_chord_min_max",
    "vor_chord_disorder",
    "vor_perimeter_mean",
    "vor_perimeter_sd",
    "vor_perimeter_min_max",
    "vor_perimeter_disorder",
    "del_side_mean",
    "del_side_sd",
    "del_side_min_max",
    "del_side_disorder",
    "del_area_mean",
    "del_area_sd",
    "del_area_min_max",
    "del_area_disorder",
    "mst_edge_mean",
    "mst_edge_sd",
    "mst_edge_min_max",
    "mst_edge_disorder",
    "nn_polygon_area",
    "nn_nuclei_count",
    "nn_nuclei_density",
    "nn_knn3_mean",
    "nn_knn3_sd",
    "nn_knn3_disorder",
    "nn_knn5_mean",
    "nn_knn5_sd",
    "nn_knn5_disorder",
    "nn_knn7_mean",
    "nn_knn7_sd",
    "nn_knn7_disorder",
    "nn_r10_mean",
    "nn_r10_sd",
    "nn_r10_disorder",
    "nn_r20_mean",
    "nn_r20_sd",
    "nn_r20_disorder",
    "nn_r30_mean",
    "nn_r30_sd",
    "nn_r30_disorder",
    "nn_r40_mean",
    "nn_r40_sd",
    "nn_r40_disorder",
    "nn_r50_mean",
    "nn_r50_sd",
    "nn_r50_disorder",
];

/// Mean, population standard deviation, min/max ratio and disorder of a
/// sample. Every field is 0 for an empty sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub mean: f64,
    pub sd: f64,
    pub min_max_ratio: f64,
    pub disorder: f64,
}

impl StatSummary {
    pub fn of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return StatSummary::default();
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd = var.max(0.0).sqrt();
        let (min, max) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        let min_max_ratio = if max > 0.0 { min / max } else { 0.0 };
        let disorder = if mean > 0.0 { 1.0 - 1.0 / (1.0 + sd / mean) } else { 0.0 };
        StatSummary {
            mean,
            sd,
            min_max_ratio,
            disorder,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.mean, self.sd, self.min_max_ratio, self.disorder]
    }

    fn mean_sd_disorder(self) -> [f64; 3] {
        [self.mean, self.sd, self.disorder]
    }
}

/// A validated 69-value patch feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PatchFeatureVector(Vec<f64>);

impl PatchFeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn zeros() -> Self {
        PatchFeatureVector(vec![0.0; FEATURE_COUNT])
    }
}

impl TryFrom<Vec<f64>> for PatchFeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_COUNT {
            return Err(Error::ShapeMismatch {
                expected: format!("{FEATURE_COUNT} features"),
                got: format!("{}", values.len()),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("feature {} is not finite", FEATURE_NAMES[i])));
        }
        Ok(PatchFeatureVector(values))
    }
}

impl From<PatchFeatureVector> for Vec<f64> {
    fn from(v: PatchFeatureVector) -> Self {
        v.0
    }
}

/// Eighteen topology and spectral measures of a cell graph.
pub fn cell_graph_features(g: &UndirectedGraph) -> [f64; CELL_GRAPH_FEATURES] {
    let n = g.node_count();
    if n == 0 {
        return [0.0; CELL_GRAPH_FEATURES];
    }
    let nf = n as f64;
    let m = g.edge_count();

    let clustering = g.clustering_coefficients().iter().sum::<f64>() / nf;
    let labels = g.connected_components();
    let components = labels.iter().copied().max().map_or(0, |c| c + 1);
    let mut sizes = vec![0usize; components];
    for &l in &labels {
        sizes[l] += 1;
    }
    let giant = sizes.iter().copied().max().unwrap_or(0) as f64 / nf;

    let dist = g.distance_summary();
    let mean_ecc = dist.eccentricities.iter().sum::<usize>() as f64 / nf;

    let spectrum = adjacency_spectrum(g, &labels, &sizes);
    let largest = spectrum.last().copied().unwrap_or(0.0);
    let trace: f64 = spectrum.iter().sum();
    let energy: f64 = spectrum.iter().map(|l| l.abs()).sum();
    let (lower, upper) = spectrum_slopes(&spectrum);
    let laplacian_trace = (0..n).map(|v| g.degree(v)).sum::<usize>() as f64;

    [
        2.0 * m as f64 / nf,
        clustering,
        giant,
        components as f64,
        mean_ecc,
        dist.diameter as f64,
        dist.radius as f64,
        dist.mean_path_length,
        dist.central_count as f64,
        100.0 * dist.central_count as f64 / nf,
        nf,
        m as f64,
        largest,
        trace,
        energy,
        lower,
        upper,
        laplacian_trace,
    ]
}

/// Adjacency eigenvalues, ascending, computed one connected component at a
/// time (the matrix is block diagonal under a component ordering).
fn adjacency_spectrum(g: &UndirectedGraph, labels: &[usize], sizes: &[usize]) -> Vec<f64> {
    let n = g.node_count();
    let mut spectrum = Vec::with_capacity(n);
    let mut members: Vec<Vec<usize>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    for (v, &l) in labels.iter().enumerate() {
        members[l].push(v);
    }
    let mut local = vec![0usize; n];
    for nodes in &members {
        let k = nodes.len();
        if k == 1 {
            spectrum.push(0.0);
            continue;
        }
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let mut a = vec![0.0; k * k];
        for &v in nodes {
            for &u in g.neighbors(v) {
                a[local[v] * k + local[u]] = 1.0;
            }
        }
        match eigen::symmetric_eigenvalues(&a, k) {
            Ok(ev) => spectrum.extend(ev),
            Err(e) => {
                log::warn!("adjacency spectrum failed ({e}); spectral features zeroed");
                return vec![0.0; n];
            }
        }
    }
    spectrum.sort_by(f64::total_cmp);
    spectrum
}

/// Least-squares slopes of `(index, eigenvalue)` over the smallest and the
/// largest `ceil(n / 2)` eigenvalues of an ascending spectrum.
pub fn spectrum_slopes(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len();
    let half = n.div_ceil(2);
    (ls_slope(&sorted[..half]), ls_slope(&sorted[n - half..]))
}

fn ls_slope(ys: &[f64]) -> f64 {
    let k = ys.len();
    if k < 2 {
        return 0.0;
    }
    let kf = k as f64;
    let x_mean = (kf - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / kf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Area, chord-length and perimeter summaries of clipped Voronoi cells.
pub fn voronoi_features(cells: &VoronoiCells) -> [f64; VORONOI_FEATURES] {
    let mut out = [0.0; VORONOI_FEATURES];
    if cells.is_empty() {
        return out;
    }
    out[0..4].copy_from_slice(&StatSummary::of(&cells.areas()).to_array());
    out[4..8].copy_from_slice(&StatSummary::of(&cells.chord_lengths()).to_array());
    out[8..12].copy_from_slice(&StatSummary::of(&cells.perimeters()).to_array());
    out
}

/// Side-length and area summaries of Delaunay triangles.
pub fn delaunay_features(t: &Triangulation) -> [f64; DELAUNAY_FEATURES] {
    let mut out = [0.0; DELAUNAY_FEATURES];
    let areas: Vec<f64> = t.triangles().iter().map(|tri| t.triangle_area(tri)).collect();
    out[0..4].copy_from_slice(&StatSummary::of(&t.side_lengths()).to_array());
    out[4..8].copy_from_slice(&StatSummary::of(&areas).to_array());
    out
}

/// Edge-length summary of a spanning tree.
pub fn mst_features(tree: &UndirectedGraph) -> [f64; MST_FEATURES] {
    let lengths: Vec<f64> = tree.edges().iter().map(|e| e.weight).collect();
    StatSummary::of(&lengths).to_array()
}

/// Nuclei count, density and neighbourhood statistics.
///
/// `polygon_area` is the total clipped Voronoi area. For each k in
/// [`KNN_ORDERS`] the distance from every nucleus to its k-th nearest
/// neighbour is summarised (zeros when there are not more than k nuclei);
/// for each r in [`NEIGHBOUR_RADII`] the number of other nuclei at distance
/// `<= r` is summarised.
pub fn density_features(points: &PointSet, polygon_area: f64) -> [f64; DENSITY_FEATURES] {
    let pts = points.points();
    let n = pts.len();
    let mut out = [0.0; DENSITY_FEATURES];
    out[0] = polygon_area;
    out[1] = n as f64;
    out[2] = n as f64 / points.area();
    if n < 2 {
        return out;
    }

    let mut knn: Vec<Vec<f64>> = vec![Vec::with_capacity(n); KNN_ORDERS.len()];
    let mut counts: Vec<Vec<f64>> = vec![Vec::with_capacity(n); NEIGHBOUR_RADII.len()];
    let mut dists = Vec::with_capacity(n - 1);
    for (i, &p) in pts.iter().enumerate() {
        dists.clear();
        dists.extend(pts.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, q)| p.dist(*q)));
        dists.sort_by(f64::total_cmp);
        for (slot, &k) in KNN_ORDERS.iter().enumerate() {
            if n > k {
                knn[slot].push(dists[k - 1]);
            }
        }
        for (slot, &r) in NEIGHBOUR_RADII.iter().enumerate() {
            counts[slot].push(dists.partition_point(|&d| d <= r) as f64);
        }
    }
    for (slot, sample) in knn.iter().enumerate() {
        let at = 3 + 3 * slot;
        out[at..at + 3].copy_from_slice(&StatSummary::of(sample).mean_sd_disorder());
    }
    for (slot, sample) in counts.iter().enumerate() {
        let at = 12 + 3 * slot;
        out[at..at + 3].copy_from_slice(&StatSummary::of(sample).mean_sd_disorder());
    }
    out
}

/// Feature vector with the default 64 px cell-graph radius.
pub fn patch_feature_vector(points: &PointSet) -> PatchFeatureVector {
    patch_feature_vector_with_radius(points, DEFAULT_CELL_GRAPH_RADIUS)
        .expect("default radius is positive")
}

pub fn patch_feature_vector_with_radius(points: &PointSet, cell_graph_radius: f64) -> Result<PatchFeatureVector> {
    let mut v = Vec::with_capacity(FEATURE_COUNT);

    let g = graph::build_radius_graph(points, cell_graph_radius)?;
    v.extend(cell_graph_features(&g));

    let cells = tessellation::voronoi_cells(points);
    v.extend(voronoi_features(&cells));

    match tessellation::delaunay_triangulation(points) {
        Ok(t) => v.extend(delaunay_features(&t)),
        Err(_) => v.extend([0.0; DELAUNAY_FEATURES]),
    }

    v.extend(mst_features(&graph::minimum_spanning_tree(points)));

    let polygon_area = if cells.is_empty() { 0.0 } else { cells.areas().iter().sum() };
    v.extend(density_features(points, polygon_area));

    // any non-finite entry is a bug upstream; keep the vector usable
    for x in &mut v {
        if !x.is_finite() {
            log::warn!("non-finite patch feature replaced by 0");
            *x = 0.0;
        }
    }
    PatchFeatureVector::try_from(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::Point;

    fn pset(pts: &[(f64, f64)], w: f64, h: f64) -> PointSet {
        PointSet::new(pts.iter().copied().map(Point::from), w, h).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn names_are_unique_and_complete() {
        let set: std::collections::HashSet<_> = FEATURE_NAMES.iter().collect();
        assert_eq!(set.len(), FEATURE_COUNT);
        assert_eq!(
            CELL_GRAPH_FEATURES + VORONOI_FEATURES + DELAUNAY_FEATURES + MST_FEATURES + DENSITY_FEATURES,
            FEATURE_COUNT
        );
    }

    #[test]
    fn stat_summary_examples() {
        assert_eq!(
            StatSummary::of(&[2.0, 2.0, 2.0]),
            StatSummary { mean: 2.0, sd: 0.0, min_max_ratio: 1.0, disorder: 0.0 }
        );
        assert_eq!(StatSummary::of(&[]), StatSummary::default());
        let s = StatSummary::of(&[1.0, 3.0]);
        assert!(close(s.mean, 2.0) && close(s.sd, 1.0));
        assert!(close(s.min_max_ratio, 1.0 / 3.0) && close(s.disorder, 1.0 / 3.0));
        assert_eq!(StatSummary::of(&[0.0, 0.0]), StatSummary::default());
    }

    #[test]
    fn p2_cell_graph_features() {
        let g = UndirectedGraph::from_edges(2, [(0, 1, 5.0)]).unwrap();
        let f = cell_graph_features(&g);
        let want = [1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 100.0, 2.0, 1.0, 1.0, 0.0, 2.0, 0.0, 0.0, 2.0];
        for (i, (a, b)) in f.iter().zip(want).enumerate() {
            assert!(close(*a, b), "{}: {a} vs {b}", FEATURE_NAMES[i]);
        }
        assert_eq!(cell_graph_features(&UndirectedGraph::new(0)), [0.0; 18]);
    }

    #[test]
    fn slopes_on_linear_spectrum() {
        // spectrum -3..=3 step 1: both halves have slope 1
        let s: Vec<f64> = (-3..=3).map(f64::from).collect();
        let (lo, hi) = spectrum_slopes(&s);
        assert!(close(lo, 1.0) && close(hi, 1.0));
        assert_eq!(spectrum_slopes(&[]), (0.0, 0.0));
        assert_eq!(spectrum_slopes(&[4.0]), (0.0, 0.0));
    }

    #[test]
    fn voronoi_block_examples() {
        let four = pset(&[(2.5, 2.5), (7.5, 2.5), (2.5, 7.5), (7.5, 7.5)], 10.0, 10.0);
        let f = voronoi_features(&tessellation::voronoi_cells(&four));
        assert!(close(f[0], 25.0) && close(f[2], 1.0) && f[3].abs() < 1e-12);

        let one = pset(&[(1.0, 2.0)], 6.0, 4.0);
        let f = voronoi_features(&tessellation::voronoi_cells(&one));
        assert!(close(f[0], 24.0) && close(f[8], 20.0));
        // 4 rectangle corners: chords 6,4,6,4 and diagonals sqrt(52) twice
        assert!(close(f[4], (20.0 + 2.0 * 52f64.sqrt()) / 6.0));
    }

    #[test]
    fn delaunay_block_examples() {
        let s = 4.0;
        let tri = pset(&[(1.0, 1.0), (1.0 + s, 1.0), (1.0 + s / 2.0, 1.0 + s * 3f64.sqrt() / 2.0)], 10.0, 10.0);
        let f = delaunay_features(&tessellation::delaunay_triangulation(&tri).unwrap());
        assert!(close(f[0], s) && f[1].abs() < 1e-12 && close(f[2], 1.0) && f[3].abs() < 1e-12);

        let sq = pset(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], 10.0, 10.0);
        let f = delaunay_features(&tessellation::delaunay_triangulation(&sq).unwrap());
        assert!(close(f[4], 0.5) && f[7].abs() < 1e-12);
    }

    #[test]
    fn mst_block_examples() {
        let sq = pset(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], 10.0, 10.0);
        let f = mst_features(&graph::minimum_spanning_tree(&sq));
        assert!(close(f[0], 1.0) && f[1].abs() < 1e-12);

        let line = pset(&[(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)], 10.0, 10.0);
        let f = mst_features(&graph::minimum_spanning_tree(&line));
        assert!(close(f[0], 1.5) && close(f[2], 0.5));

        let one = pset(&[(3.0, 3.0)], 10.0, 10.0);
        assert_eq!(mst_features(&graph::minimum_spanning_tree(&one)), [0.0; 4]);
    }

    #[test]
    fn density_single_point() {
        let one = pset(&[(3.0, 3.0)], 10.0, 20.0);
        let f = density_features(&one, 200.0);
        assert_eq!(f[0], 200.0);
        assert_eq!(f[1], 1.0);
        assert!(close(f[2], 1.0 / 200.0));
        assert!(f[3..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn density_small_sets_skip_unavailable_orders() {
        // 5 points: k = 3 available, k = 5 and 7 are not
        let pts = pset(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)], 10.0, 10.0);
        let f = density_features(&pts, 100.0);
        // 3rd-NN distances: 3, 2, 2, 2, 3
        assert!(close(f[3], 12.0 / 5.0));
        assert!(f[6..12].iter().all(|&x| x == 0.0));
        // within r = 10 every point sees the other 4
        assert!(close(f[12], 4.0) && f[13] == 0.0);
    }

    #[test]
    fn empty_and_tiny_sets_are_finite() {
        assert_eq!(patch_feature_vector(&PointSet::empty(768.0, 768.0).unwrap()), PatchFeatureVector::zeros());
        for pts in [
            vec![(5.0, 5.0)],
            vec![(5.0, 5.0), (6.0, 5.0)],
            vec![(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)],
        ] {
            let v = patch_feature_vector(&pset(&pts, 100.0, 100.0));
            assert_eq!(v.values().len(), FEATURE_COUNT);
            assert!(v.values().iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn feature_vector_rejects_wrong_length() {
        assert!(PatchFeatureVector::try_from(vec![0.0; 68]).is_err());
        assert!(PatchFeatureVector::try_from(vec![f64::NAN; 69]).is_err());
    }
}
