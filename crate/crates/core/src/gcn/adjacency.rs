use ndarray::Array2;

use crate::image_graph::ImageGraph;

/// `D^-1/2 (A + I) D^-1/2` over a slide graph, where `A` holds the edge
/// similarities and `D` the row sums of `A + I`. Stored in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn from_graph(g: &ImageGraph) -> Self {
        let edges: Vec<(usize, usize, f64)> = g.edges.iter().map(|e| (e.i, e.j, e.weight)).collect();
        Self::from_weighted_edges(g.node_count(), &edges)
    }

    /// `edges` lists each undirected edge once.
    pub fn from_weighted_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 1.0)]).collect();
        let mut degree = vec![1.0; n];
        for &(i, j, w) in edges {
            rows[i].push((j, w));
            rows[j].push((i, w));
            degree[i] += w;
            degree[j] += w;
        }
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for (j, w) in row {
                cols.push(j);
                vals.push(w * (inv_sqrt[i] * inv_sqrt[j]));
            }
            row_ptr.push(cols.len());
        }
        NormalizedAdjacency { n, row_ptr, cols, vals }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                a[[i, self.cols[k]]] = self.vals[k];
            }
        }
        a
    }

    /// `Â x`. Since `Â` is symmetric this is also `Âᵀ x`.
    pub fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "row count must match node count");
        let mut out = Array2::zeros((self.n, x.ncols()));
        for i in 0..self.n {
            let mut row = out.row_mut(i);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row.scaled_add(self.vals[k], &x.row(self.cols[k]));
            }
        }
        out
    }
}
