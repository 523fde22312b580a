//! Undirected graphs over nuclei and the topology measures computed on them.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::points::PointSet;
use crate::tessellation;
use crate::{Error, Result};

/// Hop distance reported by [`UndirectedGraph::bfs_distances`] for nodes not
/// reachable from the source.
pub const UNREACHABLE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Simple undirected graph: no self-loops, no parallel edges.
///
/// Edges are stored with `u < v`; the adjacency lists are kept sorted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UndirectedGraph {
    node_count: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl UndirectedGraph {
    pub fn new(node_count: usize) -> Self {
        UndirectedGraph {
            node_count,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); node_count],
        }
    }

    /// Builds a graph from an edge list, rejecting self-loops, duplicates,
    /// out-of-range endpoints and negative or non-finite weights.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut g = UndirectedGraph::new(node_count);
        for (u, v, w) in edges {
            g.add_edge(u, v, w)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: usize, v: usize, weight: f64) -> Result<()> {
        if u == v {
            return Err(Error::invalid(format!("self-loop on node {u}")));
        }
        if u >= self.node_count || v >= self.node_count {
            return Err(Error::invalid(format!(
                "edge ({u}, {v}) out of range for {} nodes",
                self.node_count
            )));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::invalid(format!("edge weight {weight} must be finite and >= 0")));
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        match self.adjacency[a].binary_search(&b) {
            Ok(_) => return Err(Error::invalid(format!("duplicate edge ({a}, {b})"))),
            Err(pos) => self.adjacency[a].insert(pos, b),
        }
        let pos = self.adjacency[b].binary_search(&a).unwrap_err();
        self.adjacency[b].insert(pos, a);
        self.edges.push(Edge { u: a, v: b, weight });
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Dense 0/1 adjacency matrix, row-major.
    pub fn adjacency_matrix(&self) -> Vec<f64> {
        let n = self.node_count;
        let mut a = vec![0.0; n * n];
        for e in &self.edges {
            a[e.u * n + e.v] = 1.0;
            a[e.v * n + e.u] = 1.0;
        }
        a
    }

    /// Component label per node. Labels run `0..C` in order of each
    /// component's smallest node index.
    pub fn connected_components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.node_count];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.node_count {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Unweighted hop distances from `source`; [`UNREACHABLE`] marks nodes in
    /// other components.
    ///
    /// # Panics
    ///
    /// If `source` is not a node of the graph.
    pub fn bfs_distances(&self, source: usize) -> Vec<usize> {
        assert!(
            source < self.node_count,
            "bfs source {source} out of range for {} nodes",
            self.node_count
        );
        let mut dist = vec![UNREACHABLE; self.node_count];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            for &v in &self.adjacency[u] {
                if dist[v] == UNREACHABLE {
                    dist[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Eccentricity of every node, measured inside its own component
    /// (isolated nodes have eccentricity 0).
    pub fn eccentricities(&self) -> Vec<usize> {
        self.distance_summary().eccentricities
    }

    /// All-pairs BFS digest used by the distance-based features.
    pub fn distance_summary(&self) -> DistanceSummary {
        let n = self.node_count;
        let mut eccentricities = vec![0usize; n];
        let mut path_sum = 0u64;
        let mut pair_count = 0u64;
        for s in 0..n {
            let d = self.bfs_distances(s);
            let mut ecc = 0;
            for (t, &dt) in d.iter().enumerate() {
                if dt != UNREACHABLE && t != s {
                    ecc = ecc.max(dt);
                    if t > s {
                        path_sum += dt as u64;
                        pair_count += 1;
                    }
                }
            }
            eccentricities[s] = ecc;
        }
        let non_isolated = || (0..n).filter(|&v| self.degree(v) > 0);
        let diameter = eccentricities.iter().copied().max().unwrap_or(0);
        let radius = non_isolated().map(|v| eccentricities[v]).min().unwrap_or(0);
        let central_count = non_isolated().filter(|&v| eccentricities[v] == radius).count();
        DistanceSummary {
            eccentricities,
            diameter,
            radius,
            central_count,
            mean_path_length: if pair_count > 0 {
                path_sum as f64 / pair_count as f64
            } else {
                0.0
            },
        }
    }

    /// Local clustering coefficient per node; nodes of degree < 2 get 0.
    pub fn clustering_coefficients(&self) -> Vec<f64> {
        (0..self.node_count)
            .map(|v| {
                let nb = &self.adjacency[v];
                let k = nb.len();
                if k < 2 {
                    return 0.0;
                }
                let mut links = 0usize;
                for (i, &a) in nb.iter().enumerate() {
                    for &b in &nb[i + 1..] {
                        if self.adjacency[a].binary_search(&b).is_ok() {
                            links += 1;
                        }
                    }
                }
                2.0 * links as f64 / (k * (k - 1)) as f64
            })
            .collect()
    }
}

/// Eccentricity-derived quantities of a possibly disconnected graph.
///
/// Diameter is the largest eccentricity over all nodes. Radius and central
/// points only consider nodes with at least one neighbour; a graph without
/// edges has radius 0 and no central points.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceSummary {
    pub eccentricities: Vec<usize>,
    pub diameter: usize,
    pub radius: usize,
    pub central_count: usize,
    /// Mean hop distance over connected unordered pairs.
    pub mean_path_length: f64,
}

/// Cell graph: an edge joins two nuclei whose Euclidean distance is strictly
/// below `radius`. Edge weights hold that distance.
pub fn build_radius_graph(points: &PointSet, radius: f64) -> Result<UndirectedGraph> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    let pts = points.points();
    let n = pts.len();
    // sweep over x-sorted order; only pairs within `radius` in x are tested
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pts[a].lex_cmp(&pts[b]));
    let mut pairs = Vec::new();
    for (oi, &i) in order.iter().enumerate() {
        for &j in &order[oi + 1..] {
            if pts[j].x - pts[i].x >= radius {
                break;
            }
            let d = pts[i].dist(pts[j]);
            if d < radius {
                pairs.push((i.min(j), i.max(j), d));
            }
        }
    }
    pairs.sort_by_key(|e| (e.0, e.1));
    UndirectedGraph::from_edges(n, pairs)
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Euclidean minimum spanning tree of the points, weights are edge lengths.
///
/// Candidate edges come from the Delaunay triangulation, which contains every
/// Euclidean MST edge; collinear or tiny inputs fall back to the complete
/// graph.
pub fn minimum_spanning_tree(points: &PointSet) -> UndirectedGraph {
    let pts = points.points();
    let n = pts.len();
    let mut candidates: Vec<(usize, usize, f64)> = match tessellation::delaunay_triangulation(points) {
        Ok(tri) if tri.vertex_count() == n => tri
            .edges()
            .into_iter()
            .map(|(a, b)| (a, b, pts[a].dist(pts[b])))
            .collect(),
        _ => {
            let mut all = Vec::with_capacity(n * n.saturating_sub(1) / 2);
            for i in 0..n {
                for j in (i + 1)..n {
                    all.push((i, j, pts[i].dist(pts[j])));
                }
            }
            all
        }
    };
    candidates.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    let mut uf = UnionFind::new(n);
    let mut tree = UndirectedGraph::new(n);
    for (u, v, w) in candidates {
        if uf.union(u, v) {
            tree.add_edge(u, v, w).expect("kruskal edges are unique");
            if tree.edge_count() + 1 == n {
                break;
            }
        }
    }
    tree
}
