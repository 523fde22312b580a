//! Slide-level graph over patches, linked by cosine similarity of their
//! feature vectors.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default similarity threshold for linking two patches.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.8;

/// Version tag written into every serialized graph record.
pub const GRAPH_FORMAT_VERSION: u32 = 1;

/// Cosine similarity of two vectors; 0 when either has zero norm.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Patches of one slide as nodes; edges carry cosine similarities above the
/// construction threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageGraph {
    pub format_version: u32,
    pub slide_id: String,
    pub label: usize,
    pub threshold: f64,
    pub node_features: Vec<Vec<f64>>,
    pub edges: Vec<WeightedEdge>,
}

impl ImageGraph {
    pub fn node_count(&self) -> usize {
        self.node_features.len()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.node_features.first().map(Vec::len)
    }

    /// Checks the structural invariants: consistent row width, `i < j`,
    /// indices in range, no duplicates, weights in `(threshold, 1]`.
    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        if let Some(d) = self.feature_dim() {
            if let Some(r) = self.node_features.iter().position(|row| row.len() != d) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{d} features per node"),
                    got: format!("{} in row {r}", self.node_features[r].len()),
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.i >= e.j || e.j >= n {
                return Err(Error::invalid(format!("bad edge ({}, {}) for {n} nodes", e.i, e.j)));
            }
            if !(e.weight > self.threshold && e.weight <= 1.0) {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) weight {} outside ({}, 1]",
                    e.i, e.j, e.weight, self.threshold
                )));
            }
            if !seen.insert((e.i, e.j)) {
                return Err(Error::invalid(format!("duplicate edge ({}, {})", e.i, e.j)));
            }
        }
        Ok(())
    }

    /// Node order permuted: new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> ImageGraph {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut edges: Vec<WeightedEdge> = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (inverse[e.i], inverse[e.j]);
                WeightedEdge {
                    i: a.min(b),
                    j: a.max(b),
                    weight: e.weight,
                }
            })
            .collect();
        edges.sort_by_key(|e| (e.i, e.j));
        ImageGraph {
            node_features: perm.iter().map(|&old| self.node_features[old].clone()).collect(),
            edges,
            ..self.clone()
        }
    }
}

/// Links every pair of rows whose cosine similarity is strictly greater than
/// `threshold`.
pub fn build_image_graph(
    slide_id: impl Into<String>,
    label: usize,
    features: Vec<Vec<f64>>,
    threshold: f64,
) -> Result<ImageGraph> {
    if !(-1.0..1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} outside [-1, 1)")));
    }
    let n = features.len();
    let norms: Vec<f64> = features.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let w = cosine_similarity(&features[i], &features[j]);
            if w > threshold {
                edges.push(WeightedEdge { i, j, weight: w });
            }
        }
    }
    let g = ImageGraph {
        format_version: GRAPH_FORMAT_VERSION,
        slide_id: slide_id.into(),
        label,
        threshold,
        node_features: features,
        edges,
    };
    g.validate()?;
    Ok(g)
}

/// Writes one JSON record per line.
pub fn write_graphs_jsonl<W: Write>(mut out: W, graphs: &[ImageGraph]) -> Result<()> {
    for g in graphs {
        serde_json::to_writer(&mut out, g)?;
        out.write_all(b"\n").map_err(|e| Error::io("<graph writer>", e))?;
    }
    Ok(())
}

/// Reads JSON-lines graph records; blank lines are skipped. Errors carry the
/// 1-based line number.
pub fn read_graphs_jsonl<R: BufRead>(input: R, path: &Path) -> Result<Vec<ImageGraph>> {
    let mut graphs = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let g: ImageGraph = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if g.format_version != GRAPH_FORMAT_VERSION {
            return Err(parse_err(format!("unsupported format_version {}", g.format_version)));
        }
        g.validate().map_err(|e| parse_err(e.to_string()))?;
        graphs.push(g);
    }
    Ok(graphs)
}

pub fn save_graphs(path: &Path, graphs: &[ImageGraph]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_graphs_jsonl(&mut w, graphs)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_graphs(path: &Path) -> Result<Vec<ImageGraph>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_graphs_jsonl(std::io::BufReader::new(file), path)
}
