//! Patch-level cell graphs, tessellation statistics, similarity-based slide
//! graphs and a graph convolutional slide classifier.
//!
//! The crate is organised bottom-up:
//!
//! * [`points`] and [`graph`] hold nuclei centroids and the undirected graph
//!   algorithms (components, BFS, eccentricity, clustering, Euclidean MST).
//! * [`eigen`] is a dense symmetric eigenvalue solver used for the spectral
//!   graph measures.
//! * [`tessellation`] builds Delaunay triangulations and rectangle-clipped
//!   Voronoi cells.
//! * [`detection`] finds nuclei in grayscale patches with an oriented
//!   Laplacian-of-Gaussian filter bank.
//! * [`features`] turns a patch's nuclei into the 69-value feature vector.
//! * [`image_graph`] links the patches of one slide by cosine similarity.
//! * [`gcn`] is the classifier: model, exact gradients, Adam and training.
//! * [`pipeline`] tiles slides, synthesises data, manages folds and runs
//!   cross-validated experiments.

pub mod detection;
pub mod eigen;
pub mod error;
pub mod features;
pub mod gcn;
pub mod graph;
pub mod image_graph;
pub mod pipeline;
pub mod points;
pub mod tessellation;

pub use error::{Error, Result};
pub use features::{PatchFeatureVector, StatSummary, FEATURE_COUNT};
pub use graph::UndirectedGraph;
pub use image_graph::ImageGraph;
pub use points::{Point, PointSet};
