//! Orchestration: tiling, synthetic data, record I/O, folds and the
//! cross-validation experiment.

pub mod config;
pub mod experiment;
pub mod folds;
pub mod records;
pub mod stages;
pub mod synth;
pub mod tiling;

pub use config::{DataConfig, DetectionConfig, ExperimentConfig, GraphConfig, TilingConfig};
pub use experiment::{
    cross_validate, load_slides, read_image_manifest, run_experiment, write_outputs, ExperimentOutcome,
    ExperimentReport, FoldReport, Timings,
};
pub use folds::stratified_folds;
pub use records::{load_pointsets, read_pointsets, save_pointsets, write_pointsets, PatchRecord, Provenance, SlideRecord};
pub use stages::{
    build_graphs, detect_slide, featurize_all, featurize_slide, load_features, read_features, save_features,
    slide_graph, write_features, PatchFeatures, SlideFeatures,
};
pub use synth::{random_blob_layout, render_blobs, render_slide, synth_dataset, synth_slide, SynthParams};
pub use tiling::{tile_image, PatchOrigin};
