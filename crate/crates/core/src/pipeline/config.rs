use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::{SynthParams, SYNTHETIC_CLASSES};
use crate::detection::{build_glog_bank, DetectionParams, GLoGBank, ResponseThreshold, DEFAULT_BANK};
use crate::features::DEFAULT_CELL_GRAPH_RADIUS;
use crate::gcn::TrainConfig;
use crate::image_graph::DEFAULT_SIMILARITY_THRESHOLD;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TilingConfig {
    pub patch_size: usize,
    pub stride: usize,
}

impl Default for TilingConfig {
    fn default() -> Self {
        TilingConfig {
            patch_size: 768,
            stride: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub orientations: usize,
    pub bandwidth: usize,
    pub threshold: ResponseThreshold,
    pub merge_radius: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        let (sigma_x, sigma_y, orientations, bandwidth) = DEFAULT_BANK;
        let p = DetectionParams::default();
        DetectionConfig {
            sigma_x,
            sigma_y,
            orientations,
            bandwidth,
            threshold: p.threshold,
            merge_radius: p.merge_radius,
        }
    }
}

impl DetectionConfig {
    pub fn bank(&self) -> Result<GLoGBank> {
        build_glog_bank(self.sigma_x, self.sigma_y, self.orientations, self.bandwidth)
    }

    pub fn params(&self) -> DetectionParams {
        DetectionParams {
            threshold: self.threshold,
            merge_radius: self.merge_radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Cell-graph linking distance in pixels.
    pub cell_graph_radius: f64,
    /// Patches are linked when their cosine similarity exceeds this.
    pub similarity_threshold: f64,
    /// Patches with fewer nuclei are left out of the image graph.
    pub min_nuclei: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            cell_graph_radius: DEFAULT_CELL_GRAPH_RADIUS,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            min_nuclei: 20,
        }
    }
}

/// Where slides come from. Exactly one of `pointsets`, `image_manifest` or
/// synthetic generation (when both are absent) is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Point-set CSV.
    pub pointsets: Option<PathBuf>,
    /// CSV with columns `slide_id,label,path`; relative paths resolve
    /// against the manifest's directory.
    pub image_manifest: Option<PathBuf>,
    pub slides_per_class: usize,
    /// Render synthetic slides to images and detect nuclei on them instead
    /// of using the generated points directly.
    pub render: bool,
    pub blob_sigma: f64,
    pub blob_depth: f64,
    pub synthetic: SynthParams,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            pointsets: None,
            image_manifest: None,
            slides_per_class: 50,
            render: false,
            blob_sigma: 5.0,
            blob_depth: 0.6,
            synthetic: SynthParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub folds: usize,
    pub class_names: Vec<String>,
    pub output_dir: Option<PathBuf>,
    pub tiling: TilingConfig,
    pub detection: DetectionConfig,
    pub graph: GraphConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            folds: 3,
            class_names: vec!["normal".into(), "low_grade".into(), "high_grade".into()],
            output_dir: None,
            tiling: TilingConfig::default(),
            detection: DetectionConfig::default(),
            graph: GraphConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiling.patch_size == 0 || self.tiling.stride == 0 {
            return Err(Error::Config("tiling patch_size and stride must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.class_names.len() < 2 {
            return Err(Error::Config("need at least two class names".into()));
        }
        if !(self.graph.cell_graph_radius > 0.0 && self.graph.cell_graph_radius.is_finite()) {
            return Err(Error::Config("cell_graph_radius must be positive".into()));
        }
        if !(-1.0..1.0).contains(&self.graph.similarity_threshold) {
            return Err(Error::Config("similarity_threshold must be in [-1, 1)".into()));
        }
        if !(self.detection.merge_radius >= 0.0) {
            return Err(Error::Config("merge_radius must be non-negative".into()));
        }
        self.detection.bank().map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate()?;
        if let Some(c) = self.train.classes {
            if c != self.class_names.len() {
                return Err(Error::Config(format!(
                    "train.classes = {c} but {} class names given",
                    self.class_names.len()
                )));
            }
        }
        if self.data.pointsets.is_some() && self.data.image_manifest.is_some() {
            return Err(Error::Config("give at most one of data.pointsets and data.image_manifest".into()));
        }
        if self.uses_synthetic() {
            if self.class_names.len() != SYNTHETIC_CLASSES {
                return Err(Error::Config(format!(
                    "synthetic data has {SYNTHETIC_CLASSES} classes, {} names given",
                    self.class_names.len()
                )));
            }
            if self.data.slides_per_class < self.folds {
                return Err(Error::Config("slides_per_class must be at least the fold count".into()));
            }
            self.data.synthetic.validate()?;
        }
        Ok(())
    }

    pub fn uses_synthetic(&self) -> bool {
        self.data.pointsets.is_none() && self.data.image_manifest.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap(), c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = ExperimentConfig::from_toml_str("seed = 7\n[train]\nepochs = 5\n[detection]\nthreshold = { kind = \"absolute\", value = 0.2 }\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.learning_rate, 2e-4);
        assert_eq!(c.detection.threshold, ResponseThreshold::Absolute(0.2));
        assert_eq!(c.tiling.patch_size, 768);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(ExperimentConfig::from_toml_str("sed = 1"), Err(Error::Config(_))));
        for mutate in [
            (|c: &mut ExperimentConfig| c.folds = 1) as fn(&mut ExperimentConfig),
            |c| c.tiling.stride = 0,
            |c| c.detection.sigma_y = 0.0,
            |c| c.graph.similarity_threshold = 1.0,
            |c| c.train.dropout_p = 1.0,
            |c| c.class_names.truncate(2),
            |c| c.data.slides_per_class = 2,
        ] {
            let mut c = ExperimentConfig::default();
            mutate(&mut c);
            let err = c.validate().unwrap_err();
            assert!(err.is_validation(), "{err}");
        }
    }
}
