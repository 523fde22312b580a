use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Classifier, TrainConfig};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Self-describing JSON model file: architecture and parameter tensors
/// (row-major float64), feature scaling, and the training configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub classifier: Classifier,
    pub config: TrainConfig,
    #[serde(default)]
    pub class_names: Vec<String>,
}

impl Checkpoint {
    pub fn new(classifier: Classifier, config: TrainConfig, class_names: Vec<String>) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            classifier,
            config,
            class_names,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("unsupported checkpoint format_version {}", ck.format_version),
            });
        }
        let model = &ck.classifier.model;
        let expected = super::Params::zeros(&model.arch);
        if !model.params.shapes_match(&expected) || ck.classifier.standardizer.dim() != model.arch.input_dim {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "parameter shapes do not match the recorded architecture".into(),
            });
        }
        Ok(ck)
    }
}
