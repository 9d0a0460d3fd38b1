//! Pipeline configuration, read from a TOML file.
//!
//! ```toml
//! resize = 352          # optional
//!
//! [mask]
//! gamma = 5.0
//! edge_threshold = 0.5
//!
//! [nss]
//! dilation_radius = 5
//!
//! [dataset]
//! images_dir = "data/mini/images"
//! edges_dir = "data/mini/edges"
//! annotations = "data/mini/annotations.json"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crf::DenseCrfParams;
use crate::error::{Error, Result};
use crate::floodfill::AdaptiveMaskConfig;
use crate::losses::{GatedCrfParams, LossWeights};
use crate::metrics::EvalOptions;
use crate::nss::NssParams;

/// Where a dataset lives on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetManifest {
    pub images_dir: PathBuf,
    pub edges_dir: PathBuf,
    pub annotations: PathBuf,
    pub gt_dir: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let required = [
            ("images_dir", &self.images_dir),
            ("edges_dir", &self.edges_dir),
            ("annotations", &self.annotations),
        ];
        for (name, path) in required.into_iter().chain(self.gt_dir.iter().map(|p| ("gt_dir", p))) {
            if path.as_os_str().is_empty() {
                return Err(Error::Validation(format!("dataset.{name} is not set")));
            }
            if !path.exists() {
                return Err(Error::Validation(format!(
                    "dataset.{name} = {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// Conventional layout: `images/`, `edges/`, `annotations.json`, and
    /// `gt/` if present.
    pub fn from_root(root: &Path) -> Self {
        let gt = root.join("gt");
        DatasetManifest {
            images_dir: root.join("images"),
            edges_dir: root.join("edges"),
            annotations: root.join("annotations.json"),
            gt_dir: gt.is_dir().then_some(gt),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mask: AdaptiveMaskConfig,
    pub nss: NssParams,
    pub crf: DenseCrfParams,
    pub gated_crf: GatedCrfParams,
    pub loss_weights: LossWeights,
    pub eval: EvalOptions,
    pub dataset: DatasetManifest,
    /// Resize inputs to `resize x resize` (bilinear) before processing.
    pub resize: Option<u32>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.mask.validate()?;
        self.nss.validate()?;
        self.crf.validate()?;
        self.gated_crf.validate()?;
        self.loss_weights.validate()?;
        if self.resize == Some(0) {
            return Err(Error::invalid("resize must be positive"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_toml(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
