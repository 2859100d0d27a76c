//! Pipeline configuration, stored as one JSON document.
//!
//! ```json
//! {
//!   "w_attr": 0.05,
//!   "lambda_orient": 0.1,
//!   "rerank": { "k1": 20, "k2": 6, "lambda": 0.3 },
//!   "ensemble_weights": null,
//!   "top_k": 100,
//!   "exclude_same_camera_positives": true,
//!   "stages": ["normalize", "score", "rerank", "ensemble", "same_camera_filter",
//!              "orient_fuse", {"attr_fuse": "brand"}, {"attr_fuse": "type"},
//!              "g2q_exclusion", "rank", "track_merge", "q2g_exclusion"]
//! }
//! ```
//!
//! Every field is optional; omitted fields take the defaults shown.
//! `ensemble_weights: null` means one unit weight per source.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalProtocol;
use crate::pipeline::{Stage, StagePlan};
use crate::rerank::RerankParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Added to the similarity of pairs that agree on brand (and, separately, type).
    pub w_attr: f64,
    /// Weight of the folded-orientation similarity subtracted from the scores.
    pub lambda_orient: f64,
    pub rerank: RerankParams,
    pub ensemble_weights: Option<Vec<f64>>,
    /// Rank-list length written to the submission and the mAP cutoff.
    pub top_k: usize,
    pub exclude_same_camera_positives: bool,
    pub stages: Vec<Stage>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            w_attr: 0.05,
            lambda_orient: 0.1,
            rerank: RerankParams::default(),
            ensemble_weights: None,
            top_k: 100,
            exclude_same_camera_positives: true,
            stages: StagePlan::full().stages().to_vec(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks everything that does not depend on the input data.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w_attr", self.w_attr),
            ("lambda_orient", self.lambda_orient),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        self.rerank
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(w) = &self.ensemble_weights {
            if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::Config(
                    "ensemble weights must be finite and >= 0".into(),
                ));
            }
            if !w.iter().any(|&x| x > 0.0) {
                return Err(Error::Config(
                    "at least one ensemble weight must be positive".into(),
                ));
            }
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        StagePlan::new(self.stages.clone())?;
        Ok(())
    }

    pub fn plan(&self) -> Result<StagePlan> {
        StagePlan::new(self.stages.clone())
    }

    pub fn protocol(&self) -> EvalProtocol {
        EvalProtocol {
            top_k_cutoff: self.top_k,
            exclude_same_camera_positives: self.exclude_same_camera_positives,
        }
    }

    /// Canonical serialization; feeds the reproducibility key.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
