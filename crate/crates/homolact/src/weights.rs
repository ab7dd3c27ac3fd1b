//! Per-action weight documents (TOML).

use std::path::{Path, PathBuf};

use homolact_core::body::BodyModel;
use homolact_core::weighting::WeightVector;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    pub action: String,
    /// Reference sequence, relative to the dataset root.
    pub reference: String,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective at uniform weights.
    pub objective_uniform: f64,
    pub objective: f64,
    pub projected_gradient_norm: f64,
    /// Joint label to weight, in body-model order.
    pub weights: IndexMap<String, f64>,
}

pub fn doc_path(dir: &Path, action: &str) -> PathBuf {
    dir.join(format!("{action}.toml"))
}

impl WeightsDoc {
    pub fn weight_map(model: &BodyModel, w: &WeightVector) -> IndexMap<String, f64> {
        model.labels().iter().cloned().zip(w.as_slice().iter().copied()).collect()
    }

    /// The weights in body-model order; labels must match the model exactly.
    pub fn weight_vector(&self, model: &BodyModel, origin: &str) -> Result<WeightVector> {
        let found: Vec<String> = self.weights.keys().cloned().collect();
        if found != model.labels() {
            return Err(Error::SchemaMismatch {
                origin: origin.into(),
                expected: model.labels().to_vec(),
                found,
            });
        }
        Ok(WeightVector::new(self.weights.values().copied().collect())?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("weights document serializes")
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let doc: Self = toml::from_str(text).map_err(|e| Error::Config {
            origin: origin.into(),
            message: e.message().to_string(),
        })?;
        if !(doc.tau > 0.0 && doc.tau.is_finite()) {
            return Err(Error::Config {
                origin: origin.into(),
                message: format!("tau must be positive, got {}", doc.tau),
            });
        }
        Ok(doc)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fsutil::write_atomic(&doc_path(dir, &self.action), self.to_toml().as_bytes())
    }

    pub fn load(dir: &Path, action: &str) -> Result<Self> {
        let path = doc_path(dir, action);
        let doc = Self::parse(&fsutil::read_text(&path)?, &path.display().to_string())?;
        if doc.action != action {
            return Err(Error::Validation(format!(
                "{} holds weights for `{}`",
                path.display(),
                doc.action
            )));
        }
        Ok(doc)
    }
}
