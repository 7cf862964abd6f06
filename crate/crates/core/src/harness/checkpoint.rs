use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig};
use crate::nn::ParamStore;

pub const CHECKPOINT_FORMAT: u32 = 1;

/// Model configuration plus all parameters, as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: ModelConfig,
    /// Fingerprint of the run configuration that produced it.
    pub config_fingerprint: String,
    pub epoch: usize,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn of(model: &Model, config_fingerprint: &str, epoch: usize) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT,
            model: model.config().clone(),
            config_fingerprint: config_fingerprint.to_string(),
            epoch,
            params: model.params().clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let value: serde_json::Value =
            serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        match value.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == CHECKPOINT_FORMAT as u64 => {}
            Some(v) => {
                return Err(Error::Format(format!(
                    "{}: checkpoint format {v}, this build reads {CHECKPOINT_FORMAT}",
                    path.display()
                )))
            }
            None => return Err(Error::Format(format!("{}: not a checkpoint (no format_version)", path.display()))),
        }
        serde_json::from_value(value).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn into_model(self) -> Result<Model> {
        let mut model = Model::new(self.model, 0)?;
        model.load_params(self.params)?;
        Ok(model)
    }
}

pub fn load_model(path: &Path) -> Result<Model> {
    Checkpoint::load(path)?.into_model()
}
