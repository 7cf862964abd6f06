use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::models::{HeadKind, ModelConfig};
use crate::par::Parallelism;

/// Environment switch for reduction-order determinism.
pub const DETERMINISTIC_ENV: &str = "EXPECT_DETERMINISTIC";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    /// JSONL parse fixtures covering train and dev ids.
    pub parses: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub head: HeadKind,
    pub use_syntax: bool,
    pub none_weight: f64,
    pub syn_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSection { head: m.head, use_syntax: m.use_syntax, none_weight: m.none_weight, syn_hidden: m.syn_hidden }
    }
}

/// Reference fine-tuning settings per head: (learning rate, batch size).
pub fn reference_optimizer(head: HeadKind) -> (f64, usize) {
    match head {
        HeadKind::Labeling => (1e-5, 32),
        HeadKind::Interaction => (5e-5, 16),
    }
}

/// The reference rates assume a pretrained encoder; the from-scratch
/// encoder trains with rates this much larger.
pub const SCRATCH_LR_SCALE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Unset: the head's reference rate times [`SCRATCH_LR_SCALE`].
    pub lr: Option<f64>,
    /// Unset: the head's reference batch size.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs without dev F0.5 improvement before stopping; 0 disables.
    pub patience: usize,
    /// Global gradient-norm clip; 0 disables.
    pub clip: f64,
    /// Fixed-order gradient reduction.
    pub deterministic: bool,
    pub parallelism: Parallelism,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: None,
            batch_size: None,
            epochs: 10,
            seed: 42,
            patience: 3,
            clip: 1.0,
            deterministic: true,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Checkpoints and the run report go here; nothing is written when unset.
    pub dir: Option<PathBuf>,
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub encoder: EncoderConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies `EXPECT_DETERMINISTIC` if it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        match std::env::var(DETERMINISTIC_ENV) {
            Ok(v) => {
                self.train.deterministic = match v.trim() {
                    "1" => true,
                    "0" => false,
                    other => return Err(Error::Config(format!("{DETERMINISTIC_ENV} must be 0 or 1, got {other:?}"))),
                };
                Ok(())
            }
            Err(_) => Ok(()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        let t = &self.train;
        if let Some(lr) = t.lr.filter(|lr| !(lr.is_finite() && *lr > 0.0)) {
            return Err(Error::Config(format!("train.lr must be positive, got {lr}")));
        }
        if t.batch_size == Some(0) {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if !(t.clip.is_finite() && t.clip >= 0.0) {
            return Err(Error::Config(format!("train.clip must be non-negative, got {}", t.clip)));
        }
        if !(self.model.none_weight.is_finite() && self.model.none_weight > 0.0) {
            return Err(Error::Config(format!("model.none_weight must be positive, got {}", self.model.none_weight)));
        }
        if self.model.use_syntax && self.model.syn_hidden == 0 {
            return Err(Error::Config("model.syn_hidden must be at least 1".into()));
        }
        Ok(())
    }

    pub fn lr(&self) -> f64 {
        self.train.lr.unwrap_or_else(|| reference_optimizer(self.model.head).0 * SCRATCH_LR_SCALE)
    }

    pub fn batch_size(&self) -> usize {
        self.train.batch_size.unwrap_or_else(|| reference_optimizer(self.model.head).1)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            encoder: self.encoder.clone(),
            head: self.model.head,
            use_syntax: self.model.use_syntax,
            syn_hidden: self.model.syn_hidden,
            none_weight: self.model.none_weight,
        }
    }

    /// SHA-256 over the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let c = RunConfig::from_toml_str(
            r#"
            [encoder]
            backend = "self-attention"
            hidden = 32
            layers = 1
            heads = 4

            [model]
            head = "interaction"
            use_syntax = true

            [train]
            lr = 0.002
            epochs = 3

            [data]
            train = "train.jsonl"

            [output]
            dir = "runs/a"
            "#,
        )
        .unwrap();
        assert_eq!(c.encoder.hidden, 32);
        assert_eq!(c.model.head, HeadKind::Interaction);
        assert_eq!((c.lr(), c.batch_size()), (0.002, 16));
        assert_eq!(c.data.train.as_deref(), Some(Path::new("train.jsonl")));
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.fingerprint(), c.fingerprint());
        assert_eq!(c.fingerprint().len(), 64);
    }

    #[test]
    fn defaults_follow_reference_optimizer_settings() {
        let mut c = RunConfig::default();
        assert_eq!(reference_optimizer(HeadKind::Labeling), (1e-5, 32));
        assert_eq!(reference_optimizer(HeadKind::Interaction), (5e-5, 16));
        assert!((c.lr() - 1e-3).abs() < 1e-15);
        assert_eq!(c.batch_size(), 32);
        c.model.head = HeadKind::Interaction;
        assert!((c.lr() - 5e-3).abs() < 1e-15);
        assert_eq!(c.batch_size(), 16);
        assert_eq!((c.train.epochs, c.train.patience), (10, 3));
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "[train]\nlr = 0.0",
            "[train]\nbatch_size = 0",
            "[encoder]\nhidden = 10\nheads = 4",
            "[model]\nhead = \"tagger\"",
            "[train]\nlearning_rate = 0.1",
            "[model]\nnone_weight = -1.0",
        ] {
            assert!(matches!(RunConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn fingerprint_tracks_changes() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.train.seed += 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
