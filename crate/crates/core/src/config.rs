//! Run configuration (`crowdshield-config/1`) and sub-seed derivation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::ClfTrainConfig;
use crate::error::{DataError, ModelError, Result};
use crate::evaluation::Milestone;
use crate::fusion::FusionConfig;
use crate::pipeline::{Ablation, PipelineConfig};
use crate::q_learning::QTrainConfig;
use crate::synth::SynthConfig;
use crate::text_encoder::{seeded_hash, EncoderConfig};
use crate::thread_model::Format;

pub const CONFIG_FORMAT: &str = "crowdshield-config/1";

/// Seed for a named component, derived from the global seed.
pub fn derive_seed(global: u64, component: &str) -> u64 {
    seeded_hash(global, component.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    pub format: Format,
    pub claim_sidecar: Option<PathBuf>,
    /// Generate a corpus instead of reading `path`.
    pub synth: Option<SynthConfig>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: None,
            format: Format::NativeJsonl,
            claim_sidecar: None,
            synth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub format: String,
    pub dataset: DatasetConfig,
    pub encoder: EncoderConfig,
    pub q: QTrainConfig,
    pub fusion: FusionConfig,
    pub classifier: ClfTrainConfig,
    pub dev_fraction: f64,
    pub milestones: Vec<Milestone>,
    /// Extra ablation conditions run by `pipeline`.
    pub ablations: Vec<Ablation>,
    /// Extra claim weights run by `pipeline`.
    pub alphas: Vec<f64>,
    pub retrain_per_milestone: bool,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format: CONFIG_FORMAT.to_string(),
            dataset: DatasetConfig::default(),
            encoder: EncoderConfig::default(),
            q: QTrainConfig::default(),
            fusion: FusionConfig::default(),
            classifier: ClfTrainConfig::default(),
            dev_fraction: 0.1,
            milestones: Milestone::DEFAULTS.to_vec(),
            ablations: Vec::new(),
            alphas: Vec::new(),
            retrain_per_milestone: false,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ModelError::Config(format!("{}: {e}", path.display())))?;
        if cfg.format != CONFIG_FORMAT {
            return Err(ModelError::Config(format!(
                "{}: expected format {CONFIG_FORMAT:?}, found {:?}",
                path.display(),
                cfg.format
            )));
        }
        Ok(cfg)
    }

    /// Overwrites every component seed with one derived from `seed`.
    pub fn resolve_seeds(&mut self) {
        let g = self.seed;
        self.encoder.seed = derive_seed(g, "text_encoder");
        self.q.seed = derive_seed(g, "q_learning");
        self.classifier.seed = derive_seed(g, "classifier");
        if let Some(s) = &mut self.dataset.synth {
            s.seed = derive_seed(g, "synth");
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            q: self.q.clone(),
            fusion: self.fusion.clone(),
            classifier: self.classifier.clone(),
            dev_fraction: self.dev_fraction,
            split_seed: derive_seed(self.seed, "dev_split"),
            ablation: Ablation::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.pipeline_config().validate()?;
        if let Some(s) = &self.dataset.synth {
            s.validate()?;
        }
        if self.milestones.is_empty() {
            return Err(ModelError::Config("milestones must be nonempty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(ModelError::Config(format!("alpha must be >= 0, got {a}")));
        }
        Ok(())
    }
}
