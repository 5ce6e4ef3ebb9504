//! End-to-end model: Q-learning over training threads, fused features, and
//! the veracity classifier trained with dev-based early stopping.

use serde::{Deserialize, Serialize};

use crate::classifier::{train_classifier, ClfTrainConfig, History, LinearClassifier};
use crate::error::{ModelError, Result};
use crate::evaluation::EvalReport;
use crate::fusion::{
    claim_vector, fuse_with, q_feature_vector, FeatureRow, FusedVector, FusionConfig,
};
use crate::q_learning::{q_list, train_q, QNetwork, QTrainConfig, ThreadEnv, TrainLog};
use crate::text_encoder::{encode_combined, Embedding, TextEncoder};
use crate::thread_model::{split_train_dev, Thread, VeracityLabel};

/// Which feature blocks reach the classifier. Disabled blocks are zeroed,
/// keeping the vector's dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    NoQ,
    NoText,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::Full, Ablation::NoQ, Ablation::NoText];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoQ => "no_q",
            Ablation::NoText => "no_text",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Ablation::Full),
            "no_q" | "no-q" => Ok(Ablation::NoQ),
            "no_text" | "no-text" => Ok(Ablation::NoText),
            other => Err(ModelError::Config(format!("unknown ablation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub q: QTrainConfig,
    pub fusion: FusionConfig,
    pub classifier: ClfTrainConfig,
    /// Share of the training split held out for early stopping.
    pub dev_fraction: f64,
    pub split_seed: u64,
    pub ablation: Ablation,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            q: QTrainConfig::default(),
            fusion: FusionConfig::default(),
            classifier: ClfTrainConfig::default(),
            dev_fraction: 0.1,
            split_seed: 0,
            ablation: Ablation::Full,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.q.validate()?;
        self.fusion.validate()?;
        self.classifier.validate()?;
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(ModelError::Config(format!(
                "dev_fraction must lie in (0, 1), got {}",
                self.dev_fraction
            )));
        }
        Ok(())
    }
}

/// Builds the fused vector of a thread from a trained Q-network.
pub fn thread_features(
    t: &Thread,
    encoder: &dyn TextEncoder,
    qnet: &QNetwork,
    fusion: &FusionConfig,
    ablation: Ablation,
) -> Result<FusedVector> {
    let l = fusion.positions;
    let f = if ablation == Ablation::NoQ {
        vec![0.0; l]
    } else {
        q_feature_vector(&q_list(qnet, &ThreadEnv::new(t, encoder)?)?, l)?
    };
    let c = claim_vector(t, l)?;
    let s = if ablation == Ablation::NoText {
        Embedding::zeros(encoder.dim())
    } else {
        encode_combined(t, encoder)?
    };
    fuse_with(&f, &c, fusion.alpha, &s, fusion.weight_rule)
}

#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub qnet: QNetwork,
    pub clf: LinearClassifier,
    pub fusion: FusionConfig,
    pub ablation: Ablation,
    pub q_log: TrainLog,
    pub history: History,
}

impl TrainedPipeline {
    /// Splits `train` into train/dev, fits the Q-network on the train part,
    /// then the classifier on fused vectors with early stopping on dev.
    pub fn fit(train: &[Thread], encoder: &dyn TextEncoder, cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let (tr, dev) = split_train_dev(train, cfg.dev_fraction, cfg.split_seed)?;
        let (qnet, q_log) = train_q(&tr, encoder, &cfg.q)?;
        let feats = |ts: &[Thread]| -> Result<(Vec<FusedVector>, Vec<VeracityLabel>)> {
            let x = ts
                .iter()
                .map(|t| thread_features(t, encoder, &qnet, &cfg.fusion, cfg.ablation))
                .collect::<Result<Vec<_>>>()?;
            Ok((x, ts.iter().map(|t| t.veracity).collect()))
        };
        let (x, y) = feats(&tr)?;
        let (dx, dy) = feats(&dev)?;
        let (clf, history) = train_classifier(&x, &y, &dx, &dy, &cfg.classifier)?;
        Ok(TrainedPipeline {
            qnet,
            clf,
            fusion: cfg.fusion.clone(),
            ablation: cfg.ablation,
            q_log,
            history,
        })
    }

    /// Reassembles a pipeline from saved networks.
    pub fn from_parts(qnet: QNetwork, clf: LinearClassifier, fusion: FusionConfig) -> Self {
        TrainedPipeline {
            qnet,
            clf,
            fusion,
            ablation: Ablation::Full,
            q_log: TrainLog::default(),
            history: History::default(),
        }
    }

    pub fn features(&self, t: &Thread, encoder: &dyn TextEncoder) -> Result<FusedVector> {
        thread_features(t, encoder, &self.qnet, &self.fusion, self.ablation)
    }

    pub fn predict(
        &self,
        t: &Thread,
        encoder: &dyn TextEncoder,
    ) -> Result<(VeracityLabel, [f64; 2])> {
        self.clf.predict(&self.features(t, encoder)?)
    }

    pub fn evaluate(
        &self,
        test: &[Thread],
        encoder: &dyn TextEncoder,
        condition: &str,
    ) -> Result<EvalReport> {
        let preds = test
            .iter()
            .map(|t| Ok(self.predict(t, encoder)?.0))
            .collect::<Result<Vec<_>>>()?;
        let golds: Vec<_> = test.iter().map(|t| t.veracity).collect();
        EvalReport::from_predictions(condition, &golds, &preds)
    }
}

pub fn feature_rows(
    threads: &[Thread],
    encoder: &dyn TextEncoder,
    qnet: &QNetwork,
    fusion: &FusionConfig,
) -> Result<Vec<FeatureRow>> {
    threads
        .iter()
        .map(|t| {
            Ok(FeatureRow {
                thread_id: t.thread_id.clone(),
                v: thread_features(t, encoder, qnet, fusion, Ablation::Full)?.values,
                label: t.veracity.index() as u8,
            })
        })
        .collect()
}
