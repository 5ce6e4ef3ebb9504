//! Metrics and experiment protocols: early-detection milestones, ablations
//! and claim-weight sweeps.

mod metrics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ModelError, Result};
use crate::pipeline::{Ablation, PipelineConfig, TrainedPipeline};
use crate::text_encoder::TextEncoder;
use crate::thread_model::{truncate_thread, Dataset, Split, Thread};

pub use metrics::{
    macro_f1, macro_f1_of, prf, reports_to_csv, ClassCounts, ClassMetrics, Confusion, EvalReport,
    CSV_HEADER,
};

/// How many of the earliest replies the model may see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Milestone {
    Count(usize),
    All,
}

impl Milestone {
    pub const DEFAULTS: [Milestone; 4] = [
        Milestone::Count(10),
        Milestone::Count(20),
        Milestone::Count(30),
        Milestone::All,
    ];

    pub fn apply(self, t: &Thread) -> Thread {
        match self {
            Milestone::Count(tau) => truncate_thread(t, tau),
            Milestone::All => t.clone(),
        }
    }

    pub fn tag(self) -> String {
        format!("tau={self}")
    }
}

impl fmt::Display for Milestone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Milestone::Count(n) => write!(f, "{n}"),
            Milestone::All => f.write_str("all"),
        }
    }
}

impl FromStr for Milestone {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(Milestone::All),
            n => n
                .parse()
                .map(Milestone::Count)
                .map_err(|_| ModelError::Config(format!("bad milestone {s:?}"))),
        }
    }
}

impl Serialize for Milestone {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Milestone::Count(n) => s.serialize_u64(*n as u64),
            Milestone::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for Milestone {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Milestone::Count(n)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn splits(ds: &Dataset) -> Result<(Vec<Thread>, Vec<Thread>)> {
    let train = ds.threads_in(Split::Train);
    let test = ds.threads_in(Split::Test);
    if train.is_empty() {
        return Err(ModelError::Empty("train split"));
    }
    if test.is_empty() {
        return Err(ModelError::Empty("test split"));
    }
    Ok((train, test))
}

/// Evaluates one trained pipeline on test threads cut at each milestone.
/// Only the kept prefix of each thread reaches the encoder and Q-network.
pub fn early_detection_sweep(
    trained: &TrainedPipeline,
    test: &[Thread],
    milestones: &[Milestone],
    encoder: &dyn TextEncoder,
) -> Result<Vec<EvalReport>> {
    milestones
        .iter()
        .map(|&m| {
            let cut: Vec<Thread> = test.iter().map(|t| m.apply(t)).collect();
            trained.evaluate(&cut, encoder, &m.tag())
        })
        .collect()
}

/// Like [`early_detection_sweep`], but training threads are cut at the same
/// milestone and the whole pipeline is refit for each.
pub fn early_detection_sweep_retrain(
    ds: &Dataset,
    milestones: &[Milestone],
    encoder: &dyn TextEncoder,
    cfg: &PipelineConfig,
) -> Result<Vec<EvalReport>> {
    let (train, test) = splits(ds)?;
    milestones
        .iter()
        .map(|&m| {
            let tr: Vec<Thread> = train.iter().map(|t| m.apply(t)).collect();
            let te: Vec<Thread> = test.iter().map(|t| m.apply(t)).collect();
            TrainedPipeline::fit(&tr, encoder, cfg)?.evaluate(&te, encoder, &m.tag())
        })
        .collect()
}

/// Full train/evaluate cycle with one feature block disabled.
pub fn ablation_run(
    ds: &Dataset,
    mode: Ablation,
    encoder: &dyn TextEncoder,
    cfg: &PipelineConfig,
) -> Result<EvalReport> {
    let (train, test) = splits(ds)?;
    let cfg = PipelineConfig {
        ablation: mode,
        ..cfg.clone()
    };
    TrainedPipeline::fit(&train, encoder, &cfg)?.evaluate(&test, encoder, mode.as_str())
}

pub fn alpha_tag(alpha: f64) -> String {
    format!("alpha={alpha}")
}

/// One full cycle per claim weight with everything else fixed.
pub fn alpha_sweep(
    ds: &Dataset,
    alphas: &[f64],
    encoder: &dyn TextEncoder,
    cfg: &PipelineConfig,
) -> Result<Vec<EvalReport>> {
    let (train, test) = splits(ds)?;
    alphas
        .iter()
        .map(|&alpha| {
            let mut c = cfg.clone();
            c.fusion.alpha = alpha;
            TrainedPipeline::fit(&train, encoder, &c)?.evaluate(&test, encoder, &alpha_tag(alpha))
        })
        .collect()
}
