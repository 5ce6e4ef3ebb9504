//! Misinformation prediction from conversation threads.
//!
//! Threads are traversed by a Q-learning agent whose per-node Q-values,
//! weighted by claim labels and joined with a text embedding, feed a linear
//! veracity classifier.

pub mod adam;
pub mod analysis;
pub mod classifier;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod pipeline;
pub mod q_learning;
pub mod synth;
pub mod text_encoder;
pub mod thread_model;

pub use classifier::{ClfTrainConfig, LinearClassifier};
pub use config::RunConfig;
pub use error::{DataError, EncoderError, ModelError};
pub use evaluation::{EvalReport, Milestone};
pub use fusion::{FusedVector, FusionConfig};
pub use pipeline::{Ablation, PipelineConfig, TrainedPipeline};
pub use q_learning::{QNetwork, QTrainConfig};
pub use synth::SynthConfig;
pub use text_encoder::{Embedding, EncoderConfig, TextEncoder};
pub use thread_model::{ClaimLabel, Dataset, Reply, Split, Stance, Thread, VeracityLabel};
