//! Per-thread feature vectors: claim-weighted Q-features followed by the
//! thread's text embedding.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::text_encoder::Embedding;
use crate::thread_model::Thread;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// Claims get `alpha`, non-claims get 1.
    Emphasis,
    /// `alpha * c_j`: non-claim positions are zeroed.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub alpha: f64,
    /// Number of thread positions kept in the Q block.
    #[serde(rename = "L")]
    pub positions: usize,
    pub weight_rule: WeightRule,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            alpha: 2.0,
            positions: 64,
            weight_rule: WeightRule::Emphasis,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(ModelError::Config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if self.positions == 0 {
            return Err(ModelError::Config("L must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedVector {
    pub values: Vec<f64>,
}

impl FusedVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn check_len(positions: usize) -> Result<()> {
    if positions == 0 {
        Err(ModelError::Config("L must be positive".into()))
    } else {
        Ok(())
    }
}

/// `q_list` cut or zero-padded to `positions` entries.
pub fn q_feature_vector(q_list: &[f64], positions: usize) -> Result<Vec<f64>> {
    check_len(positions)?;
    let mut out: Vec<f64> = q_list.iter().take(positions).copied().collect();
    out.resize(positions, 0.0);
    Ok(out)
}

/// 1 at every claim position. Position 0 is the source post.
pub fn claim_vector(t: &Thread, positions: usize) -> Result<Vec<f64>> {
    check_len(positions)?;
    let mut out: Vec<f64> = t
        .nodes()
        .take(positions)
        .map(|r| if r.claim.is_claim() { 1.0 } else { 0.0 })
        .collect();
    out.resize(positions, 0.0);
    Ok(out)
}

pub fn claim_weights(c: &[f64], alpha: f64) -> Vec<f64> {
    c.iter()
        .map(|&cj| if cj != 0.0 { alpha } else { 1.0 })
        .collect()
}

pub fn literal_claim_weights(c: &[f64], alpha: f64) -> Vec<f64> {
    c.iter().map(|&cj| alpha * cj).collect()
}

/// Weighted Q block concatenated with `s`.
pub fn fuse_with(
    f: &[f64],
    c: &[f64],
    alpha: f64,
    s: &Embedding,
    rule: WeightRule,
) -> Result<FusedVector> {
    if f.len() != c.len() {
        return Err(ModelError::DimMismatch {
            expected: f.len(),
            got: c.len(),
        });
    }
    let w = match rule {
        WeightRule::Emphasis => claim_weights(c, alpha),
        WeightRule::Literal => literal_claim_weights(c, alpha),
    };
    let mut values: Vec<f64> = f.iter().zip(&w).map(|(x, w)| x * w).collect();
    values.extend_from_slice(&s.values);
    Ok(FusedVector { values })
}

pub fn fuse(f: &[f64], c: &[f64], alpha: f64, s: &Embedding) -> Result<FusedVector> {
    fuse_with(f, c, alpha, s, WeightRule::Emphasis)
}

/// One row of the feature-matrix handoff file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub thread_id: String,
    pub v: Vec<f64>,
    /// 1 for misinformation.
    pub label: u8,
}
