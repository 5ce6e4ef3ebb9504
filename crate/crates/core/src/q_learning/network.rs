use serde::{Deserialize, Serialize};

use super::env::StateFeatures;
use crate::error::{ModelError, Result};
use crate::thread_model::Stance;

pub const N_ACTIONS: usize = 5;
pub const QNET_FORMAT: &str = "crowdshield-qnet/1";

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Single linear layer from state features to one Q-value per action.
/// `w` is `d_s x 5`, row-major; parameters flatten as `w` then `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    d_s: usize,
    pub w: Vec<f64>,
    pub b: [f64; N_ACTIONS],
}

impl QNetwork {
    pub fn zeros(d_s: usize) -> Self {
        QNetwork {
            d_s,
            w: vec![0.0; d_s * N_ACTIONS],
            b: [0.0; N_ACTIONS],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.d_s
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + N_ACTIONS
    }

    pub fn weight(&self, row: usize, action: usize) -> f64 {
        self.w[row * N_ACTIONS + action]
    }

    pub fn set_weight(&mut self, row: usize, action: usize, value: f64) {
        self.w[row * N_ACTIONS + action] = value;
    }

    pub fn q_values(&self, s: &StateFeatures) -> Result<[f64; N_ACTIONS]> {
        if s.dim() != self.d_s {
            return Err(ModelError::DimMismatch {
                expected: self.d_s,
                got: s.dim(),
            });
        }
        let mut q = self.b;
        for (row, &x) in self.w.chunks_exact(N_ACTIONS).zip(&s.0) {
            if x != 0.0 {
                for (qa, &wa) in q.iter_mut().zip(row) {
                    *qa += wa * x;
                }
            }
        }
        Ok(q)
    }

    pub fn q_value(&self, s: &StateFeatures, a: Stance) -> Result<f64> {
        Ok(self.q_values(s)?[a.index()])
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.w.clone();
        p.extend_from_slice(&self.b);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let (w, b) = p.split_at(self.w.len());
        self.w.copy_from_slice(w);
        self.b.copy_from_slice(b);
    }

    /// Mean squared error of `Q(s_i, a_i)` against `y_i` over the batch, and
    /// its gradient with respect to the flattened parameters.
    pub fn mse_and_grad(&self, batch: &[(&StateFeatures, Stance, f64)]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.n_params()];
        if batch.is_empty() {
            return Ok((0.0, grad));
        }
        let scale = 2.0 / batch.len() as f64;
        let mut loss = 0.0;
        let bias_off = self.w.len();
        for &(s, a, y) in batch {
            let a = a.index();
            let err = self.q_values(s)?[a] - y;
            loss += err * err;
            for (k, &x) in s.0.iter().enumerate() {
                grad[k * N_ACTIONS + a] += scale * err * x;
            }
            grad[bias_off + a] += scale * err;
        }
        Ok((loss / batch.len() as f64, grad))
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.b).all(|v| v.is_finite())
    }

    pub fn to_checkpoint(&self, config: serde_json::Value) -> QNetCheckpoint {
        QNetCheckpoint {
            format: QNET_FORMAT.to_string(),
            d_s: self.d_s,
            actions: N_ACTIONS,
            w: self.w.clone(),
            b: self.b.to_vec(),
            config,
        }
    }

    pub fn from_checkpoint(ck: &QNetCheckpoint) -> Result<Self> {
        let bad = |m: String| Err(ModelError::Checkpoint(m));
        if ck.format != QNET_FORMAT {
            return bad(format!(
                "expected format {QNET_FORMAT:?}, found {:?}",
                ck.format
            ));
        }
        if ck.actions != N_ACTIONS {
            return bad(format!(
                "expected {N_ACTIONS} actions, found {}",
                ck.actions
            ));
        }
        if ck.w.len() != ck.d_s * N_ACTIONS || ck.b.len() != N_ACTIONS {
            return bad("weight shapes do not match d_s".into());
        }
        let mut b = [0.0; N_ACTIONS];
        b.copy_from_slice(&ck.b);
        let net = QNetwork {
            d_s: ck.d_s,
            w: ck.w.clone(),
            b,
        };
        if !net.is_finite() {
            return bad("non-finite parameters".into());
        }
        Ok(net)
    }
}

/// On-disk form of a [`QNetwork`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetCheckpoint {
    pub format: String,
    pub d_s: usize,
    pub actions: usize,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub config: serde_json::Value,
}
