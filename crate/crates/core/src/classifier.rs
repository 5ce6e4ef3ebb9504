//! Two-class softmax layer over fused thread vectors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::error::{ModelError, Result};
use crate::evaluation::macro_f1;
use crate::fusion::FusedVector;
use crate::thread_model::VeracityLabel;

pub const CLF_FORMAT: &str = "crowdshield-clf/1";
const N_CLASSES: usize = 2;
const INIT_SCALE: f64 = 0.01;

/// `W` is `2 x dim` row-major, one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    dim: usize,
    pub w: Vec<f64>,
    pub b: [f64; N_CLASSES],
}

/// Numerically stable two-way softmax.
pub fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

impl LinearClassifier {
    pub fn zeros(dim: usize) -> Self {
        LinearClassifier {
            dim,
            w: vec![0.0; N_CLASSES * dim],
            b: [0.0; N_CLASSES],
        }
    }

    /// Weights and biases drawn from `U(-0.01, 0.01)`.
    pub fn init(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(dim);
        for p in m.w.iter_mut().chain(m.b.iter_mut()) {
            *p = rng.random_range(-INIT_SCALE..INIT_SCALE);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + N_CLASSES
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

    fn row(&self, k: usize) -> &[f64] {
        &self.w[k * self.dim..(k + 1) * self.dim]
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(ModelError::DimMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, v: &[f64]) -> Result<[f64; 2]> {
        self.check(v)?;
        let mut z = self.b;
        for (k, zk) in z.iter_mut().enumerate() {
            *zk += self.row(k).iter().zip(v).map(|(w, x)| w * x).sum::<f64>();
        }
        Ok(z)
    }

    pub fn probs(&self, v: &[f64]) -> Result<[f64; 2]> {
        Ok(softmax2(self.logits(v)?))
    }

    /// Most probable class; equal probabilities give `NonMisinformation`.
    pub fn predict(&self, v: &FusedVector) -> Result<(VeracityLabel, [f64; 2])> {
        let p = self.probs(&v.values)?;
        let label = if p[1] > p[0] {
            VeracityLabel::Misinformation
        } else {
            VeracityLabel::NonMisinformation
        };
        Ok((label, p))
    }

    /// Mean (optionally class-weighted) cross-entropy over the batch and its
    /// gradient with respect to the flattened parameters.
    pub fn ce_and_grad(
        &self,
        batch: &[(&[f64], VeracityLabel)],
        class_weights: [f64; 2],
    ) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.n_params()];
        if batch.is_empty() {
            return Ok((0.0, grad));
        }
        let n = batch.len() as f64;
        let bias_off = self.w.len();
        let mut loss = 0.0;
        for &(x, y) in batch {
            let p = self.probs(x)?;
            let yi = y.index();
            let cw = class_weights[yi];
            loss -= cw * p[yi].max(f64::MIN_POSITIVE).ln();
            for k in 0..N_CLASSES {
                let d = cw * (p[k] - if k == yi { 1.0 } else { 0.0 }) / n;
                for (g, &xj) in grad[k * self.dim..(k + 1) * self.dim].iter_mut().zip(x) {
                    *g += d * xj;
                }
                grad[bias_off + k] += d;
            }
        }
        Ok((loss / n, grad))
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.b).all(|v| v.is_finite())
    }

    pub fn to_checkpoint(&self) -> ClfCheckpoint {
        ClfCheckpoint {
            format: CLF_FORMAT.to_string(),
            dim: self.dim,
            w: (0..N_CLASSES).map(|k| self.row(k).to_vec()).collect(),
            b: self.b.to_vec(),
        }
    }

    pub fn from_checkpoint(ck: &ClfCheckpoint) -> Result<Self> {
        let bad = |m: String| Err(ModelError::Checkpoint(m));
        if ck.format != CLF_FORMAT {
            return bad(format!(
                "expected format {CLF_FORMAT:?}, found {:?}",
                ck.format
            ));
        }
        if ck.w.len() != N_CLASSES
            || ck.w.iter().any(|r| r.len() != ck.dim)
            || ck.b.len() != N_CLASSES
        {
            return bad("weight shapes do not match dim".into());
        }
        let mut m = Self::zeros(ck.dim);
        m.w = ck.w.concat();
        m.b.copy_from_slice(&ck.b);
        if !m.is_finite() {
            return bad("non-finite parameters".into());
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClfCheckpoint {
    pub format: String,
    pub dim: usize,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClfTrainConfig {
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    /// Weight each example's loss by the inverse frequency of its class.
    pub class_weighting: bool,
}

impl Default for ClfTrainConfig {
    fn default() -> Self {
        ClfTrainConfig {
            epochs: 20,
            patience: 3,
            lr: 0.001,
            batch: 8,
            seed: 0,
            class_weighting: false,
        }
    }
}

impl ClfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience > self.epochs {
            return Err(ModelError::Config(format!(
                "patience ({}) exceeds epochs ({})",
                self.patience, self.epochs
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ModelError::Config("classifier lr must be positive".into()));
        }
        if self.batch == 0 {
            return Err(ModelError::Config(
                "classifier batch must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_macro_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
}

fn check_set(x: &[FusedVector], y: &[VeracityLabel], what: &'static str) -> Result<()> {
    if x.is_empty() {
        return Err(ModelError::Empty(what));
    }
    if x.len() != y.len() {
        return Err(ModelError::DimMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(())
}

pub fn dev_macro_f1(m: &LinearClassifier, x: &[FusedVector], y: &[VeracityLabel]) -> Result<f64> {
    let preds = x
        .iter()
        .map(|v| Ok(m.predict(v)?.0))
        .collect::<Result<Vec<_>>>()?;
    macro_f1(y, &preds)
}

/// Mini-batch Adam on cross-entropy with early stopping on dev macro-F1.
/// Returns the parameters of the best dev epoch.
pub fn train_classifier(
    x: &[FusedVector],
    y: &[VeracityLabel],
    dev_x: &[FusedVector],
    dev_y: &[VeracityLabel],
    cfg: &ClfTrainConfig,
) -> Result<(LinearClassifier, History)> {
    cfg.validate()?;
    check_set(x, y, "training vectors")?;
    check_set(dev_x, dev_y, "dev vectors")?;
    let dim = x[0].dim();
    if let Some(v) = x.iter().chain(dev_x).find(|v| v.dim() != dim) {
        return Err(ModelError::DimMismatch {
            expected: dim,
            got: v.dim(),
        });
    }

    let class_weights = if cfg.class_weighting {
        let pos = y
            .iter()
            .filter(|&&l| l == VeracityLabel::Misinformation)
            .count() as f64;
        let n = y.len() as f64;
        let w = |k: f64| if k == 0.0 { 0.0 } else { n / (2.0 * k) };
        [w(n - pos), w(pos)]
    } else {
        [1.0, 1.0]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LinearClassifier::init(dim, rng.random());
    let mut best = model.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut since_best = 0;
    let mut adam = Adam::new(model.n_params(), cfg.lr);
    let mut params = model.params();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut history = History::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<(&[f64], VeracityLabel)> = chunk
                .iter()
                .map(|&i| (x[i].values.as_slice(), y[i]))
                .collect();
            let (loss, grad) = model.ce_and_grad(&batch, class_weights)?;
            loss_sum += loss * chunk.len() as f64;
            adam.step(&mut params, &grad);
            model.set_params(&params);
        }
        let f1 = dev_macro_f1(&model, dev_x, dev_y)?;
        history.epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / x.len() as f64,
            dev_macro_f1: f1,
        });
        if f1 >= best_f1 {
            best_f1 = f1;
            best = model.clone();
            history.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, history))
}
