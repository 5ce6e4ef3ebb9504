//! Deep Q-learning over thread traversals.
//!
//! Each node of a thread is a state; the stance taken at the node is the
//! action. Rewards combine the node's claim label with the chosen stance.
//! A zero-initialized linear Q-network is fit by replayed mini-batch
//! regression on Bellman targets computed from the weights as they stood
//! before each update.

mod env;
mod network;

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::error::{ModelError, Result};
use crate::text_encoder::TextEncoder;
use crate::thread_model::Thread;

pub use env::{
    bellman_target, position_feature, reward, run_episode, state_features, time_feature, ActionSet,
    NextState, StateFeatures, ThreadEnv, Transition,
};
pub use network::{argmax, QNetCheckpoint, QNetwork, N_ACTIONS, QNET_FORMAT};

/// How actions are chosen while generating episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    EpsilonGreedy,
    /// Replay the annotated stances; backups follow the annotated chain.
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QTrainConfig {
    pub episodes: usize,
    /// Bellman discount.
    pub discount: f64,
    /// Probability of a uniformly random action under epsilon-greedy.
    pub explore_rate: f64,
    pub lr: f64,
    pub batch: usize,
    pub buffer_capacity: usize,
    pub min_buffer_before_update: usize,
    pub behavior: Behavior,
    pub seed: u64,
}

impl Default for QTrainConfig {
    fn default() -> Self {
        QTrainConfig {
            episodes: 1000,
            discount: 0.2,
            explore_rate: 0.2,
            lr: 0.001,
            batch: 32,
            buffer_capacity: 10_000,
            min_buffer_before_update: 64,
            behavior: Behavior::EpsilonGreedy,
            seed: 0,
        }
    }
}

impl QTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.discount) || !unit(self.explore_rate) {
            return Err(ModelError::Config(
                "discount and explore_rate must lie in [0, 1]".into(),
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ModelError::Config("lr must be positive".into()));
        }
        if self.batch == 0 || self.buffer_capacity == 0 {
            return Err(ModelError::Config(
                "batch and buffer_capacity must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten once
/// full. Sampling is uniform with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            items: Vec::with_capacity(capacity.min(4096)),
            capacity,
            next: 0,
        }
    }

    pub fn push(&mut self, tr: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(tr);
        } else {
            self.items[self.next] = tr;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Transition> {
        self.items.iter()
    }

    pub fn sample<'a, R: Rng>(&'a self, n: usize, rng: &mut R) -> Vec<&'a Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub thread_id: String,
    pub total_reward: f64,
    /// Batch loss before the update; `None` while the buffer is filling.
    pub mean_loss: Option<f64>,
    pub mean_target: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeLog>,
}

impl TrainLog {
    /// Mean of the recorded losses over `range` of episodes, skipping
    /// episodes without an update.
    pub fn mean_loss(&self, range: std::ops::Range<usize>) -> Option<f64> {
        let vals: Vec<f64> = self.episodes
            [range.start.min(self.episodes.len())..range.end.min(self.episodes.len())]
            .iter()
            .filter_map(|e| e.mean_loss)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,thread_id,total_reward,mean_loss,mean_target\n");
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.9}")).unwrap_or_default();
        for e in &self.episodes {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.episode,
                e.thread_id,
                e.total_reward,
                fmt(e.mean_loss),
                fmt(e.mean_target)
            ));
        }
        out
    }
}

/// Everything a training run produces, including the final replay buffer.
#[derive(Debug, Clone)]
pub struct QTraining {
    pub net: QNetwork,
    pub log: TrainLog,
    pub buffer: ReplayBuffer,
}

/// Trains a fresh network on precomputed thread environments.
pub fn train_q_envs(envs: &[ThreadEnv], cfg: &QTrainConfig) -> Result<QTraining> {
    cfg.validate()?;
    let first = envs.first().ok_or(ModelError::Empty("training threads"))?;
    let d_s = first.state_dim();
    if let Some(bad) = envs.iter().find(|e| e.state_dim() != d_s) {
        return Err(ModelError::DimMismatch {
            expected: d_s,
            got: bad.state_dim(),
        });
    }
    let mut q = QNetwork::zeros(d_s);
    let mut adam = Adam::new(q.n_params(), cfg.lr);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = TrainLog::default();
    let mut params = q.params();

    for episode in 0..cfg.episodes {
        let env = &envs[rng.random_range(0..envs.len())];
        let transitions = run_episode(env, &q, cfg, &mut rng)?;
        let total_reward = transitions.iter().map(|t| t.reward).sum();
        transitions.into_iter().for_each(|t| buffer.push(t));

        let mut entry = EpisodeLog {
            episode,
            thread_id: env.thread_id.clone(),
            total_reward,
            mean_loss: None,
            mean_target: None,
        };
        if buffer.len() >= cfg.min_buffer_before_update.max(1) {
            let batch = buffer.sample(cfg.batch, &mut rng);
            // Targets use the weights as they stand before this step.
            let targets = batch
                .iter()
                .map(|tr| bellman_target(tr, &q, cfg.discount))
                .collect::<Result<Vec<f64>>>()?;
            let rows: Vec<_> = batch
                .iter()
                .zip(&targets)
                .map(|(tr, &y)| (tr.state.as_ref(), tr.action, y))
                .collect();
            let (loss, grad) = q.mse_and_grad(&rows)?;
            adam.step(&mut params, &grad);
            q.set_params(&params);
            entry.mean_loss = Some(loss);
            entry.mean_target = Some(targets.iter().sum::<f64>() / targets.len() as f64);
        }
        log.episodes.push(entry);
    }
    Ok(QTraining {
        net: q,
        log,
        buffer,
    })
}

/// Trains a Q-network over `train`, one uniformly sampled thread per episode.
pub fn train_q(
    train: &[Thread],
    encoder: &dyn TextEncoder,
    cfg: &QTrainConfig,
) -> Result<(QNetwork, TrainLog)> {
    if train.is_empty() {
        return Err(ModelError::Empty("training threads"));
    }
    let envs = train
        .iter()
        .map(|t| ThreadEnv::new(t, encoder))
        .collect::<Result<Vec<_>>>()?;
    let out = train_q_envs(&envs, cfg)?;
    Ok((out.net, out.log))
}

/// Q-values at the annotated stance of every node, source first.
pub fn q_list(q: &QNetwork, env: &ThreadEnv) -> Result<Vec<f64>> {
    env.states
        .iter()
        .zip(&env.stances)
        .map(|(s, &a)| q.q_value(s, a))
        .collect()
}

/// `thread_id -> [Q(s_0, root), Q(s_1, a_1), ..., Q(s_n, a_n)]` at the
/// annotated stances.
pub fn export_q_table(
    q: &QNetwork,
    threads: &[Thread],
    encoder: &dyn TextEncoder,
) -> Result<BTreeMap<String, Vec<f64>>> {
    threads
        .iter()
        .map(|t| {
            Ok((
                t.thread_id.clone(),
                q_list(q, &ThreadEnv::new(t, encoder)?)?,
            ))
        })
        .collect()
}
