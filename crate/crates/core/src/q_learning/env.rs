//! The thread-traversal environment: rewards, state features and episodes.

use std::sync::Arc;

use rand::Rng;

use super::network::{argmax, QNetwork, N_ACTIONS};
use super::{Behavior, QTrainConfig};
use crate::error::{ModelError, Result};
use crate::text_encoder::TextEncoder;
use crate::thread_model::{ClaimLabel, Stance, Thread};

const DAY_SECS: f64 = 86_400.0;

/// Claim reward plus stance reward. Ranges over `{-1, 0, 1, 2}`.
pub fn reward(claim: ClaimLabel, action: Stance) -> f64 {
    let claim_reward = if claim.is_claim() { 1.0 } else { 0.0 };
    let stance_reward = match action {
        Stance::Support | Stance::Query | Stance::Root => 1.0,
        Stance::Deny => -1.0,
        Stance::Comment => 0.0,
    };
    claim_reward + stance_reward
}

/// Node embedding followed by the position and time components.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFeatures(pub Vec<f64>);

impl StateFeatures {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn position(&self) -> f64 {
        self.0[self.0.len() - 2]
    }

    pub fn time(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

/// `index / (n + 1)` for node `index` of a thread with `n` replies.
pub fn position_feature(index: usize, n: usize) -> f64 {
    index as f64 / (n as f64 + 1.0)
}

/// `ln(1 + dt) / ln(1 + 86400)`, clipped to `[0, 1]`.
pub fn time_feature(dt_secs: i64) -> f64 {
    let dt = dt_secs.max(0) as f64;
    (dt.ln_1p() / DAY_SECS.ln_1p()).min(1.0)
}

fn assemble(mut emb: Vec<f64>, index: usize, t: &Thread, time: i64) -> StateFeatures {
    emb.push(position_feature(index, t.n()));
    emb.push(time_feature(time - t.source.time));
    StateFeatures(emb)
}

/// Features of node `index` (0 is the source post).
pub fn state_features(
    t: &Thread,
    index: usize,
    encoder: &dyn TextEncoder,
) -> Result<StateFeatures> {
    let node = t.node(index).ok_or(ModelError::IndexOutOfRange {
        index,
        len: t.n() + 1,
    })?;
    let emb = encoder.encode(&node.text)?;
    Ok(assemble(emb.values, index, t, node.time))
}

/// A thread with every node's state features precomputed.
#[derive(Debug, Clone)]
pub struct ThreadEnv {
    pub thread_id: String,
    pub states: Vec<Arc<StateFeatures>>,
    /// Gold stance per node; index 0 is `Root`.
    pub stances: Vec<Stance>,
    pub claims: Vec<ClaimLabel>,
}

impl ThreadEnv {
    pub fn new(t: &Thread, encoder: &dyn TextEncoder) -> Result<Self> {
        let texts: Vec<String> = t.nodes().map(|r| r.text.clone()).collect();
        let embs = encoder.encode_many(&texts)?;
        let states = embs
            .into_iter()
            .zip(t.nodes())
            .enumerate()
            .map(|(j, (e, node))| Arc::new(assemble(e.values, j, t, node.time)))
            .collect();
        Ok(ThreadEnv {
            thread_id: t.thread_id.clone(),
            states,
            stances: t.nodes().map(|r| r.stance).collect(),
            claims: t.nodes().map(|r| r.claim).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].dim()
    }
}

/// Actions the Bellman backup may maximize over, as a bit set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const ALL: ActionSet = ActionSet((1 << N_ACTIONS) - 1);

    pub fn only(a: Stance) -> Self {
        ActionSet(1 << a.index())
    }

    pub fn contains(self, a: usize) -> bool {
        self.0 & (1 << a) != 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextState {
    State {
        features: Arc<StateFeatures>,
        actions: ActionSet,
    },
    Terminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Arc<StateFeatures>,
    pub action: Stance,
    pub reward: f64,
    pub next: NextState,
}

/// `r + discount * max_a Q(s', a)` over the transition's admissible next
/// actions, or `r` at the end of a thread.
pub fn bellman_target(tr: &Transition, target_net: &QNetwork, discount: f64) -> Result<f64> {
    match &tr.next {
        NextState::Terminal => Ok(tr.reward),
        NextState::State { features, actions } => {
            let q = target_net.q_values(features)?;
            let best = (0..N_ACTIONS)
                .filter(|&a| actions.contains(a))
                .map(|a| q[a])
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(tr.reward + discount * best)
        }
    }
}

/// Walks every node of the thread in order, choosing one action per node.
///
/// Under [`Behavior::EpsilonGreedy`] a uniform random action is taken with
/// probability `explore_rate` and the greedy action otherwise (ties go to
/// the lowest index). Under [`Behavior::Gold`] the annotated stance is taken
/// and backups only consider the next node's annotated stance.
pub fn run_episode<R: Rng>(
    env: &ThreadEnv,
    q: &QNetwork,
    cfg: &QTrainConfig,
    rng: &mut R,
) -> Result<Vec<Transition>> {
    let n = env.len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let state = env.states[j].clone();
        let action = match cfg.behavior {
            Behavior::Gold => env.stances[j],
            Behavior::EpsilonGreedy => {
                let roll: f64 = rng.random();
                if roll < cfg.explore_rate {
                    Stance::ALL[rng.random_range(0..N_ACTIONS)]
                } else {
                    Stance::ALL[argmax(&q.q_values(&state)?)]
                }
            }
        };
        let next = if j + 1 == n {
            NextState::Terminal
        } else {
            let actions = match cfg.behavior {
                Behavior::Gold => ActionSet::only(env.stances[j + 1]),
                Behavior::EpsilonGreedy => ActionSet::ALL,
            };
            NextState::State {
                features: env.states[j + 1].clone(),
                actions,
            }
        };
        out.push(Transition {
            state,
            action,
            reward: reward(env.claims[j], action),
            next,
        });
    }
    Ok(out)
}
