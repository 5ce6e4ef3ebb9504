//! Seeded synthetic corpora with a controllable stance/veracity signal.
//!
//! Reply text is drawn from per-stance token pools mixed with a shared pool,
//! so veracity is visible only through the stance makeup of a thread.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::thread_model::{ClaimLabel, Dataset, Reply, Split, Stance, Thread, VeracityLabel};

/// Probabilities over the four reply stances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceDist {
    pub support: f64,
    pub deny: f64,
    pub query: f64,
    pub comment: f64,
}

impl StanceDist {
    pub fn new(support: f64, deny: f64, query: f64, comment: f64) -> Self {
        StanceDist {
            support,
            deny,
            query,
            comment,
        }
    }

    pub fn probs(&self) -> [f64; 4] {
        [self.support, self.deny, self.query, self.comment]
    }

    pub fn get(&self, s: Stance) -> f64 {
        match s {
            Stance::Support => self.support,
            Stance::Deny => self.deny,
            Stance::Query => self.query,
            Stance::Comment => self.comment,
            Stance::Root => 0.0,
        }
    }

    fn check_probs(&self, what: &str) -> Result<(), DataError> {
        let p = self.probs();
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(DataError::InvalidArgument(format!(
                "{what}: entries must lie in [0, 1]"
            )));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidArgument(format!(
                "{what}: sums to {s}, expected 1"
            )));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Stance {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (s, p) in Stance::REPLY.iter().zip(self.probs()) {
            acc += p;
            if u < acc {
                return *s;
            }
        }
        Stance::Comment
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenPools {
    pub support: Vec<String>,
    pub deny: Vec<String>,
    pub query: Vec<String>,
    pub comment: Vec<String>,
    pub shared: Vec<String>,
}

fn pool(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl Default for TokenPools {
    fn default() -> Self {
        TokenPools {
            support: pool("agree", 40),
            deny: pool("refute", 40),
            query: pool("ask", 40),
            comment: pool("chat", 40),
            shared: pool("word", 400),
        }
    }
}

impl TokenPools {
    fn for_stance(&self, s: Stance) -> &[String] {
        match s {
            Stance::Support => &self.support,
            Stance::Deny => &self.deny,
            Stance::Query => &self.query,
            Stance::Comment | Stance::Root => &self.comment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_threads: usize,
    /// Inclusive bounds on replies per thread.
    pub replies_range: [usize; 2],
    pub misinfo_fraction: f64,
    pub misinfo_stances: StanceDist,
    pub non_misinfo_stances: StanceDist,
    /// Replies past the first `signal_replies` use `neutral_stances` for
    /// both classes. `None` keeps the signal throughout.
    pub signal_replies: Option<usize>,
    pub neutral_stances: StanceDist,
    /// Probability that a reply of the given stance is a claim.
    pub claim_rate: StanceDist,
    pub token_pools: TokenPools,
    pub tokens_per_reply: usize,
    /// Chance that each token comes from the stance pool rather than the
    /// shared pool.
    pub stance_token_rate: f64,
    /// Chance that a reply answers an earlier reply instead of the source.
    pub branching: f64,
    pub mean_gap_secs: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_threads: 400,
            replies_range: [8, 24],
            misinfo_fraction: 0.25,
            misinfo_stances: StanceDist::new(0.05, 0.55, 0.10, 0.30),
            non_misinfo_stances: StanceDist::new(0.50, 0.05, 0.15, 0.30),
            signal_replies: None,
            neutral_stances: StanceDist::new(0.25, 0.20, 0.15, 0.40),
            claim_rate: StanceDist::new(0.6, 0.5, 0.2, 0.3),
            token_pools: TokenPools::default(),
            tokens_per_reply: 8,
            stance_token_rate: 0.05,
            branching: 0.3,
            mean_gap_secs: 60.0,
            test_fraction: 0.25,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let unit = |x: f64, what: &str| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(DataError::InvalidArgument(format!(
                    "{what} must lie in [0, 1], got {x}"
                )))
            }
        };
        unit(self.misinfo_fraction, "misinfo_fraction")?;
        unit(self.stance_token_rate, "stance_token_rate")?;
        unit(self.branching, "branching")?;
        unit(self.test_fraction, "test_fraction")?;
        self.misinfo_stances.check_probs("misinfo_stances")?;
        self.non_misinfo_stances
            .check_probs("non_misinfo_stances")?;
        self.neutral_stances.check_probs("neutral_stances")?;
        for p in self.claim_rate.probs() {
            unit(p, "claim_rate")?;
        }
        if self.replies_range[0] > self.replies_range[1] {
            return Err(DataError::InvalidArgument(
                "replies_range min exceeds max".into(),
            ));
        }
        if !(self.mean_gap_secs.is_finite() && self.mean_gap_secs > 0.0) {
            return Err(DataError::InvalidArgument(
                "mean_gap_secs must be positive".into(),
            ));
        }
        let p = &self.token_pools;
        if [&p.support, &p.deny, &p.query, &p.comment, &p.shared]
            .iter()
            .any(|v| v.is_empty())
        {
            return Err(DataError::InvalidArgument(
                "token pools must be nonempty".into(),
            ));
        }
        Ok(())
    }
}

fn text<R: Rng>(cfg: &SynthConfig, stance: Stance, rng: &mut R) -> String {
    let own = cfg.token_pools.for_stance(stance);
    (0..cfg.tokens_per_reply)
        .map(|_| {
            let from = if rng.random::<f64>() < cfg.stance_token_rate {
                own
            } else {
                &cfg.token_pools.shared
            };
            from.choose(rng).expect("pools are nonempty").as_str()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn gen_thread<R: Rng>(
    cfg: &SynthConfig,
    idx: usize,
    veracity: VeracityLabel,
    rng: &mut R,
) -> Thread {
    let thread_id = format!("synth-{idx:05}");
    let gap = Exp::new(1.0 / cfg.mean_gap_secs).expect("validated rate");
    let n = rng.random_range(cfg.replies_range[0]..=cfg.replies_range[1]);
    let source = Reply {
        id: format!("{thread_id}-s"),
        parent_id: None,
        text: text(cfg, Stance::Root, rng),
        time: 0,
        stance: Stance::Root,
        claim: ClaimLabel::Claim,
    };
    let signal = match veracity {
        VeracityLabel::Misinformation => &cfg.misinfo_stances,
        VeracityLabel::NonMisinformation => &cfg.non_misinfo_stances,
    };
    let mut replies: Vec<Reply> = Vec::with_capacity(n);
    let mut time = 0i64;
    for j in 0..n {
        let dist = match cfg.signal_replies {
            Some(k) if j >= k => &cfg.neutral_stances,
            _ => signal,
        };
        let stance = dist.sample(rng);
        let claim = rng.random::<f64>() < cfg.claim_rate.get(stance);
        time += (gap.sample(rng).round() as i64).max(1);
        let parent_id = if j > 0 && rng.random::<f64>() < cfg.branching {
            replies[rng.random_range(0..j)].id.clone()
        } else {
            source.id.clone()
        };
        replies.push(Reply {
            id: format!("{thread_id}-r{:03}", j + 1),
            parent_id: Some(parent_id),
            text: text(cfg, stance, rng),
            time,
            stance,
            claim: claim.into(),
        });
    }
    Thread::new(thread_id, source, replies, veracity)
}

/// Generates a corpus; identical configs give identical datasets.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Dataset, DataError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels: Vec<VeracityLabel> = (0..cfg.n_threads)
        .map(|_| {
            if rng.random::<f64>() < cfg.misinfo_fraction {
                VeracityLabel::Misinformation
            } else {
                VeracityLabel::NonMisinformation
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..cfg.n_threads).collect();
    order.shuffle(&mut rng);
    let n_test = (cfg.test_fraction * cfg.n_threads as f64).round() as usize;
    let mut is_test = vec![false; cfg.n_threads];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let mut ds = Dataset::default();
    for (i, &label) in labels.iter().enumerate() {
        let t = gen_thread(cfg, i, label, &mut rng);
        let split = if is_test[i] {
            Split::Test
        } else {
            Split::Train
        };
        ds.push(t, split)?;
    }
    Ok(ds)
}
