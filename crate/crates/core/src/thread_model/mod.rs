//! Annotated conversation threads: domain types, validation, early-detection
//! truncation and train/dev splitting.
//!
//! A [`Thread`] is a source post plus its replies. Replies are kept sorted by
//! `(time, id)` and their parent links form a tree rooted at the source, so
//! every prefix of `replies` is itself a valid thread.

mod native;
mod rumoureval;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

pub use native::{read_native, to_native_line, write_native};
pub use rumoureval::load_rumoureval;

/// Stance of a post toward the thread's source. The discriminant doubles as
/// the Q-network action index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Support = 0,
    Deny = 1,
    Query = 2,
    Comment = 3,
    Root = 4,
}

impl Stance {
    pub const ALL: [Stance; 5] = [
        Stance::Support,
        Stance::Deny,
        Stance::Query,
        Stance::Comment,
        Stance::Root,
    ];
    /// Stances a reply may carry.
    pub const REPLY: [Stance; 4] = [
        Stance::Support,
        Stance::Deny,
        Stance::Query,
        Stance::Comment,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Stance> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Support => "support",
            Stance::Deny => "deny",
            Stance::Query => "query",
            Stance::Comment => "comment",
            Stance::Root => "root",
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stance {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "support" => Ok(Stance::Support),
            "deny" => Ok(Stance::Deny),
            "query" => Ok(Stance::Query),
            "comment" | "comments" => Ok(Stance::Comment),
            "root" => Ok(Stance::Root),
            _ => Err(DataError::UnknownStance(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClaimLabel {
    NonClaim,
    Claim,
}

impl ClaimLabel {
    pub fn is_claim(self) -> bool {
        self == ClaimLabel::Claim
    }
}

impl From<bool> for ClaimLabel {
    fn from(b: bool) -> Self {
        if b {
            ClaimLabel::Claim
        } else {
            ClaimLabel::NonClaim
        }
    }
}

/// Gold label of a source post. The discriminant is the classifier's class
/// index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VeracityLabel {
    NonMisinformation = 0,
    Misinformation = 1,
}

impl VeracityLabel {
    pub const ALL: [VeracityLabel; 2] = [
        VeracityLabel::NonMisinformation,
        VeracityLabel::Misinformation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<VeracityLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VeracityLabel::NonMisinformation => "non-misinformation",
            VeracityLabel::Misinformation => "misinformation",
        }
    }
}

impl fmt::Display for VeracityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VeracityLabel {
    type Err = DataError;

    /// Accepts the native names and the two resolved RumourEval labels.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "misinformation" | "false" => Ok(VeracityLabel::Misinformation),
            "non-misinformation" | "true" => Ok(VeracityLabel::NonMisinformation),
            _ => Err(DataError::UnknownVeracity(s.to_string())),
        }
    }
}

/// A single post. The source post has `parent_id == None` and stance `Root`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub id: String,
    pub parent_id: Option<String>,
    pub text: String,
    /// Epoch seconds.
    pub time: i64,
    pub stance: Stance,
    pub claim: ClaimLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thread {
    pub thread_id: String,
    pub source: Reply,
    pub replies: Vec<Reply>,
    pub veracity: VeracityLabel,
}

impl Thread {
    /// Builds a thread, sorting replies by `(time, id)`.
    pub fn new(
        thread_id: impl Into<String>,
        source: Reply,
        mut replies: Vec<Reply>,
        veracity: VeracityLabel,
    ) -> Self {
        sort_replies(&mut replies);
        Thread {
            thread_id: thread_id.into(),
            source,
            replies,
            veracity,
        }
    }

    /// Number of replies (`n`); the thread has `n + 1` nodes.
    pub fn n(&self) -> usize {
        self.replies.len()
    }

    /// Node `j` in chronological order: 0 is the source, `j >= 1` is reply `j - 1`.
    pub fn node(&self, j: usize) -> Option<&Reply> {
        if j == 0 {
            Some(&self.source)
        } else {
            self.replies.get(j - 1)
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Reply> {
        std::iter::once(&self.source).chain(self.replies.iter())
    }
}

pub(crate) fn sort_replies(replies: &mut [Reply]) {
    replies.sort_by(|a, b| a.time.cmp(&b.time).then_with(|| a.id.cmp(&b.id)));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(DataError::InvalidArgument(format!(
                "unknown split {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub threads: Vec<Thread>,
    pub split: BTreeMap<String, Split>,
}

impl Dataset {
    /// Adds a thread, rejecting duplicate thread ids.
    pub fn push(&mut self, thread: Thread, split: Split) -> Result<(), DataError> {
        if self.split.contains_key(&thread.thread_id) {
            return Err(DataError::DuplicateThread(thread.thread_id));
        }
        self.split.insert(thread.thread_id.clone(), split);
        self.threads.push(thread);
        Ok(())
    }

    pub fn split_of(&self, thread_id: &str) -> Option<Split> {
        self.split.get(thread_id).copied()
    }

    pub fn threads_in(&self, split: Split) -> Vec<Thread> {
        self.threads
            .iter()
            .filter(|t| self.split_of(&t.thread_id) == Some(split))
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.threads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threads.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    #[serde(rename = "native", alias = "native-jsonl", alias = "jsonl")]
    NativeJsonl,
    #[serde(rename = "rumoureval")]
    RumourEval,
}

impl FromStr for Format {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" | "native-jsonl" | "jsonl" => Ok(Format::NativeJsonl),
            "rumoureval" => Ok(Format::RumourEval),
            other => Err(DataError::InvalidArgument(format!(
                "unknown format {other:?}"
            ))),
        }
    }
}

/// Loads a corpus from disk. For `RumourEval`, `claim_sidecar` is an optional
/// `{reply_id: bool}` JSON file; native files carry claims inline and ignore it.
pub fn load_threads(
    path: &Path,
    format: Format,
    claim_sidecar: Option<&Path>,
) -> Result<Dataset, DataError> {
    match format {
        Format::NativeJsonl => read_native(path),
        Format::RumourEval => load_rumoureval(path, claim_sidecar),
    }
}

/// One broken invariant: the offending post and the rule name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub reply_id: String,
    pub rule: String,
}

impl Violation {
    fn new(reply_id: &str, rule: &str) -> Self {
        Violation {
            reply_id: reply_id.to_string(),
            rule: rule.to_string(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.reply_id, self.rule)
    }
}

/// Lists every invariant violation in `t`; empty when the thread is valid.
///
/// Rules: `source-not-root`, `source-has-parent`, `root-on-reply`,
/// `duplicate-id`, `dangling-parent`, `parent-not-earlier`,
/// `time-before-source`, `unsorted`.
pub fn validate_thread(t: &Thread) -> Vec<Violation> {
    let mut out = Vec::new();
    let src = &t.source;
    if src.stance != Stance::Root {
        out.push(Violation::new(&src.id, "source-not-root"));
    }
    if src.parent_id.is_some() {
        out.push(Violation::new(&src.id, "source-has-parent"));
    }

    let all_ids: HashSet<&str> = t.nodes().map(|r| r.id.as_str()).collect();
    let mut seen: HashSet<&str> = HashSet::from([src.id.as_str()]);
    let mut prev: Option<&Reply> = None;
    for r in &t.replies {
        if r.stance == Stance::Root {
            out.push(Violation::new(&r.id, "root-on-reply"));
        }
        if r.time < src.time {
            out.push(Violation::new(&r.id, "time-before-source"));
        }
        if let Some(p) = prev {
            if (p.time, &p.id) > (r.time, &r.id) {
                out.push(Violation::new(&r.id, "unsorted"));
            }
        }
        match r.parent_id.as_deref() {
            None => out.push(Violation::new(&r.id, "dangling-parent")),
            Some(pid) if !all_ids.contains(pid) => {
                out.push(Violation::new(&r.id, "dangling-parent"))
            }
            Some(pid) if !seen.contains(pid) => {
                out.push(Violation::new(&r.id, "parent-not-earlier"))
            }
            Some(_) => {}
        }
        if !seen.insert(r.id.as_str()) {
            out.push(Violation::new(&r.id, "duplicate-id"));
        }
        prev = Some(r);
    }
    out
}

/// Keeps the first `tau` replies. Replies whose parent was dropped are
/// re-parented to the source post.
pub fn truncate_thread(t: &Thread, tau: usize) -> Thread {
    let mut kept: Vec<Reply> = t.replies.iter().take(tau).cloned().collect();
    let mut ids: HashSet<String> = HashSet::from([t.source.id.clone()]);
    for r in &mut kept {
        let orphan = r.parent_id.as_ref().is_none_or(|p| !ids.contains(p));
        if orphan {
            r.parent_id = Some(t.source.id.clone());
        }
        ids.insert(r.id.clone());
    }
    Thread {
        thread_id: t.thread_id.clone(),
        source: t.source.clone(),
        replies: kept,
        veracity: t.veracity,
    }
}

/// Deterministically splits training threads into `(train, dev)`.
///
/// The dev set has `floor(dev_fraction * N)` threads, at least one when
/// `dev_fraction > 0`. Both halves keep the input's relative order.
pub fn split_train_dev(
    threads: &[Thread],
    dev_fraction: f64,
    seed: u64,
) -> Result<(Vec<Thread>, Vec<Thread>), DataError> {
    if !(0.0..1.0).contains(&dev_fraction) {
        return Err(DataError::InvalidArgument(format!(
            "dev_fraction must be in [0, 1), got {dev_fraction}"
        )));
    }
    let n = threads.len();
    if dev_fraction == 0.0 {
        return Ok((threads.to_vec(), Vec::new()));
    }
    if n < 2 {
        return Err(DataError::InvalidArgument(format!(
            "cannot carve a dev set out of {n} thread(s)"
        )));
    }
    let n_dev = ((dev_fraction * n as f64).floor() as usize).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let dev_idx: HashSet<usize> = order[..n_dev].iter().copied().collect();
    let (mut train, mut dev) = (Vec::with_capacity(n - n_dev), Vec::with_capacity(n_dev));
    for (i, t) in threads.iter().enumerate() {
        if dev_idx.contains(&i) {
            dev.push(t.clone());
        } else {
            train.push(t.clone());
        }
    }
    Ok((train, dev))
}

/// Sorts replies, checks duplicate and dangling ids, then runs the full
/// validator. Used by every loader.
pub(crate) fn finalize_thread(mut t: Thread) -> Result<Thread, DataError> {
    sort_replies(&mut t.replies);
    let mut ids: HashMap<&str, ()> = HashMap::from([(t.source.id.as_str(), ())]);
    for r in &t.replies {
        if ids.insert(r.id.as_str(), ()).is_some() {
            return Err(DataError::DuplicateId {
                thread: t.thread_id.clone(),
                id: r.id.clone(),
            });
        }
    }
    for r in &t.replies {
        let parent = r.parent_id.as_deref().unwrap_or("");
        if !ids.contains_key(parent) {
            return Err(DataError::DanglingParent {
                thread: t.thread_id.clone(),
                id: r.id.clone(),
                parent: parent.to_string(),
            });
        }
    }
    let violations = validate_thread(&t);
    if !violations.is_empty() {
        return Err(DataError::InvalidThread {
            thread: t.thread_id.clone(),
            violations,
        });
    }
    Ok(t)
}
