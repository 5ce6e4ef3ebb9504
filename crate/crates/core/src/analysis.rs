//! Corpus statistics: split/label counts, stance transitions, stance-claim
//! co-occurrence and Cohen's kappa.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::thread_model::{Dataset, Split, Stance, Thread, VeracityLabel};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub threads: u64,
    /// Indexed by [`VeracityLabel::index`].
    pub veracity: [u64; 2],
    /// Reply stances, indexed by [`Stance::index`] (support..comment).
    pub stances: [u64; 4],
    pub replies: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub splits: BTreeMap<String, SplitStats>,
    pub total: SplitStats,
}

fn add_thread(s: &mut SplitStats, t: &Thread) {
    s.threads += 1;
    s.veracity[t.veracity.index()] += 1;
    for r in &t.replies {
        if let Some(c) = s.stances.get_mut(r.stance.index()) {
            *c += 1;
        }
        s.replies += 1;
    }
}

pub fn dataset_stats(d: &Dataset) -> DatasetStats {
    let mut out = DatasetStats::default();
    for split in [Split::Train, Split::Test] {
        out.splits
            .insert(split.as_str().to_string(), SplitStats::default());
    }
    for t in &d.threads {
        let split = d.split_of(&t.thread_id).unwrap_or(Split::Train);
        add_thread(
            out.splits
                .get_mut(split.as_str())
                .expect("both splits present"),
            t,
        );
        add_thread(&mut out.total, t);
    }
    out
}

impl DatasetStats {
    /// Rows of `split,label,count`, covering veracity and stance labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,label,count\n");
        let rows = self
            .splits
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain(std::iter::once(("total", &self.total)));
        for (name, s) in rows {
            for v in VeracityLabel::ALL {
                out.push_str(&format!("{name},{v},{}\n", s.veracity[v.index()]));
            }
            for st in Stance::REPLY {
                out.push_str(&format!("{name},{st},{}\n", s.stances[st.index()]));
            }
        }
        out
    }
}

/// How a reply's predecessor is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionMode {
    /// Parent post in the reply tree.
    #[default]
    Tree,
    /// The previous post in time.
    Chronological,
}

/// Counts of `from -> to` stance changes. `from` ranges over all five
/// stances (including the source's root), `to` over the four reply stances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub counts: [[u64; 4]; 5],
}

impl TransitionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, from: Stance, to: Stance) -> u64 {
        self.counts[from.index()]
            .get(to.index())
            .copied()
            .unwrap_or(0)
    }
}

pub fn stance_transitions(
    d: &Dataset,
    veracity: Option<VeracityLabel>,
    mode: TransitionMode,
) -> TransitionMatrix {
    let mut m = TransitionMatrix::default();
    for t in d
        .threads
        .iter()
        .filter(|t| veracity.is_none_or(|v| t.veracity == v))
    {
        let by_id: HashMap<&str, Stance> = t.nodes().map(|r| (r.id.as_str(), r.stance)).collect();
        let mut prev = t.source.stance;
        for r in &t.replies {
            let from = match mode {
                TransitionMode::Tree => r
                    .parent_id
                    .as_deref()
                    .and_then(|p| by_id.get(p).copied())
                    .unwrap_or(Stance::Root),
                TransitionMode::Chronological => prev,
            };
            if let Some(c) = m.counts[from.index()].get_mut(r.stance.index()) {
                *c += 1;
            }
            prev = r.stance;
        }
    }
    m
}

/// `from,to,veracity,count` rows for both classes.
pub fn transitions_csv(d: &Dataset, mode: TransitionMode) -> String {
    let mut out = String::from("from,to,veracity,count\n");
    for v in VeracityLabel::ALL {
        let m = stance_transitions(d, Some(v), mode);
        for from in Stance::ALL {
            for to in Stance::REPLY {
                out.push_str(&format!("{from},{to},{v},{}\n", m.get(from, to)));
            }
        }
    }
    out
}

/// `counts[stance][0]` are claims, `counts[stance][1]` non-claims, over all
/// replies.
pub fn stance_claim_matrix(d: &Dataset) -> [[u64; 2]; 4] {
    let mut m = [[0u64; 2]; 4];
    for r in d.threads.iter().flat_map(|t| &t.replies) {
        if let Some(row) = m.get_mut(r.stance.index()) {
            row[if r.claim.is_claim() { 0 } else { 1 }] += 1;
        }
    }
    m
}

pub fn stance_claim_csv(m: &[[u64; 2]; 4]) -> String {
    let mut out = String::from("stance,claim,count\n");
    for st in Stance::REPLY {
        let row = m[st.index()];
        out.push_str(&format!(
            "{st},claim,{}\n{st},non-claim,{}\n",
            row[0], row[1]
        ));
    }
    out
}

/// Cohen's kappa between two raters. Two identical constant raters give 1.
pub fn cohens_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64> {
    if a.is_empty() {
        return Err(ModelError::Empty("rater labels"));
    }
    if a.len() != b.len() {
        return Err(ModelError::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len() as f64;
    let mut ma: BTreeMap<&T, f64> = BTreeMap::new();
    let mut mb: BTreeMap<&T, f64> = BTreeMap::new();
    let mut agree = 0.0;
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x).or_default() += 1.0;
        *mb.entry(y).or_default() += 1.0;
        if x == y {
            agree += 1.0;
        }
    }
    let p_o = agree / n;
    let p_e: f64 = ma
        .iter()
        .map(|(k, ca)| ca * mb.get(k).unwrap_or(&0.0))
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
