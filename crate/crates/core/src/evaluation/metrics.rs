use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::thread_model::VeracityLabel;

/// 2x2 table indexed `[gold][pred]` by [`VeracityLabel::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: [[u64; 2]; 2],
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_pairs(golds: &[VeracityLabel], preds: &[VeracityLabel]) -> Result<Self> {
        if golds.len() != preds.len() {
            return Err(ModelError::DimMismatch {
                expected: golds.len(),
                got: preds.len(),
            });
        }
        let mut c = Confusion::default();
        for (g, p) in golds.iter().zip(preds) {
            c.counts[g.index()][p.index()] += 1;
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn class(&self, cls: VeracityLabel) -> ClassCounts {
        let k = cls.index();
        let o = 1 - k;
        ClassCounts {
            tp: self.counts[k][k],
            fp: self.counts[o][k],
            fn_: self.counts[k][o],
            tn: self.counts[o][o],
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall and F1 for `cls`. A zero denominator gives 0.
pub fn prf(conf: &Confusion, cls: VeracityLabel) -> (f64, f64, f64) {
    let c = conf.class(cls);
    let p = ratio(c.tp as f64, (c.tp + c.fp) as f64);
    let r = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
    (p, r, ratio(2.0 * p * r, p + r))
}

pub fn macro_f1_of(conf: &Confusion) -> f64 {
    VeracityLabel::ALL
        .iter()
        .map(|&c| prf(conf, c).2)
        .sum::<f64>()
        / 2.0
}

pub fn macro_f1(golds: &[VeracityLabel], preds: &[VeracityLabel]) -> Result<f64> {
    if golds.is_empty() {
        return Err(ModelError::Empty("gold labels"));
    }
    Ok(macro_f1_of(&Confusion::from_pairs(golds, preds)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: VeracityLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Metrics for one evaluation condition (a milestone, ablation or alpha).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition: String,
    pub n: u64,
    pub classes: Vec<ClassMetrics>,
    pub macro_f1: f64,
    pub confusion: Confusion,
}

impl EvalReport {
    pub fn from_confusion(condition: impl Into<String>, confusion: Confusion) -> Self {
        let classes = VeracityLabel::ALL
            .iter()
            .map(|&class| {
                let (precision, recall, f1) = prf(&confusion, class);
                let c = confusion.class(class);
                ClassMetrics {
                    class,
                    precision,
                    recall,
                    f1,
                    support: c.tp + c.fn_,
                }
            })
            .collect();
        EvalReport {
            condition: condition.into(),
            n: confusion.total(),
            classes,
            macro_f1: macro_f1_of(&confusion),
            confusion,
        }
    }

    pub fn from_predictions(
        condition: impl Into<String>,
        golds: &[VeracityLabel],
        preds: &[VeracityLabel],
    ) -> Result<Self> {
        if golds.is_empty() {
            return Err(ModelError::Empty("gold labels"));
        }
        Ok(Self::from_confusion(
            condition,
            Confusion::from_pairs(golds, preds)?,
        ))
    }
}

pub const CSV_HEADER: &str = "condition,class,p,r,f1,macro_f1";

/// One row per (report, class).
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in reports {
        for c in &r.classes {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6}\n",
                r.condition, c.class, c.precision, c.recall, c.f1, r.macro_f1
            ));
        }
    }
    out
}
