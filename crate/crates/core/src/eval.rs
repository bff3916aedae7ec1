//! Slot-level evaluation of predicted frames against an annotated corpus.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Frame, Origin};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldExample {
    pub utterance: String,
    pub frame: BTreeMap<String, String>,
    /// Marks utterances with injected noise tokens.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub noisy: bool,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold corpus line {line}: {message}")]
    BadGold { line: usize, message: String },
    #[error("predictions and gold corpus are not aligned at example {0}")]
    MisalignedCorpus(usize),
}

/// One JSON object per non-blank line.
pub fn load_gold(text: &str) -> Result<Vec<GoldExample>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::BadGold {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SlotMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// 0/0 counts as a perfect score.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl SlotMetrics {
    fn finish(mut self) -> Self {
        self.precision = ratio(self.tp, self.tp + self.fp);
        self.recall = ratio(self.tp, self.tp + self.fn_);
        let sum = self.precision + self.recall;
        self.f1 = if sum == 0.0 {
            0.0
        } else {
            2.0 * self.precision * self.recall / sum
        };
        self
    }

    fn add(&mut self, other: &SlotMetrics) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Offender {
    pub utterance: String,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub examples: usize,
    pub per_slot: BTreeMap<String, SlotMetrics>,
    pub micro: SlotMetrics,
    /// Examples with the most errors, worst first.
    pub worst: Vec<Offender>,
}

const WORST_LIMIT: usize = 5;

fn same(a: &str, b: &str) -> bool {
    a.to_lowercase() == b.to_lowercase()
}

/// Scores predictions slot by slot. Defaulted slots only count when
/// `score_defaults` is set.
pub fn evaluate(
    predictions: &[(String, Frame)],
    gold: &[GoldExample],
    score_defaults: bool,
) -> Result<EvalReport, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::MisalignedCorpus(predictions.len().min(gold.len())));
    }
    let mut per_slot: BTreeMap<String, SlotMetrics> = BTreeMap::new();
    let mut offenders = Vec::new();
    for (i, ((utterance, frame), g)) in predictions.iter().zip(gold).enumerate() {
        if *utterance != g.utterance {
            return Err(EvalError::MisalignedCorpus(i));
        }
        let (mut fp, mut fn_) = (0, 0);
        let mut matched = Vec::new();
        for (slot, v) in &frame.values {
            if v.origin == Origin::Defaulted && !score_defaults {
                continue;
            }
            let m = per_slot.entry(slot.clone()).or_default();
            if g.frame.get(slot).is_some_and(|gv| same(gv, &v.value)) {
                m.tp += 1;
                matched.push(slot);
            } else {
                m.fp += 1;
                fp += 1;
            }
        }
        for slot in g.frame.keys() {
            if !matched.contains(&slot) {
                per_slot.entry(slot.clone()).or_default().fn_ += 1;
                fn_ += 1;
            }
        }
        if fp + fn_ > 0 {
            offenders.push((i, Offender {
                utterance: utterance.clone(),
                fp,
                fn_,
            }));
        }
    }
    let mut micro = SlotMetrics::default();
    for m in per_slot.values_mut() {
        micro.add(m);
        *m = m.finish();
    }
    offenders.sort_by_key(|(i, o)| (std::cmp::Reverse(o.fp + o.fn_), *i));
    Ok(EvalReport {
        examples: gold.len(),
        per_slot,
        micro: micro.finish(),
        worst: offenders
            .into_iter()
            .take(WORST_LIMIT)
            .map(|(_, o)| o)
            .collect(),
    })
}
