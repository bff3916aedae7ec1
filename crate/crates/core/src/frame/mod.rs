//! Query frames: slot filling from hypotheses, consistency checking and
//! default completion against a knowledge base of inheriting theories.

mod kb;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::{QueryHypothesis, DEFAULT_EPSILON_WEIGHT};
use crate::grammar::{CategoryId, Weight};

pub use kb::{
    linearize, load_kb, resolve_default, Constraint, ConstraintForm, KbError, KnowledgeBase,
    Theory,
};

pub const DEFAULT_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub db_attribute: String,
    pub required: bool,
    pub source_category: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSchema {
    pub slots: Vec<SlotSpec>,
}

impl FrameSchema {
    pub fn from_json(text: &str) -> Result<Self, FrameError> {
        let schema: FrameSchema =
            serde_json::from_str(text).map_err(|e| FrameError::Schema(e.to_string()))?;
        let mut names = BTreeSet::new();
        for s in &schema.slots {
            if !names.insert(s.name.as_str()) {
                return Err(FrameError::Schema(format!("duplicate slot {}", s.name)));
            }
        }
        Ok(schema)
    }

    /// Every slot must be fed by a declared chunk category.
    pub fn check_categories(&self, chunk_cats: &[CategoryId]) -> Result<(), FrameError> {
        for s in &self.slots {
            if !chunk_cats.iter().any(|c| c.as_str() == s.source_category) {
                return Err(FrameError::Schema(format!(
                    "slot {} uses {} which is not a chunk category",
                    s.name, s.source_category
                )));
            }
        }
        Ok(())
    }

    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn slot_for_category(&self, category: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.source_category == category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Extracted,
    Defaulted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotValue {
    pub value: String,
    pub confidence: Weight,
    pub origin: Origin,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub values: BTreeMap<String, SlotValue>,
    pub weight: Weight,
    pub consistent: bool,
    pub violations: Vec<String>,
}

impl Frame {
    pub fn extracted(&self) -> impl Iterator<Item = (&String, &SlotValue)> {
        self.values.iter().filter(|(_, v)| v.origin == Origin::Extracted)
    }

    pub fn extracted_count(&self) -> usize {
        self.extracted().count()
    }

    pub fn extracted_required_count(&self) -> usize {
        self.extracted().filter(|(_, v)| v.required).count()
    }

    pub fn value(&self, slot: &str) -> Option<&str> {
        self.values.get(slot).map(|v| v.value.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    /// Weight of a frame with no extracted slot.
    pub epsilon_weight: Weight,
    /// Confidence given to defaulted slots.
    pub default_confidence: Weight,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            epsilon_weight: Weight::new(DEFAULT_EPSILON_WEIGHT).expect("in range"),
            default_confidence: Weight::new(DEFAULT_CONFIDENCE).expect("in range"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("no schema slot for chunk category {0}")]
    UnmappedCategory(String),
    #[error("frame is inconsistent: {}", .0.join(", "))]
    InconsistentFrame(Vec<String>),
    #[error("invalid schema: {0}")]
    Schema(String),
}

fn frame_weight(values: &BTreeMap<String, SlotValue>, epsilon: Weight) -> Weight {
    values
        .values()
        .filter(|v| v.origin == Origin::Extracted)
        .map(|v| v.confidence)
        .reduce(Weight::min)
        .unwrap_or(epsilon)
}

/// One frame per hypothesis. When two chunks fill the same slot the more
/// confident one wins, the earlier one on ties.
pub fn frames_from_hypotheses(
    hyps: &[QueryHypothesis],
    schema: &FrameSchema,
    cfg: &FrameConfig,
) -> Result<Vec<Frame>, FrameError> {
    hyps.iter()
        .map(|h| {
            let mut values: BTreeMap<String, SlotValue> = BTreeMap::new();
            for c in &h.chunks {
                let slot = schema
                    .slot_for_category(c.category.as_str())
                    .ok_or_else(|| FrameError::UnmappedCategory(c.category.to_string()))?;
                let better = values
                    .get(&slot.name)
                    .is_none_or(|cur| c.weight > cur.confidence);
                if better {
                    values.insert(
                        slot.name.clone(),
                        SlotValue {
                            value: c.text.clone(),
                            confidence: c.weight,
                            origin: Origin::Extracted,
                            required: slot.required,
                        },
                    );
                }
            }
            Ok(Frame {
                weight: frame_weight(&values, cfg.epsilon_weight),
                values,
                consistent: true,
                violations: Vec::new(),
            })
        })
        .collect()
}

fn same(a: &str, b: &str) -> bool {
    a.to_lowercase() == b.to_lowercase()
}

fn violated(form: &ConstraintForm, frame: &Frame) -> bool {
    let holds = |(slot, value): &(String, String)| frame.value(slot).is_some_and(|v| same(v, value));
    match form {
        ConstraintForm::Incompatible { first, second } => holds(first) && holds(second),
        ConstraintForm::Requires { when, slot, values } => {
            holds(when)
                && frame
                    .value(slot)
                    .is_some_and(|v| !values.iter().any(|allowed| same(v, allowed)))
        }
    }
}

/// Evaluates every constraint of the context theory and its ancestors.
/// Constraints over absent slots hold vacuously.
pub fn check_consistency(f: &Frame, kb: &KnowledgeBase) -> Frame {
    let mut out = f.clone();
    out.violations.clear();
    for theory in linearize(kb, &kb.context) {
        for c in &kb.theories[&theory].constraints {
            if violated(&c.form, f) && !out.violations.contains(&c.id) {
                out.violations.push(c.id.clone());
            }
        }
    }
    out.consistent = out.violations.is_empty();
    out
}

/// Fills unfilled schema slots from context defaults and re-checks
/// consistency. Defaults never change the frame weight.
pub fn complete_frame(
    f: &Frame,
    kb: &KnowledgeBase,
    schema: &FrameSchema,
    cfg: &FrameConfig,
) -> Frame {
    let mut out = f.clone();
    for slot in &schema.slots {
        if out.values.contains_key(&slot.name) {
            continue;
        }
        if let Some(value) = resolve_default(kb, &kb.context, &slot.name) {
            out.values.insert(
                slot.name.clone(),
                SlotValue {
                    value: value.to_string(),
                    confidence: cfg.default_confidence,
                    origin: Origin::Defaulted,
                    required: slot.required,
                },
            );
        }
    }
    check_consistency(&out, kb)
}

/// Consistent first, then more extracted required slots, higher weight and
/// more extracted slots.
pub fn frame_order(a: &Frame, b: &Frame) -> Ordering {
    b.consistent
        .cmp(&a.consistent)
        .then_with(|| b.extracted_required_count().cmp(&a.extracted_required_count()))
        .then_with(|| b.weight.total_cmp(&a.weight))
        .then_with(|| b.extracted_count().cmp(&a.extracted_count()))
}

pub fn select_best(frames: &[Frame], top_k: usize) -> Vec<Frame> {
    let mut out = frames.to_vec();
    out.sort_by(frame_order);
    out.truncate(top_k);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Predicate {
    pub attribute: String,
    pub value: String,
}

/// Conjunction of attribute equalities.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Query {
    pub predicates: Vec<Predicate>,
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.predicates.is_empty() {
            return f.write_str("TRUE");
        }
        let parts: Vec<String> = self
            .predicates
            .iter()
            .map(|p| format!("{}={:?}", p.attribute, p.value))
            .collect();
        f.write_str(&parts.join(" AND "))
    }
}

pub fn to_query(f: &Frame, schema: &FrameSchema) -> Result<Query, FrameError> {
    if !f.consistent {
        return Err(FrameError::InconsistentFrame(f.violations.clone()));
    }
    let predicates = schema
        .slots
        .iter()
        .filter(|s| !s.db_attribute.is_empty())
        .filter_map(|s| {
            f.values.get(&s.name).map(|v| Predicate {
                attribute: s.db_attribute.clone(),
                value: v.value.clone(),
            })
        })
        .collect();
    Ok(Query { predicates })
}
