//! Weighted grammar model: categories, rules, semantic markers and the
//! sentence-level chunk orders, plus the line-oriented grammar DSL.

mod dsl;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use dsl::{load_grammar, render_grammar};
pub use validate::{validate_grammar, Diagnostic, Severity};

/// A confidence value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Weight(f64);

#[derive(Debug, Clone, PartialEq, Error)]
#[error("weight out of range: {0}")]
pub struct WeightOutOfRange(pub f64);

impl Weight {
    pub const ONE: Weight = Weight(1.0);
    pub const ZERO: Weight = Weight(0.0);

    pub fn new(value: f64) -> Result<Self, WeightOutOfRange> {
        if (0.0..=1.0).contains(&value) {
            Ok(Weight(value))
        } else {
            Err(WeightOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Total order; NaN cannot occur since construction rejects it.
    pub fn total_cmp(&self, other: &Weight) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }

    pub fn min(self, other: Weight) -> Weight {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cannot combine an empty list of weights")]
pub struct EmptyList;

/// Min-combination of constituent confidences.
pub fn combine_weights(ws: &[Weight]) -> Result<Weight, EmptyList> {
    let (first, rest) = ws.split_first().ok_or(EmptyList)?;
    Ok(rest.iter().fold(*first, |acc, w| acc.min(*w)))
}

/// Name of a grammar category or semantic marker.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct CategoryId(String);

impl CategoryId {
    /// Accepts ASCII identifiers starting with a letter.
    pub fn parse(name: &str) -> Option<Self> {
        let mut chars = name.chars();
        let first = chars.next()?;
        if !first.is_ascii_alphabetic() {
            return None;
        }
        if chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
            Some(CategoryId(name.to_string()))
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BodyElement {
    NonTerminal { category: CategoryId, head: bool },
    Terminal(Vec<String>),
    Negation(CategoryId),
    Epsilon,
}

impl BodyElement {
    /// Category referenced by this element, if any.
    pub fn category(&self) -> Option<&CategoryId> {
        match self {
            BodyElement::NonTerminal { category, .. } | BodyElement::Negation(category) => {
                Some(category)
            }
            _ => None,
        }
    }
}

/// Which declaration produced a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleOrigin {
    Term,
    Rule,
    /// Index into `Grammar::markers`.
    Marker(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: usize,
    pub lhs: CategoryId,
    pub body: Vec<BodyElement>,
    pub static_weight: Weight,
    pub is_preterminal: bool,
    /// False when `static_weight` is the 1.0 default.
    pub explicit_weight: bool,
    pub origin: RuleOrigin,
}

impl Rule {
    pub fn has_negation(&self) -> bool {
        self.body
            .iter()
            .any(|e| matches!(e, BodyElement::Negation(_)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerRole {
    Separator,
    Introducer,
}

impl fmt::Display for MarkerRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarkerRole::Separator => "separator",
            MarkerRole::Introducer => "introducer",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerDecl {
    pub role: MarkerRole,
    pub name: CategoryId,
    pub patterns: Vec<Vec<String>>,
    pub weight: Weight,
}

/// One element of a sentence-level chunk order; optional elements may be
/// omitted from a hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderElement {
    pub category: CategoryId,
    pub optional: bool,
}

pub type OrderRule = Vec<OrderElement>;

#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    pub rules: Vec<Rule>,
    pub markers: Vec<MarkerDecl>,
    pub start: CategoryId,
    pub orders: Vec<OrderRule>,
    pub category_index: BTreeMap<CategoryId, Vec<usize>>,
}

impl Grammar {
    /// Assembles a grammar, renumbering rules in list order and rebuilding
    /// the category index.
    pub fn new(
        mut rules: Vec<Rule>,
        markers: Vec<MarkerDecl>,
        start: CategoryId,
        orders: Vec<OrderRule>,
    ) -> Self {
        let mut category_index: BTreeMap<CategoryId, Vec<usize>> = BTreeMap::new();
        for (id, rule) in rules.iter_mut().enumerate() {
            rule.id = id;
            category_index.entry(rule.lhs.clone()).or_default().push(id);
        }
        Grammar {
            rules,
            markers,
            start,
            orders,
            category_index,
        }
    }

    pub fn rules_for(&self, category: &CategoryId) -> &[usize] {
        self.category_index
            .get(category)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn is_defined(&self, category: &CategoryId) -> bool {
        self.category_index.contains_key(category)
    }

    pub fn marker(&self, name: &str) -> Option<&MarkerDecl> {
        self.markers.iter().find(|m| m.name.as_str() == name)
    }

    /// Categories named in `order` lines, in first-mention order.
    pub fn chunk_categories(&self) -> Vec<CategoryId> {
        let mut out: Vec<CategoryId> = Vec::new();
        for elem in self.orders.iter().flatten() {
            if !out.contains(&elem.category) {
                out.push(elem.category.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid grammar: {}", join_messages(.0))]
    Validation(Vec<Diagnostic>),
}

fn join_messages(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.message.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(v: f64) -> Weight {
        Weight::new(v).unwrap()
    }

    #[test]
    fn combine_takes_minimum() {
        assert_eq!(combine_weights(&[w(0.7), w(0.4), w(0.9)]), Ok(w(0.4)));
        assert_eq!(combine_weights(&[w(1.0)]), Ok(w(1.0)));
        assert_eq!(combine_weights(&[w(0.3), w(0.3)]), Ok(w(0.3)));
        assert_eq!(combine_weights(&[]), Err(EmptyList));
    }

    #[test]
    fn weight_range() {
        assert!(Weight::new(1.5).is_err());
        assert!(Weight::new(-0.1).is_err());
        assert!(Weight::new(f64::NAN).is_err());
        assert!(Weight::new(0.0).is_ok());
    }

    #[test]
    fn category_identifiers() {
        assert!(CategoryId::parse("person_name").is_some());
        assert!(CategoryId::parse("a1").is_some());
        assert!(CategoryId::parse("1a").is_none());
        assert!(CategoryId::parse("_a").is_none());
        assert!(CategoryId::parse("").is_none());
        assert!(CategoryId::parse("a-b").is_none());
    }

    fn weights() -> impl Strategy<Value = Vec<Weight>> {
        prop::collection::vec((0.0f64..=1.0).prop_map(w), 1..12)
    }

    proptest! {
        #[test]
        fn min_semilattice_laws(a in weights(), b in weights()) {
            let ca = combine_weights(&a).unwrap();
            let cb = combine_weights(&b).unwrap();
            // idempotent
            let doubled: Vec<Weight> = a.iter().chain(a.iter()).copied().collect();
            prop_assert_eq!(combine_weights(&doubled).unwrap(), ca);
            // commutative
            let mut rev = a.clone();
            rev.reverse();
            prop_assert_eq!(combine_weights(&rev).unwrap(), ca);
            // associative over concatenation
            let ab: Vec<Weight> = a.iter().chain(b.iter()).copied().collect();
            prop_assert_eq!(combine_weights(&ab).unwrap(), combine_weights(&[ca, cb]).unwrap());
            // lower bound
            prop_assert!(a.iter().all(|x| ca <= *x));
        }
    }
}
