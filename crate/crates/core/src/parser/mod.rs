//! Robust island chart parsing: gap-tolerant bottom-up saturation over a
//! token sequence, with coverage accounting and the analysis-selection tools.

mod chart;
mod select;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::grammar::{CategoryId, Weight};

pub use chart::parse;
pub use select::{
    analyses, maximal_coverage, maximal_threshold, minimal_spans, ranking_order,
    unattached_constituents,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub text: String,
    pub index: usize,
}

const DISCARDED_PUNCTUATION: &[char] = &['.', ',', ';', ':', '?', '!', '"'];

/// Lowercases and splits on whitespace and the punctuation `. , ; : ? ! "`.
/// Apostrophes stay inside words, so elided forms remain single tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.to_lowercase()
        .split(|c: char| c.is_whitespace() || DISCARDED_PUNCTUATION.contains(&c))
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(index, s)| Token {
            text: s.to_string(),
            index,
        })
        .collect()
}

/// Half-open token interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Token indices actually consumed by terminals under an edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct CoverageSet(BTreeSet<usize>);

impl CoverageSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(&index)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn insert(&mut self, index: usize) {
        self.0.insert(index);
    }

    pub fn extend(&mut self, other: &CoverageSet) {
        self.0.extend(other.0.iter().copied());
    }
}

impl FromIterator<usize> for CoverageSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        CoverageSet(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub category: CategoryId,
    pub span: Span,
    pub coverage: CoverageSet,
    pub weight: Weight,
    pub rule_id: usize,
    /// Edges matched by the rule's non-terminal body elements, left to right.
    pub children: Vec<usize>,
}

impl Edge {
    /// Zero-width edges come from epsilon and negation-only derivations.
    pub fn is_epsilon(&self) -> bool {
        self.span.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub input: Vec<String>,
    pub edges: Vec<Edge>,
}

impl Chart {
    pub fn input_len(&self) -> usize {
        self.input.len()
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn edges_of<'a>(&'a self, category: &CategoryId) -> impl Iterator<Item = &'a Edge> + 'a {
        let category = category.clone();
        self.edges.iter().filter(move |e| e.category == category)
    }

    /// Edges of `category` starting at `start`, in id order.
    pub fn edges_at<'a>(
        &'a self,
        category: &CategoryId,
        start: usize,
    ) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges_of(category).filter(move |e| e.span.start == start)
    }

    /// Surface text of the covered tokens, space-joined.
    pub fn covered_text(&self, edge: &Edge) -> String {
        edge.coverage
            .iter()
            .map(|i| self.input[i].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn dump(&self) -> ChartDump<'_> {
        ChartDump {
            input: &self.input,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDump {
                    id: e.id,
                    cat: e.category.as_str(),
                    start: e.span.start,
                    end: e.span.end,
                    covered: e.coverage.iter().collect(),
                    weight: e.weight.value(),
                    rule: e.rule_id,
                    children: &e.children,
                })
                .collect(),
        }
    }
}

/// JSON shape of the `--show-chart` dump.
#[derive(Debug, Serialize)]
pub struct ChartDump<'a> {
    pub input: &'a [String],
    pub edges: Vec<EdgeDump<'a>>,
}

#[derive(Debug, Serialize)]
pub struct EdgeDump<'a> {
    pub id: usize,
    pub cat: &'a str,
    pub start: usize,
    pub end: usize,
    pub covered: Vec<usize>,
    pub weight: f64,
    pub rule: usize,
    pub children: &'a [usize],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseConfig {
    /// Maximum number of skipped tokens between consecutive body matches.
    pub max_gap: usize,
    /// Minimum coverage ratio for reported analyses.
    pub threshold: f64,
    pub max_edges: usize,
    /// Keep only Pareto-optimal edges per category and span. Disabling it is
    /// only useful for checking that pruning changes no selection result.
    pub prune: bool,
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig {
            max_gap: 3,
            threshold: 0.0,
            max_edges: 100_000,
            prune: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("edge budget of {0} exceeded")]
    EdgeBudgetExceeded(usize),
    #[error("input length is zero")]
    InputLenZero,
}
