use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::{Chart, Edge, ParseConfig, ParseError};
use crate::grammar::CategoryId;

/// Coverage desc, weight desc, span length asc, id asc.
pub fn ranking_order(a: &Edge, b: &Edge) -> Ordering {
    b.coverage
        .len()
        .cmp(&a.coverage.len())
        .then_with(|| b.weight.total_cmp(&a.weight))
        .then_with(|| a.span.len().cmp(&b.span.len()))
        .then_with(|| a.id.cmp(&b.id))
}

fn coverage_ratio(e: &Edge, input_len: usize) -> f64 {
    e.coverage.len() as f64 / input_len as f64
}

/// Edges of `category` reaching the coverage threshold, best first.
pub fn analyses(chart: &Chart, category: &CategoryId, cfg: &ParseConfig) -> Vec<Edge> {
    let n = chart.input_len();
    if n == 0 {
        return Vec::new();
    }
    let mut out: Vec<Edge> = chart
        .edges_of(category)
        .filter(|e| coverage_ratio(e, n) >= cfg.threshold)
        .cloned()
        .collect();
    out.sort_by(ranking_order);
    out
}

pub fn maximal_coverage(es: &[Edge]) -> Vec<Edge> {
    let Some(best) = es.iter().map(|e| e.coverage.len()).max() else {
        return Vec::new();
    };
    es.iter()
        .filter(|e| e.coverage.len() == best)
        .cloned()
        .collect()
}

pub fn minimal_spans(es: &[Edge]) -> Vec<Edge> {
    let Some(best) = es.iter().map(|e| e.span.len()).min() else {
        return Vec::new();
    };
    es.iter().filter(|e| e.span.len() == best).cloned().collect()
}

/// Edges attaining the highest coverage ratio over an input of `input_len`.
pub fn maximal_threshold(es: &[Edge], input_len: usize) -> Result<Vec<Edge>, ParseError> {
    if es.is_empty() {
        return Ok(Vec::new());
    }
    if input_len == 0 {
        return Err(ParseError::InputLenZero);
    }
    let best = es
        .iter()
        .map(|e| coverage_ratio(e, input_len))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(es
        .iter()
        .filter(|e| coverage_ratio(e, input_len) == best)
        .cloned()
        .collect())
}

/// Non-epsilon edges that no root reaches through children links, ordered
/// by span start then id.
pub fn unattached_constituents(chart: &Chart, roots: &[Edge]) -> Vec<Edge> {
    let mut attached = BTreeSet::new();
    let mut stack: Vec<usize> = roots.iter().map(|e| e.id).collect();
    while let Some(id) = stack.pop() {
        if attached.insert(id) {
            stack.extend(chart.edge(id).children.iter().copied());
        }
    }
    let mut out: Vec<Edge> = chart
        .edges
        .iter()
        .filter(|e| !e.is_epsilon() && !attached.contains(&e.id))
        .cloned()
        .collect();
    out.sort_by_key(|e| (e.span.start, e.id));
    out
}
