use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::{BodyElement, CategoryId, Grammar, RuleOrigin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
        }
    }

    pub fn warning(message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.severity {
            Severity::Error => write!(f, "error: {}", self.message),
            Severity::Warning => write!(f, "warning: {}", self.message),
        }
    }
}

/// Collects every invariant violation of `g`. An empty result means the
/// grammar is well formed; warnings alone do not make it invalid.
pub fn validate_grammar(g: &Grammar) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    if !g.is_defined(&g.start) {
        diags.push(Diagnostic::error(format!("undefined start category {}", g.start)));
    }

    let mut seen_markers = BTreeSet::new();
    for m in &g.markers {
        if !seen_markers.insert(&m.name) {
            diags.push(Diagnostic::error(format!("duplicate marker {}", m.name)));
        }
        if m.patterns.is_empty() || m.patterns.iter().any(Vec::is_empty) {
            diags.push(Diagnostic::error(format!("marker {} has an empty pattern", m.name)));
        }
    }

    for (cat, ids) in &g.category_index {
        let from_marker = ids
            .iter()
            .any(|&i| matches!(g.rules[i].origin, RuleOrigin::Marker(_)));
        let from_rules = ids
            .iter()
            .any(|&i| !matches!(g.rules[i].origin, RuleOrigin::Marker(_)));
        if from_marker && from_rules {
            diags.push(Diagnostic::error(format!(
                "{cat} is declared both as a marker and as a category"
            )));
        }
    }

    let mut undefined: Vec<&CategoryId> = Vec::new();
    for rule in &g.rules {
        if rule.body.is_empty() {
            diags.push(Diagnostic::error(format!("rule {} has an empty body", rule.id)));
        }
        let heads = rule
            .body
            .iter()
            .filter(|e| matches!(e, BodyElement::NonTerminal { head: true, .. }))
            .count();
        if heads > 1 {
            diags.push(Diagnostic::error(format!(
                "rule {} has more than one head element",
                rule.id
            )));
        }
        for elem in &rule.body {
            match elem {
                BodyElement::Terminal(p) if p.is_empty() => diags.push(Diagnostic::error(
                    format!("rule {} has an empty terminal pattern", rule.id),
                )),
                _ => {}
            }
            if let Some(c) = elem.category() {
                if !g.is_defined(c) && !undefined.contains(&c) {
                    undefined.push(c);
                }
            }
        }
        if rule.is_preterminal {
            if !rule.body.iter().all(|e| matches!(e, BodyElement::Terminal(_))) {
                diags.push(Diagnostic::error(format!(
                    "pre-terminal rule {} for {} has a non-terminal body element",
                    rule.id, rule.lhs
                )));
            }
            if !rule.explicit_weight {
                diags.push(Diagnostic::error(format!(
                    "pre-terminal rule {} for {} has no explicit weight",
                    rule.id, rule.lhs
                )));
            }
        }
    }
    for elem in g.orders.iter().flatten() {
        if !g.is_defined(&elem.category) && !undefined.contains(&&elem.category) {
            undefined.push(&elem.category);
        }
    }
    for c in undefined {
        diags.push(Diagnostic::error(format!("undefined category {c}")));
    }

    for c in negation_cycles(g) {
        diags.push(Diagnostic::error(format!("negation cycle through {c}")));
    }

    for c in unreachable(g) {
        diags.push(Diagnostic::warning(format!("unreachable: {c}")));
    }

    diags
}

/// Dependency edges lhs -> referenced category, flagged when negated.
fn dependency_graph(g: &Grammar) -> BTreeMap<&CategoryId, Vec<(&CategoryId, bool)>> {
    let mut graph: BTreeMap<&CategoryId, Vec<(&CategoryId, bool)>> = BTreeMap::new();
    for rule in &g.rules {
        let out = graph.entry(&rule.lhs).or_default();
        for elem in &rule.body {
            match elem {
                BodyElement::NonTerminal { category, .. } => out.push((category, false)),
                BodyElement::Negation(category) => out.push((category, true)),
                _ => {}
            }
        }
    }
    graph
}

fn reaches<'a>(
    graph: &BTreeMap<&'a CategoryId, Vec<(&'a CategoryId, bool)>>,
    from: &'a CategoryId,
    target: &CategoryId,
) -> bool {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        if c == target {
            return true;
        }
        if !seen.insert(c) {
            continue;
        }
        for (next, _) in graph.get(c).into_iter().flatten() {
            queue.push_back(next);
        }
    }
    false
}

/// Categories whose rules negate something that depends back on them.
fn negation_cycles(g: &Grammar) -> Vec<&CategoryId> {
    let graph = dependency_graph(g);
    let mut out = Vec::new();
    for (&lhs, deps) in &graph {
        let cyclic = deps
            .iter()
            .any(|&(target, negated)| negated && reaches(&graph, target, lhs));
        if cyclic {
            out.push(lhs);
        }
    }
    out
}

/// Categories declared by `term`/`rule` that cannot be reached from the start
/// category or from any chunk order.
fn unreachable(g: &Grammar) -> Vec<&CategoryId> {
    let graph = dependency_graph(g);
    let mut seen: BTreeSet<&CategoryId> = BTreeSet::new();
    let mut queue: VecDeque<&CategoryId> = VecDeque::new();
    queue.push_back(&g.start);
    for elem in g.orders.iter().flatten() {
        queue.push_back(&elem.category);
    }
    while let Some(c) = queue.pop_front() {
        if !seen.insert(c) {
            continue;
        }
        for (next, _) in graph.get(c).into_iter().flatten() {
            queue.push_back(next);
        }
    }
    g.category_index
        .iter()
        .filter(|(c, ids)| {
            !seen.contains(c)
                && ids
                    .iter()
                    .all(|&i| !matches!(g.rules[i].origin, RuleOrigin::Marker(_)))
        })
        .map(|(c, _)| c)
        .collect()
}
