use std::collections::{BTreeMap, HashMap, HashSet};

use super::{Chart, CoverageSet, Edge, ParseConfig, ParseError, Span, Token};
use crate::grammar::{BodyElement, CategoryId, Grammar, Rule, Weight};

/// Negation depth per category: a category that negates `c` sits one stratum
/// above `c`. Stratification is guaranteed by grammar validation.
fn strata(g: &Grammar) -> HashMap<&CategoryId, usize> {
    let mut level: HashMap<&CategoryId, usize> =
        g.category_index.keys().map(|c| (c, 0)).collect();
    let bound = g.category_index.len() + 1;
    for _ in 0..bound {
        let mut changed = false;
        for rule in &g.rules {
            let need = rule_level(rule, &level);
            let cur = level.entry(&rule.lhs).or_insert(0);
            if need > *cur {
                *cur = need;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    level
}

fn rule_level(rule: &Rule, level: &HashMap<&CategoryId, usize>) -> usize {
    rule.body
        .iter()
        .map(|e| match e {
            BodyElement::NonTerminal { category, .. } => level.get(category).copied().unwrap_or(0),
            BodyElement::Negation(category) => level.get(category).copied().unwrap_or(0) + 1,
            _ => 0,
        })
        .max()
        .unwrap_or(0)
}

struct Candidate {
    rule: usize,
    span: Span,
    children: Vec<usize>,
    coverage: CoverageSet,
    weight: Weight,
}

impl Candidate {
    fn agenda_key(&self) -> (usize, usize, usize, &[usize]) {
        (self.span.start, self.rule, self.span.end, &self.children)
    }
}

struct Node {
    edge: Edge,
    alive: bool,
    parents: Vec<usize>,
}

struct Builder<'a> {
    g: &'a Grammar,
    tokens: Vec<&'a str>,
    cfg: &'a ParseConfig,
    nodes: Vec<Node>,
    /// Live edges by (category, start).
    by_start: HashMap<(&'a CategoryId, usize), Vec<usize>>,
    /// Live edges by (category, span).
    by_span: HashMap<(&'a CategoryId, Span), Vec<usize>>,
    /// Derivations already offered to the chart.
    tried: HashSet<(usize, Span, Vec<usize>, CoverageSet)>,
}

impl<'a> Builder<'a> {
    fn n(&self) -> usize {
        self.tokens.len()
    }

    fn node(&self, id: usize) -> &Edge {
        &self.nodes[id].edge
    }

    fn positions(&self, prev_end: Option<usize>) -> std::ops::RangeInclusive<usize> {
        match prev_end {
            None => 0..=self.n(),
            Some(e) => e..=(e + self.cfg.max_gap).min(self.n()),
        }
    }

    /// `~c` holds at `p` when no edge of `c` starts within the gap window.
    fn negation_holds(&self, category: &CategoryId, p: usize) -> bool {
        let last = (p + self.cfg.max_gap).min(self.n());
        !(p..=last).any(|s| {
            self.by_start
                .get(&(category, s))
                .is_some_and(|ids| !ids.is_empty())
        })
    }

    fn terminal_matches(&self, pattern: &[String], start: usize) -> bool {
        let end = start + pattern.len();
        end <= self.n()
            && self.tokens[start..end]
                .iter()
                .zip(pattern)
                .all(|(t, p)| *t == p.as_str())
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate(
        &self,
        rule: &Rule,
        idx: usize,
        first: Option<usize>,
        prev_end: Option<usize>,
        children: &mut Vec<usize>,
        coverage: &CoverageSet,
        weight: Weight,
        out: &mut Vec<Candidate>,
    ) {
        let Some(elem) = rule.body.get(idx) else {
            if let (Some(start), Some(end)) = (first, prev_end) {
                out.push(Candidate {
                    rule: rule.id,
                    span: Span::new(start, end),
                    children: children.clone(),
                    coverage: coverage.clone(),
                    weight,
                });
            }
            return;
        };
        for p in self.positions(prev_end) {
            let first = first.or(Some(p));
            match elem {
                BodyElement::NonTerminal { category, .. } => {
                    let Some(ids) = self.by_start.get(&(category, p)) else {
                        continue;
                    };
                    for &id in ids {
                        let child = self.node(id);
                        let mut cov = coverage.clone();
                        cov.extend(&child.coverage);
                        children.push(id);
                        self.enumerate(
                            rule,
                            idx + 1,
                            first,
                            Some(child.span.end),
                            children,
                            &cov,
                            weight.min(child.weight),
                            out,
                        );
                        children.pop();
                    }
                }
                BodyElement::Terminal(pattern) => {
                    if self.terminal_matches(pattern, p) {
                        let mut cov = coverage.clone();
                        for i in p..p + pattern.len() {
                            cov.insert(i);
                        }
                        self.enumerate(
                            rule,
                            idx + 1,
                            first,
                            Some(p + pattern.len()),
                            children,
                            &cov,
                            weight,
                            out,
                        );
                    }
                }
                BodyElement::Epsilon => {
                    self.enumerate(rule, idx + 1, first, Some(p), children, coverage, weight, out);
                }
                BodyElement::Negation(category) => {
                    if self.negation_holds(category, p) {
                        self.enumerate(rule, idx + 1, first, Some(p), children, coverage, weight, out);
                    }
                }
            }
        }
    }

    fn live(&self, category: &'a CategoryId, span: Span) -> &[usize] {
        self.by_span
            .get(&(category, span))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Whether the candidate is admitted, given the live edges of its span.
    fn admissible(&self, category: &'a CategoryId, c: &Candidate) -> bool {
        let same_span = self.live(category, c.span);
        if self.cfg.prune {
            !same_span.iter().any(|&id| {
                let e = self.node(id);
                e.coverage.len() >= c.coverage.len() && e.weight >= c.weight
            })
        } else {
            !same_span.iter().any(|&id| {
                let e = self.node(id);
                e.coverage == c.coverage && e.weight == c.weight
            })
        }
    }

    fn kill(&mut self, id: usize) {
        if !self.nodes[id].alive {
            return;
        }
        self.nodes[id].alive = false;
        let rule = &self.g.rules[self.nodes[id].edge.rule_id];
        let span = self.nodes[id].edge.span;
        if let Some(v) = self.by_start.get_mut(&(&rule.lhs, span.start)) {
            v.retain(|&x| x != id);
        }
        if let Some(v) = self.by_span.get_mut(&(&rule.lhs, span)) {
            v.retain(|&x| x != id);
        }
        let parents = std::mem::take(&mut self.nodes[id].parents);
        for p in parents {
            self.kill(p);
        }
    }

    fn insert(&mut self, c: Candidate) -> Result<bool, ParseError> {
        let category = &self.g.rules[c.rule].lhs;
        // A child pruned earlier in this round; the dominating edge yields
        // the replacement candidate next round.
        if c.children.iter().any(|&ch| !self.nodes[ch].alive) {
            return Ok(false);
        }
        if !self.admissible(category, &c) {
            return Ok(false);
        }
        if self.cfg.prune {
            let dominated: Vec<usize> = self
                .live(category, c.span)
                .iter()
                .copied()
                .filter(|&id| {
                    let e = self.node(id);
                    c.coverage.len() >= e.coverage.len() && c.weight >= e.weight
                })
                .collect();
            for id in dominated {
                self.kill(id);
            }
        }
        if self.nodes.len() >= self.cfg.max_edges {
            return Err(ParseError::EdgeBudgetExceeded(self.cfg.max_edges));
        }
        let id = self.nodes.len();
        for &child in &c.children {
            self.nodes[child].parents.push(id);
        }
        self.by_start.entry((category, c.span.start)).or_default().push(id);
        self.by_span.entry((category, c.span)).or_default().push(id);
        self.nodes.push(Node {
            edge: Edge {
                id,
                category: category.clone(),
                span: c.span,
                coverage: c.coverage,
                weight: c.weight,
                rule_id: c.rule,
                children: c.children,
            },
            alive: true,
            parents: Vec::new(),
        });
        Ok(true)
    }

    /// Runs rounds over `rules` until no new edge is admitted. Candidates of
    /// one round are inserted in agenda order: span start, rule id, span end.
    fn saturate(&mut self, rules: &[&'a Rule]) -> Result<(), ParseError> {
        loop {
            let mut candidates = Vec::new();
            for rule in rules {
                let mut children = Vec::new();
                self.enumerate(
                    rule,
                    0,
                    None,
                    None,
                    &mut children,
                    &CoverageSet::new(),
                    rule.static_weight,
                    &mut candidates,
                );
            }
            candidates.retain(|c| {
                self.tried
                    .insert((c.rule, c.span, c.children.clone(), c.coverage.clone()))
            });
            if candidates.is_empty() {
                return Ok(());
            }
            candidates.sort_by(|a, b| a.agenda_key().cmp(&b.agenda_key()));
            let mut progressed = false;
            for c in candidates {
                progressed |= self.insert(c)?;
            }
            if !progressed {
                return Ok(());
            }
        }
    }

    fn finish(self) -> Chart {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        for node in self.nodes.iter().filter(|n| n.alive) {
            let next = remap.len();
            remap.insert(node.edge.id, next);
        }
        let edges = self
            .nodes
            .into_iter()
            .filter(|n| n.alive)
            .map(|n| {
                let mut e = n.edge;
                e.id = remap[&e.id];
                e.children = e.children.iter().map(|c| remap[c]).collect();
                e
            })
            .collect();
        Chart {
            input: self.tokens.iter().map(|t| t.to_string()).collect(),
            edges,
        }
    }
}

/// Saturates the chart for `tokens` under `g`.
///
/// Rules are evaluated stratum by stratum: a rule negating `c` only runs once
/// every rule that can build `c` is saturated, so `~c` is a stable
/// zero-width test against the finished edges of `c`.
pub fn parse(g: &Grammar, tokens: &[Token], cfg: &ParseConfig) -> Result<Chart, ParseError> {
    let levels = strata(g);
    let mut by_level: BTreeMap<usize, Vec<&Rule>> = BTreeMap::new();
    for rule in &g.rules {
        by_level.entry(rule_level(rule, &levels)).or_default().push(rule);
    }
    let mut b = Builder {
        g,
        tokens: tokens.iter().map(|t| t.text.as_str()).collect(),
        cfg,
        nodes: Vec::new(),
        by_start: HashMap::new(),
        by_span: HashMap::new(),
        tried: HashSet::new(),
    };
    let mut active: Vec<&Rule> = Vec::new();
    for (_, rules) in by_level {
        active.extend(rules);
        active.sort_by_key(|r| r.id);
        b.saturate(&active)?;
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::load_grammar;
    use crate::parser::tokenize;

    fn cat(s: &str) -> CategoryId {
        CategoryId::parse(s).unwrap()
    }

    fn chart(src: &str, input: &str, max_gap: usize) -> Chart {
        let g = load_grammar(src).unwrap();
        let cfg = ParseConfig {
            max_gap,
            ..ParseConfig::default()
        };
        parse(&g, &tokenize(input), &cfg).unwrap()
    }

    const AB: &str = "start s\nterm a 0.5 : \"a\"\nterm b 0.9 : \"b\"\nrule s -> a b";

    #[test]
    fn gap_of_one_is_bridged() {
        let c = chart(AB, "a x b", 1);
        let s: Vec<&Edge> = c.edges_of(&cat("s")).collect();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].span, Span::new(0, 3));
        assert_eq!(s[0].coverage.iter().collect::<Vec<_>>(), [0, 2]);
        assert_eq!(s[0].weight.value(), 0.5);
        assert_eq!(s[0].children.len(), 2);
    }

    #[test]
    fn gap_exceeding_max_gap_blocks() {
        let c = chart(AB, "a x b", 0);
        assert_eq!(c.edges_of(&cat("s")).count(), 0);
        assert_eq!(c.edges.len(), 2);
    }

    #[test]
    fn negation_of_absent_category() {
        let c = chart(
            "start s\nterm a 0.5 : \"a\"\nrule s -> ~b a\nterm b 0.9 : \"b\"",
            "a",
            3,
        );
        let s: Vec<&Edge> = c.edges_of(&cat("s")).collect();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].weight.value(), 0.5);
        assert_eq!(s[0].span, Span::new(0, 1));
        assert_eq!(s[0].coverage.iter().collect::<Vec<_>>(), [0]);
    }

    #[test]
    fn negation_blocked_by_nearby_edge() {
        let src = "start s\nterm a 0.5 : \"a\"\nrule s -> ~b a\nterm b 0.9 : \"b\"";
        // b starts within the window of every admissible position for ~b.
        let c = chart(src, "a b", 3);
        assert_eq!(c.edges_of(&cat("s")).count(), 0);
        // With a zero-width window only a b directly at p blocks.
        let c = chart(src, "a b", 0);
        assert_eq!(c.edges_of(&cat("s")).count(), 1);
    }

    #[test]
    fn negation_sees_derived_categories() {
        // `c` is only derivable through a rule, and `s` negates it.
        let src = "start s\nterm a 1 : \"a\"\nterm b 1 : \"b\"\nrule c -> b\nrule s -> a ~c";
        let c1 = chart(src, "a b", 0);
        assert_eq!(c1.edges_of(&cat("s")).count(), 0);
        let c2 = chart(src, "a a", 0);
        assert!(c2.edges_of(&cat("s")).count() > 0);
    }

    #[test]
    fn epsilon_edges_are_zero_width() {
        let c = chart("start s\nrule s 0.3 -> eps", "x y", 0);
        let s: Vec<&Edge> = c.edges_of(&cat("s")).collect();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|e| e.is_epsilon() && e.coverage.is_empty()));
        assert!(s.iter().all(|e| e.weight.value() == 0.3));
    }

    #[test]
    fn inline_terminals_count_toward_coverage() {
        let c = chart(
            "start s\nterm n 0.7 : \"dupont\"\nrule s 0.9 -> \"de\" n",
            "numéro de dupont",
            0,
        );
        let s: Vec<&Edge> = c.edges_of(&cat("s")).collect();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].coverage.iter().collect::<Vec<_>>(), [1, 2]);
        assert_eq!(s[0].weight.value(), 0.7);
        assert_eq!(s[0].children.len(), 1);
    }

    #[test]
    fn pruning_keeps_better_late_derivation() {
        // Same span for `s`: directly from x (0.3) and, one round later,
        // through y -> z (0.9). `t` depends on `s` and must be rebuilt.
        let src = "start t\nterm x 0.3 : \"w\"\nterm z 0.9 : \"w\"\nrule y -> z\nrule s -> x\nrule s -> y\nrule t -> s";
        let c = chart(src, "w", 0);
        let s: Vec<&Edge> = c.edges_of(&cat("s")).collect();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].weight.value(), 0.9);
        let t: Vec<&Edge> = c.edges_of(&cat("t")).collect();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].weight.value(), 0.9);
        // Every child id refers to a retained edge.
        for e in &c.edges {
            for &ch in &e.children {
                assert!(ch < c.edges.len());
            }
        }
    }

    #[test]
    fn unary_cycles_terminate() {
        let c = chart("start a\nterm t 0.5 : \"w\"\nrule a -> b\nrule b -> a\nrule a -> t", "w", 0);
        assert_eq!(c.edges_of(&cat("a")).count(), 1);
        assert_eq!(c.edges_of(&cat("b")).count(), 1);
    }

    #[test]
    fn edge_budget() {
        let g = load_grammar(AB).unwrap();
        let cfg = ParseConfig {
            max_edges: 2,
            ..ParseConfig::default()
        };
        assert_eq!(
            parse(&g, &tokenize("a b"), &cfg),
            Err(ParseError::EdgeBudgetExceeded(2))
        );
    }

    #[test]
    fn deterministic_ids() {
        let src = include_str!("../../fixtures/phonebook.grammar");
        let g = load_grammar(src).unwrap();
        let toks = tokenize("euh j'aimerais le numéro de dupont à lausanne");
        let a = parse(&g, &toks, &ParseConfig::default()).unwrap();
        let b = parse(&g, &toks, &ParseConfig::default()).unwrap();
        assert_eq!(a, b);
        for (i, e) in a.edges.iter().enumerate() {
            assert_eq!(e.id, i);
        }
    }

    #[test]
    fn candidate_whose_child_was_pruned_in_the_same_round() {
        let c = chart(
            "start s\nterm u 0.30 : \"a a\" | \"c\"\nrule s 0.40 -> \"a\" p\nrule p -> ~q\n\
             rule p 0.30 -> eps\nrule p 0.70 -> p u\nrule q -> \"d\" u",
            "c",
            1,
        );
        for e in &c.edges {
            assert!(e.children.iter().all(|&ch| ch < e.id));
        }
        let p: Vec<&Edge> = c.edges_of(&cat("p")).collect();
        assert!(p.iter().any(|e| e.span == Span::new(0, 1) && e.weight == Weight::new(0.3).unwrap()));
    }
}
