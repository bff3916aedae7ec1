//! Semantic markers, segmentation, chunk extraction and the query
//! hypothesis lattice.

use std::cmp::Ordering;

use serde::Serialize;

use crate::grammar::{CategoryId, Grammar, MarkerRole, OrderRule, Weight};
use crate::parser::{analyses, maximal_coverage, minimal_spans, Chart, ParseConfig, Span, Token};

/// Name of the separator that splits an announcement from the query body.
pub const ANNOUNCEMENT_QUERY: &str = "announcement_query";

/// Weight of the empty hypothesis.
pub const DEFAULT_EPSILON_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkerOccurrence {
    pub marker: CategoryId,
    pub role: MarkerRole,
    pub span: Span,
    pub weight: Weight,
}

/// Every marker occurrence, keeping the longest pattern per marker and start
/// position. Sorted by start, then declaration order.
pub fn find_markers(g: &Grammar, tokens: &[Token]) -> Vec<MarkerOccurrence> {
    let n = tokens.len();
    let mut out = Vec::new();
    for start in 0..n {
        for decl in &g.markers {
            let longest = decl
                .patterns
                .iter()
                .filter(|p| {
                    start + p.len() <= n
                        && tokens[start..start + p.len()]
                            .iter()
                            .zip(p.iter())
                            .all(|(t, w)| &t.text == w)
                })
                .map(Vec::len)
                .max();
            if let Some(len) = longest {
                out.push(MarkerOccurrence {
                    marker: decl.name.clone(),
                    role: decl.role,
                    span: Span::new(start, start + len),
                    weight: decl.weight,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Announcement,
    QueryBody,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub span: Span,
}

/// Splits at the first announcement-query separator. The separator tokens
/// belong to no segment and an empty announcement is omitted.
pub fn segment(tokens: &[Token], occs: &[MarkerOccurrence]) -> Vec<Segment> {
    let n = tokens.len();
    let sep = occs
        .iter()
        .find(|o| o.role == MarkerRole::Separator && o.marker.as_str() == ANNOUNCEMENT_QUERY);
    match sep {
        None => vec![Segment {
            kind: SegmentKind::QueryBody,
            span: Span::new(0, n),
        }],
        Some(o) => {
            let mut out = Vec::new();
            if o.span.start > 0 {
                out.push(Segment {
                    kind: SegmentKind::Announcement,
                    span: Span::new(0, o.span.start),
                });
            }
            out.push(Segment {
                kind: SegmentKind::QueryBody,
                span: Span::new(o.span.end, n),
            });
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chunk {
    pub category: CategoryId,
    pub edge: usize,
    pub weight: Weight,
    pub span: Span,
    /// Covered tokens of the edge, space-joined.
    pub text: String,
}

/// Per chunk category: edges inside the segment that pass the threshold,
/// reduced to maximal coverage and then minimal span. Edges covering no
/// token never become chunks.
pub fn extract_chunks(
    chart: &Chart,
    seg: &Segment,
    chunk_cats: &[CategoryId],
    cfg: &ParseConfig,
) -> Vec<Chunk> {
    let mut out = Vec::new();
    for (rank, cat) in chunk_cats.iter().enumerate() {
        let inside: Vec<_> = analyses(chart, cat, cfg)
            .into_iter()
            .filter(|e| seg.span.contains(&e.span) && !e.coverage.is_empty())
            .collect();
        for e in minimal_spans(&maximal_coverage(&inside)) {
            out.push((
                rank,
                Chunk {
                    category: e.category.clone(),
                    edge: e.id,
                    weight: e.weight,
                    span: e.span,
                    text: chart.covered_text(&e),
                },
            ));
        }
    }
    out.sort_by_key(|(rank, c)| (c.span.start, c.span.end, *rank, c.edge));
    out.into_iter().map(|(_, c)| c).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum ArcLabel {
    /// Index into `HypothesisLattice::chunks`.
    Chunk(usize),
    /// Index into `HypothesisLattice::markers`.
    Marker(usize),
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub label: ArcLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisLattice {
    /// Nodes are the token positions `0..=n`.
    pub n: usize,
    pub arcs: Vec<Arc>,
    pub chunks: Vec<Chunk>,
    pub markers: Vec<MarkerOccurrence>,
    pub allowed_orders: Vec<OrderRule>,
}

pub fn build_lattice(
    chunks: &[Chunk],
    occs: &[MarkerOccurrence],
    orders: &[OrderRule],
    n: usize,
) -> HypothesisLattice {
    let mut arcs = Vec::new();
    for p in 0..n {
        arcs.push(Arc {
            from: p,
            to: p + 1,
            label: ArcLabel::Skip,
        });
    }
    for (i, c) in chunks.iter().enumerate() {
        if !c.span.is_empty() && c.span.end <= n {
            arcs.push(Arc {
                from: c.span.start,
                to: c.span.end,
                label: ArcLabel::Chunk(i),
            });
        }
    }
    for (i, o) in occs.iter().enumerate() {
        if !o.span.is_empty() && o.span.end <= n {
            arcs.push(Arc {
                from: o.span.start,
                to: o.span.end,
                label: ArcLabel::Marker(i),
            });
        }
    }
    arcs.sort_by_key(|a| (a.from, a.to));
    HypothesisLattice {
        n,
        arcs,
        chunks: chunks.to_vec(),
        markers: occs.to_vec(),
        allowed_orders: orders.to_vec(),
    }
}

impl HypothesisLattice {
    /// Number of distinct full paths from node 0 to node n.
    pub fn count_paths(&self) -> u128 {
        let mut ways = vec![0u128; self.n + 1];
        ways[0] = 1;
        for p in 0..self.n {
            for a in self.arcs.iter().filter(|a| a.from == p) {
                ways[a.to] += ways[p];
            }
        }
        ways[self.n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryHypothesis {
    pub chunks: Vec<Chunk>,
    pub weight: Weight,
    /// The first allowed order the chunk sequence satisfies; `None` for the
    /// fallback empty hypothesis.
    pub order_rule: Option<usize>,
}

impl QueryHypothesis {
    fn earliest_start(&self) -> usize {
        self.chunks.first().map_or(usize::MAX, |c| c.span.start)
    }
}

/// Positions reachable in each order after consuming a chunk of `cat`.
fn advance(orders: &[OrderRule], states: &[(usize, usize)], cat: &CategoryId) -> Vec<(usize, usize)> {
    let mut next = Vec::new();
    for &(o, pos) in states {
        let order = &orders[o];
        for (q, elem) in order.iter().enumerate().skip(pos) {
            if &elem.category == cat && !next.contains(&(o, q + 1)) {
                next.push((o, q + 1));
            }
            if !elem.optional {
                break;
            }
        }
    }
    next
}

fn accepting(orders: &[OrderRule], states: &[(usize, usize)]) -> Option<usize> {
    states
        .iter()
        .filter(|&&(o, pos)| orders[o][pos..].iter().all(|e| e.optional))
        .map(|&(o, _)| o)
        .min()
}

fn hypothesis_order(a: &QueryHypothesis, b: &QueryHypothesis) -> Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then_with(|| b.chunks.len().cmp(&a.chunks.len()))
        .then_with(|| a.earliest_start().cmp(&b.earliest_start()))
        .then_with(|| {
            let ka = a.chunks.iter().map(|c| (c.span, c.category.as_str()));
            let kb = b.chunks.iter().map(|c| (c.span, c.category.as_str()));
            ka.cmp(kb)
        })
        .then_with(|| a.order_rule.cmp(&b.order_rule))
}

/// Ranks every chunk combination along a lattice path that satisfies an
/// allowed order. Falls back to a single empty hypothesis of weight
/// `epsilon_weight` when nothing matches.
pub fn enumerate_hypotheses(
    lat: &HypothesisLattice,
    top_k: usize,
    epsilon_weight: Weight,
) -> Vec<QueryHypothesis> {
    let mut order_of: Vec<usize> = (0..lat.chunks.len())
        .filter(|&i| !lat.chunks[i].span.is_empty() && lat.chunks[i].span.end <= lat.n)
        .collect();
    order_of.sort_by_key(|&i| (lat.chunks[i].span.start, lat.chunks[i].span.end, i));

    let orders = &lat.allowed_orders;
    let initial: Vec<(usize, usize)> = (0..orders.len()).map(|o| (o, 0)).collect();
    let mut found = Vec::new();
    let mut chosen = Vec::new();
    walk(lat, &order_of, 0, &initial, &mut chosen, epsilon_weight, &mut found);

    if found.is_empty() {
        found.push(QueryHypothesis {
            chunks: Vec::new(),
            weight: epsilon_weight,
            order_rule: None,
        });
    }
    found.sort_by(hypothesis_order);
    found.truncate(top_k.max(1));
    found
}

fn walk(
    lat: &HypothesisLattice,
    sorted: &[usize],
    min_start: usize,
    states: &[(usize, usize)],
    chosen: &mut Vec<usize>,
    epsilon_weight: Weight,
    found: &mut Vec<QueryHypothesis>,
) {
    if let Some(o) = accepting(&lat.allowed_orders, states) {
        let chunks: Vec<Chunk> = chosen.iter().map(|&i| lat.chunks[i].clone()).collect();
        let weight = chunks
            .iter()
            .map(|c| c.weight)
            .reduce(Weight::min)
            .unwrap_or(epsilon_weight);
        found.push(QueryHypothesis {
            chunks,
            weight,
            order_rule: Some(o),
        });
    }
    for &i in sorted {
        let c = &lat.chunks[i];
        if c.span.start < min_start {
            continue;
        }
        let next = advance(&lat.allowed_orders, states, &c.category);
        if next.is_empty() {
            continue;
        }
        chosen.push(i);
        walk(lat, sorted, c.span.end, &next, chosen, epsilon_weight, found);
        chosen.pop();
    }
}

#[derive(Debug, Serialize)]
pub struct HypothesisDump<'a> {
    pub hypotheses: Vec<HypothesisEntry<'a>>,
}

#[derive(Debug, Serialize)]
pub struct HypothesisEntry<'a> {
    pub weight: f64,
    pub chunks: Vec<ChunkEntry<'a>>,
}

#[derive(Debug, Serialize)]
pub struct ChunkEntry<'a> {
    pub cat: &'a str,
    pub start: usize,
    pub end: usize,
    pub text: &'a str,
    pub weight: f64,
}

impl<'a> ChunkEntry<'a> {
    pub fn new(c: &'a Chunk) -> Self {
        ChunkEntry {
            cat: c.category.as_str(),
            start: c.span.start,
            end: c.span.end,
            text: &c.text,
            weight: c.weight.value(),
        }
    }
}

pub fn dump_hypotheses(hyps: &[QueryHypothesis]) -> HypothesisDump<'_> {
    HypothesisDump {
        hypotheses: hyps
            .iter()
            .map(|h| HypothesisEntry {
                weight: h.weight.value(),
                chunks: h.chunks.iter().map(ChunkEntry::new).collect(),
            })
            .collect(),
    }
}
