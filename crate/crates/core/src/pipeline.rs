//! End-to-end wiring: utterance -> chart -> chunks -> hypotheses -> frames ->
//! database records.

use crate::chunker::{
    build_lattice, enumerate_hypotheses, extract_chunks, find_markers, segment, Chunk,
    HypothesisLattice, MarkerOccurrence, QueryHypothesis, Segment, SegmentKind,
};
use crate::datastore::{execute, DataError, Record, Table};
use crate::eval::{evaluate, EvalError, EvalReport, GoldExample};
use crate::frame::{
    complete_frame, frames_from_hypotheses, select_best, to_query, Frame, FrameConfig,
    FrameError, FrameSchema, KnowledgeBase, Query,
};
use crate::grammar::Grammar;
use crate::parser::{tokenize, Chart, ParseConfig, ParseError, Span, Token};

/// Hypotheses turned into frames before frame ranking. Kept well above the
/// display `top_k` so that fuller hypotheses with slightly lower weight still
/// reach frame selection.
pub const HYPOTHESIS_BEAM: usize = 64;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub parse: ParseConfig,
    pub frame: FrameConfig,
    pub top_k: usize,
    /// Extract chunks from the whole utterance, not only the query body.
    pub wide_segments: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            parse: ParseConfig::default(),
            frame: FrameConfig::default(),
            top_k: 5,
            wide_segments: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub tokens: Vec<Token>,
    pub chart: Chart,
    pub markers: Vec<MarkerOccurrence>,
    pub segments: Vec<Segment>,
    /// Segment chunks were searched in.
    pub search: Segment,
    pub chunks: Vec<Chunk>,
    pub lattice: HypothesisLattice,
    /// Ranked, up to `HYPOTHESIS_BEAM`.
    pub hypotheses: Vec<QueryHypothesis>,
}

/// Parsing, chunking and hypothesis ranking for one utterance.
pub fn analyze(g: &Grammar, text: &str, cfg: &PipelineConfig) -> Result<Analysis, PipelineError> {
    let tokens = tokenize(text);
    let chart = crate::parser::parse(g, &tokens, &cfg.parse)?;
    let markers = find_markers(g, &tokens);
    let segments = segment(&tokens, &markers);
    let search = if cfg.wide_segments {
        Segment {
            kind: SegmentKind::Other,
            span: Span::new(0, tokens.len()),
        }
    } else {
        segments
            .iter()
            .find(|s| s.kind == SegmentKind::QueryBody)
            .cloned()
            .expect("segmentation always yields a query body")
    };
    let chunks = extract_chunks(&chart, &search, &g.chunk_categories(), &cfg.parse);
    let lattice = build_lattice(&chunks, &markers, &g.orders, tokens.len());
    let hypotheses = enumerate_hypotheses(&lattice, HYPOTHESIS_BEAM, cfg.frame.epsilon_weight);
    Ok(Analysis {
        tokens,
        chart,
        markers,
        segments,
        search,
        chunks,
        lattice,
        hypotheses,
    })
}

pub struct Resources {
    pub grammar: Grammar,
    pub schema: FrameSchema,
    pub kb: KnowledgeBase,
    pub table: Option<Table>,
}

#[derive(Debug, Clone)]
pub struct Interpretation {
    pub analysis: Analysis,
    /// Completed, consistency-checked frames, best first, up to `top_k`.
    pub frames: Vec<Frame>,
    /// Query of the best frame when that frame is consistent.
    pub query: Option<Query>,
    pub records: Vec<Record>,
}

impl Interpretation {
    pub fn best(&self) -> Option<&Frame> {
        self.frames.first()
    }
}

/// Ranks completed frames for all beam hypotheses.
pub fn rank_frames(
    hyps: &[QueryHypothesis],
    res: &Resources,
    cfg: &FrameConfig,
    top_k: usize,
) -> Result<Vec<Frame>, PipelineError> {
    let frames: Vec<Frame> = frames_from_hypotheses(hyps, &res.schema, cfg)?
        .iter()
        .map(|f| complete_frame(f, &res.kb, &res.schema, cfg))
        .collect();
    Ok(select_best(&frames, top_k))
}

pub fn interpret(
    res: &Resources,
    text: &str,
    cfg: &PipelineConfig,
) -> Result<Interpretation, PipelineError> {
    let analysis = analyze(&res.grammar, text, cfg)?;
    let frames = rank_frames(&analysis.hypotheses, res, &cfg.frame, cfg.top_k.max(1))?;
    let (query, records) = match frames.first() {
        Some(best) if best.consistent => {
            let q = to_query(best, &res.schema)?;
            let records = match &res.table {
                Some(t) => execute(&q, t)?,
                None => Vec::new(),
            };
            (Some(q), records)
        }
        _ => (None, Vec::new()),
    };
    Ok(Interpretation {
        analysis,
        frames,
        query,
        records,
    })
}

/// Runs the frame pipeline on every gold utterance and scores the best
/// frame of each.
pub fn evaluate_corpus(
    res: &Resources,
    gold: &[GoldExample],
    cfg: &PipelineConfig,
    score_defaults: bool,
) -> Result<EvalReport, PipelineError> {
    let mut predictions = Vec::with_capacity(gold.len());
    for g in gold {
        let analysis = analyze(&res.grammar, &g.utterance, cfg)?;
        let best = rank_frames(&analysis.hypotheses, res, &cfg.frame, 1)?
            .into_iter()
            .next()
            .unwrap_or_else(|| Frame {
                values: Default::default(),
                weight: cfg.frame.epsilon_weight,
                consistent: true,
                violations: Vec::new(),
            });
        predictions.push((g.utterance.clone(), best));
    }
    Ok(evaluate(&predictions, gold, score_defaults)?)
}

