//! Command-line surface. Every command prints one JSON document on stdout;
//! diagnostics go to stderr.
//!
//! Exit codes: 0 success, 1 resource or usage error, 2 no usable result
//! (no analysis at the threshold for `parse`, no consistent frame for
//! `query`).

use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::chunker::{dump_hypotheses, ArcLabel, ChunkEntry, HypothesisDump, MarkerOccurrence};
use crate::datastore::{load_table, Record};
use crate::eval::{load_gold, EvalReport};
use crate::frame::{load_kb, Frame, FrameSchema, Origin};
use crate::grammar::{load_grammar, validate_grammar, Grammar, Severity};
use crate::parser::{
    analyses, maximal_coverage, minimal_spans, parse, tokenize, unattached_constituents,
    ChartDump, Edge, ParseConfig,
};
use crate::pipeline::{analyze, evaluate_corpus, interpret, Analysis, PipelineConfig, Resources};

#[derive(Debug, Parser)]
#[command(name = "island-query", version, about = "Robust weighted island parsing of noisy requests into database queries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an utterance and print the selected analyses of the start category.
    Parse { input: String },
    /// Print markers, segments, chunks and ranked hypotheses.
    Chunk { input: String },
    /// Interpret an utterance into ranked frames and execute the best one.
    Query { input: String },
    /// Score the pipeline on a JSON-lines gold corpus.
    Eval { gold: PathBuf },
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[arg(long, global = true)]
    pub grammar: Option<PathBuf>,
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    #[arg(long, global = true)]
    pub kb: Option<PathBuf>,
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    /// Active context theory; defaults to the knowledge base's own.
    #[arg(long, global = true)]
    pub context: Option<String>,
    #[arg(long, global = true, default_value_t = 0.0)]
    pub threshold: f64,
    #[arg(long = "max-gap", global = true, default_value_t = 3)]
    pub max_gap: usize,
    #[arg(long = "top-k", global = true, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long = "show-chart", global = true)]
    pub show_chart: bool,
    #[arg(long = "show-lattice", global = true)]
    pub show_lattice: bool,
    #[arg(long = "score-defaults", global = true)]
    pub score_defaults: bool,
    #[arg(long = "wide-segments", global = true)]
    pub wide_segments: bool,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CliError(String);

impl CliError {
    fn new(msg: impl std::fmt::Display) -> Self {
        CliError(msg.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub exit: i32,
    /// Non-fatal diagnostics.
    pub warnings: Vec<String>,
}

impl RunConfig {
    fn check(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(CliError::new(format!("--threshold must be in [0, 1], got {}", self.threshold)));
        }
        if self.top_k == 0 {
            return Err(CliError::new("--top-k must be at least 1"));
        }
        Ok(())
    }

    fn parse_config(&self) -> ParseConfig {
        ParseConfig {
            max_gap: self.max_gap,
            threshold: self.threshold,
            ..ParseConfig::default()
        }
    }

    fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            parse: self.parse_config(),
            top_k: self.top_k,
            wide_segments: self.wide_segments,
            ..PipelineConfig::default()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(format!("{}: {e}", path.display())))
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::new(format!("missing --{flag}")))
}

fn grammar(cfg: &RunConfig, warnings: &mut Vec<String>) -> Result<Grammar, CliError> {
    let path = required(&cfg.grammar, "grammar")?;
    let g = load_grammar(&read(path)?).map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
    warnings.extend(
        validate_grammar(&g)
            .into_iter()
            .filter(|d| d.severity == Severity::Warning)
            .map(|d| d.to_string()),
    );
    Ok(g)
}

fn resources(cfg: &RunConfig, need_table: bool, warnings: &mut Vec<String>) -> Result<Resources, CliError> {
    let grammar = grammar(cfg, warnings)?;
    let schema_path = required(&cfg.schema, "schema")?;
    let schema = FrameSchema::from_json(&read(schema_path)?)
        .map_err(|e| CliError::new(format!("{}: {e}", schema_path.display())))?;
    schema.check_categories(&grammar.chunk_categories()).map_err(CliError::new)?;
    let kb_path = required(&cfg.kb, "kb")?;
    let mut kb = load_kb(&read(kb_path)?).map_err(|e| CliError::new(format!("{}: {e}", kb_path.display())))?;
    if let Some(ctx) = &cfg.context {
        kb = kb.with_context(ctx).map_err(CliError::new)?;
    }
    kb.check_slots(&schema).map_err(CliError::new)?;
    let table = match (&cfg.table, need_table) {
        (Some(p), _) => Some(load_table(p).map_err(CliError::new)?),
        (None, true) => return Err(CliError::new("missing --table")),
        (None, false) => None,
    };
    Ok(Resources {
        grammar,
        schema,
        kb,
        table,
    })
}

/// Positional input text, or stdin for `-`.
fn input_text(arg: &str) -> Result<String, CliError> {
    if arg == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::new(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        Ok(arg.to_string())
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct EdgeOut<'a> {
    id: usize,
    cat: &'a str,
    start: usize,
    end: usize,
    covered: Vec<usize>,
    weight: f64,
    rule: usize,
    children: &'a [usize],
    text: String,
}

fn edge_out<'a>(e: &'a Edge, chart: &crate::parser::Chart) -> EdgeOut<'a> {
    EdgeOut {
        id: e.id,
        cat: e.category.as_str(),
        start: e.span.start,
        end: e.span.end,
        covered: e.coverage.iter().collect(),
        weight: e.weight.value(),
        rule: e.rule_id,
        children: &e.children,
        text: chart.covered_text(e),
    }
}

#[derive(Serialize)]
struct ParseOut<'a> {
    input: &'a [String],
    category: &'a str,
    analyses: Vec<EdgeOut<'a>>,
    unattached: Vec<EdgeOut<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chart: Option<ChartDump<'a>>,
}

pub fn cmd_parse(cfg: &RunConfig, input: &str) -> Result<Outcome, CliError> {
    cfg.check()?;
    let mut warnings = Vec::new();
    let g = grammar(cfg, &mut warnings)?;
    let pcfg = cfg.parse_config();
    let chart = parse(&g, &tokenize(input), &pcfg).map_err(CliError::new)?;
    let selected = minimal_spans(&maximal_coverage(&analyses(&chart, &g.start, &pcfg)));
    let stray = unattached_constituents(&chart, &selected);
    let out = ParseOut {
        input: &chart.input,
        category: g.start.as_str(),
        analyses: selected.iter().map(|e| edge_out(e, &chart)).collect(),
        unattached: stray.iter().map(|e| edge_out(e, &chart)).collect(),
        chart: cfg.show_chart.then(|| chart.dump()),
    };
    Ok(Outcome {
        stdout: to_json(&out),
        exit: if selected.is_empty() { 2 } else { 0 },
        warnings,
    })
}

#[derive(Serialize)]
struct MarkerOut<'a> {
    marker: &'a str,
    role: crate::grammar::MarkerRole,
    start: usize,
    end: usize,
    weight: f64,
}

fn marker_out(m: &MarkerOccurrence) -> MarkerOut<'_> {
    MarkerOut {
        marker: m.marker.as_str(),
        role: m.role,
        start: m.span.start,
        end: m.span.end,
        weight: m.weight.value(),
    }
}

#[derive(Serialize)]
struct SegmentOut {
    kind: crate::chunker::SegmentKind,
    start: usize,
    end: usize,
}

#[derive(Serialize)]
struct ArcOut {
    from: usize,
    to: usize,
    #[serde(flatten)]
    label: ArcLabel,
}

#[derive(Serialize)]
struct LatticeOut {
    nodes: usize,
    arcs: Vec<ArcOut>,
    allowed_orders: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct ChunkOut<'a> {
    input: Vec<&'a str>,
    markers: Vec<MarkerOut<'a>>,
    segments: Vec<SegmentOut>,
    chunks: Vec<ChunkEntry<'a>>,
    #[serde(flatten)]
    hypotheses: HypothesisDump<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lattice: Option<LatticeOut>,
}

fn chunk_out(a: &Analysis, cfg: &RunConfig) -> String {
    let top = a.hypotheses.len().min(cfg.top_k);
    let lattice = cfg.show_lattice.then(|| LatticeOut {
        nodes: a.lattice.n + 1,
        arcs: a
            .lattice
            .arcs
            .iter()
            .map(|arc| ArcOut {
                from: arc.from,
                to: arc.to,
                label: arc.label,
            })
            .collect(),
        allowed_orders: a
            .lattice
            .allowed_orders
            .iter()
            .map(|o| {
                o.iter()
                    .map(|e| format!("{}{}", e.category, if e.optional { "?" } else { "" }))
                    .collect()
            })
            .collect(),
    });
    to_json(&ChunkOut {
        input: a.tokens.iter().map(|t| t.text.as_str()).collect(),
        markers: a.markers.iter().map(marker_out).collect(),
        segments: a
            .segments
            .iter()
            .map(|s| SegmentOut {
                kind: s.kind,
                start: s.span.start,
                end: s.span.end,
            })
            .collect(),
        chunks: a.chunks.iter().map(ChunkEntry::new).collect(),
        hypotheses: dump_hypotheses(&a.hypotheses[..top]),
        lattice,
    })
}

pub fn cmd_chunk(cfg: &RunConfig, input: &str) -> Result<Outcome, CliError> {
    cfg.check()?;
    let mut warnings = Vec::new();
    let g = grammar(cfg, &mut warnings)?;
    let a = analyze(&g, input, &cfg.pipeline_config()).map_err(CliError::new)?;
    Ok(Outcome {
        stdout: chunk_out(&a, cfg),
        exit: 0,
        warnings,
    })
}

#[derive(Serialize)]
struct SlotOut<'a> {
    slot: &'a str,
    value: &'a str,
    confidence: f64,
    origin: Origin,
}

#[derive(Serialize)]
struct FrameOut<'a> {
    weight: f64,
    consistent: bool,
    violations: &'a [String],
    slots: Vec<SlotOut<'a>>,
}

fn frame_out<'a>(f: &'a Frame, schema: &'a FrameSchema) -> FrameOut<'a> {
    FrameOut {
        weight: f.weight.value(),
        consistent: f.consistent,
        violations: &f.violations,
        slots: schema
            .slots
            .iter()
            .filter_map(|s| {
                f.values.get(&s.name).map(|v| SlotOut {
                    slot: &s.name,
                    value: &v.value,
                    confidence: v.confidence.value(),
                    origin: v.origin,
                })
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct BestOut<'a> {
    query: String,
    records: &'a [Record],
}

#[derive(Serialize)]
struct QueryOut<'a> {
    input: Vec<&'a str>,
    frames: Vec<FrameOut<'a>>,
    best: Option<BestOut<'a>>,
}

pub fn cmd_query(cfg: &RunConfig, input: &str) -> Result<Outcome, CliError> {
    cfg.check()?;
    let mut warnings = Vec::new();
    let res = resources(cfg, false, &mut warnings)?;
    let it = interpret(&res, input, &cfg.pipeline_config()).map_err(CliError::new)?;
    let out = QueryOut {
        input: it.analysis.tokens.iter().map(|t| t.text.as_str()).collect(),
        frames: it.frames.iter().map(|f| frame_out(f, &res.schema)).collect(),
        best: it.query.as_ref().map(|q| BestOut {
            query: q.to_string(),
            records: &it.records,
        }),
    };
    Ok(Outcome {
        stdout: to_json(&out),
        exit: if it.query.is_some() { 0 } else { 2 },
        warnings,
    })
}

pub fn cmd_eval(cfg: &RunConfig, gold_path: &Path) -> Result<Outcome, CliError> {
    cfg.check()?;
    let mut warnings = Vec::new();
    let res = resources(cfg, false, &mut warnings)?;
    let gold = load_gold(&read(gold_path)?).map_err(CliError::new)?;
    for (i, g) in gold.iter().enumerate() {
        if let Some(slot) = g.frame.keys().find(|s| res.schema.slot(s).is_none()) {
            return Err(CliError::new(format!("gold example {}: unknown slot {slot}", i + 1)));
        }
    }
    let report: EvalReport =
        evaluate_corpus(&res, &gold, &cfg.pipeline_config(), cfg.score_defaults).map_err(CliError::new)?;
    Ok(Outcome {
        stdout: to_json(&report),
        exit: 0,
        warnings,
    })
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Parse { input } => cmd_parse(&cli.run, &input_text(input)?),
        Command::Chunk { input } => cmd_chunk(&cli.run, &input_text(input)?),
        Command::Query { input } => cmd_query(&cli.run, &input_text(input)?),
        Command::Eval { gold } => cmd_eval(&cli.run, gold),
    }
}
