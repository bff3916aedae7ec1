//! Robust weighted island parsing and query-frame generation for noisy
//! natural-language requests.
//!
//! The pipeline tokenizes an utterance, saturates a gap-tolerant chart under a
//! weighted grammar, locates semantic markers to isolate the query body,
//! extracts weighted chunks, ranks chunk combinations through a hypothesis
//! lattice, and turns the best hypotheses into database query frames that are
//! consistency-checked and completed with context defaults.

pub mod chunker;
pub mod cli;
pub mod datastore;
pub mod eval;
pub mod frame;
pub mod grammar;
pub mod parser;
pub mod pipeline;
