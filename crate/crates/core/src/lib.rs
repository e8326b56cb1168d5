//! Task-oriented dialog engine.
//!
//! The pipeline flattens each dialog turn into a single token sequence
//! (history, turn domain, belief state, DB match, delexicalized response),
//! decodes it in two stages through a pluggable [`seqmodel::GeneratorBackend`],
//! grounds the belief against an entity [`kb::Database`], and recovers from
//! malformed output at decode time. A rule-based user simulator in
//! [`simeval`] drives automatic evaluation.

pub mod text;
pub mod belief;
pub mod kb;
pub mod lexicon;
pub mod data;
pub mod seqmodel;
pub mod corpus;
pub mod engine;
pub mod polish;
pub mod simeval;
pub mod fixtures;
