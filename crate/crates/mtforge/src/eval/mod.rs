//! Evaluation harness: character n-gram F-scores, instruction-following
//! translation tasks with dual scoring, judged head-to-head battles, and
//! per-language report aggregation.

pub mod arena;
pub mod chrf;
pub mod ifmt;
pub mod report;
