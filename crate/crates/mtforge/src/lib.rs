//! Data machinery for building and evaluating instruction-following
//! translation models: corpus preparation, verifiable instruction
//! generation, supervised-data curation, preference-pair construction,
//! verifiable rewards, and an evaluation harness.
//!
//! Every neural model involved (generators, quality metrics, pairwise
//! judges, reward models) is an external HTTP service reached through
//! [`gateway::Gateway`]; nothing in this crate runs inference itself.

pub mod corpus;
pub mod eval;
pub mod gateway;
pub mod guidelines;
pub mod hashing;
pub mod jsonl;
pub mod model;
pub mod pipeline;
pub mod prefs;
pub mod rewards;
pub mod sft;
