//! Goal recognition over STRIPS puzzle domains.
//!
//! The crate covers the full pipeline: PDDL parsing and grounding, forward
//! search, two planning-based recognizers (landmark goal completion and
//! cost-difference over compiled observations), plan-trace datasets, a
//! 36-bit state codec, and an LSTM goal classifier trained from scratch.

pub mod strips;
pub mod planner;
pub mod domains;
pub mod codec;
pub mod landmarks;
pub mod recognition;
pub mod rg;
pub mod traces;
pub mod dataset;
pub mod neural;
pub mod bench;
pub mod oracle;
