//! Toolkit for controlled new-knowledge fine-tuning experiments.
//!
//! * [`persona`] generates the synthetic population and splits it into
//!   known, test and unknown pools.
//! * [`corpus`] renders biographies, QA and chain-of-thought reasoning
//!   samples and ingests an external wiki-style test set.
//! * [`schedule`] expands experiment variants into fully ordered training
//!   manifests, including tail-injected known patches.
//! * [`evalkit`] scores model outputs and aggregates relative accuracy
//!   changes per test group.
//! * [`attn`] reads attention dumps, computes entity-attention scores and
//!   contextual similarity.
//!
//! The numeric analysis is generic over [`Scalar`]; `f64` aliases are
//! exported at the crate root.

pub mod attn;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod io;
pub mod persona;
pub mod pipeline;
pub mod rng;
pub mod schedule;
mod scalar;
mod warning;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use warning::Warning;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type EvalReport = evalkit::EvalReport<f64>;
pub type GroupSummary = evalkit::GroupSummary<f64>;
pub type LayerStats = attn::LayerStats<f64>;
pub type AttentionDump = attn::AttentionDump;

pub type EvalReport32 = evalkit::EvalReport<f32>;
pub type LayerStats32 = attn::LayerStats<f32>;
