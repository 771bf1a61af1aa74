//! Knowledge composition sampling: train a sentence-level conditional
//! selector over multi-document contexts, sample diverse knowledge
//! compositions with sentence-level nucleus decoding, and drive diverse
//! multi-hop question generation, with baselines and an evaluation harness.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod decoding;
pub mod encoder;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod nn;
pub mod qgen;
pub mod rng;
pub mod selector;
pub mod text;

pub use error::{KcsError, Result};
