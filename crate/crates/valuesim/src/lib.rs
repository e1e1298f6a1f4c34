//! Survey persona simulation harness.
//!
//! Turns survey response profiles into second-person narrative backstories,
//! simulates answers to held-out value questions through parallel cognitive,
//! affective, and behavioral perspectives with a coordinator synthesis step,
//! and evaluates simulated answers against the respondents' real ones.

pub mod baselines;
pub mod cab;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod integrate;
pub mod parallel;
pub mod retrieval;
pub mod rundir;
pub mod story;
pub mod templates;

pub use error::{Error, Result};

/// Scalar type used by orchestration and scoring code.
pub type Scalar = f64;
