//! Ensemble invariant risk minimization (EIRM).
//!
//! Every training environment owns one classifier of an averaged ensemble and
//! plays best responses against the others. This crate holds the numeric
//! substrate (`math`, `nn`), the benchmark generators (`data`), the game and its
//! training loop (`game`), comparison methods (`baselines`) and executable
//! equilibrium/invariance checks (`theory`).

pub mod baselines;
pub mod data;
pub mod error;
pub mod game;
pub mod math;
pub mod nn;
pub mod theory;

pub use error::{Error, Result};
pub use math::{Matrix, Rng};
