//! Cost-optimal query design for MAP classification under per-label error
//! tolerances.
//!
//! A decision maker queries noisy models, each with a known response
//! distribution per label and a per-query cost, and wants the cheapest
//! multiset of queries whose MAP decision errs with probability at most
//! `alpha_y` whenever the truth is `y`. This crate provides exact error
//! evaluation, Chernoff surrogate bounds, an approximation scheme for the
//! surrogate design problem, Monte Carlo checks, a set-cover hardness
//! reduction and experiment drivers.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod afptas;
pub mod chernoff;
pub mod cli;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod hardness;
pub mod likelihood;
pub mod model;
pub mod montecarlo;
pub mod optimize;
#[cfg(test)]
mod proptests;

pub use error::{Error, Result};
pub use model::{Instance, ModelSpec, QueryPlan};
