//! Kelly rule for jump-diffusion markets.
//!
//! The crate computes the growth-optimal continuously-rebalanced portfolio for
//! a market of `n` correlated stocks that both diffuse and jump, checks that it
//! is the saddle point of the expected wealth-ratio game between two traders,
//! and provides exact (event-driven) Monte Carlo simulation of wealth paths
//! together with closed-form outperformance probabilities for single-stock
//! binary-jump markets.
//!
//! Module map:
//!
//! - [`market`]: market parameters, validation and the JSON market schema.
//! - [`admissible`]: the non-bankruptable set of rules and the no-arbitrage check.
//! - [`growth`]: asymptotic growth rate, derivatives and the Kelly solver.
//! - [`game`]: wealth-ratio payoff kernel and saddle-point verification.
//! - [`simulator`]: exact wealth path simulation with shared randomness.
//! - [`outperformance`]: analytic `Prob{V_t(b) > V_t(c)}` for binary jumps.
//! - [`randomization`]: fair randomizations, performance measures and the
//!   Monte Carlo evaluation of the primitive and investment games.
//! - [`cli`]: the command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admissible;
pub mod cli;
mod error;
pub mod estimate;
pub mod game;
pub mod growth;
pub mod market;
pub mod normal;
pub mod outperformance;
pub mod randomization;
pub mod simulator;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};

/// Builds a rebalancing rule from a slice of per-stock wealth fractions.
pub fn rule(fractions: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(fractions)
}
