use thiserror::Error;

use crate::market::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid market: {0}")]
    InvalidMarket(ValidationReport),

    /// `1 + b'x <= 0` for some jump atom, so the rule can be wiped out by a single jump.
    #[error("rule is not admissible: atom {atom} gives gross jump return {gross_return:.6e} <= 0")]
    Inadmissible { atom: usize, gross_return: f64 },

    #[error("jump support admits arbitrage along direction {direction:?}")]
    Arbitrage { direction: Vec<f64> },

    #[error(
        "Kelly solver did not converge after {iterations} iterations \
         (|gradient|_inf = {gradient_norm:.3e}, last iterate {last_iterate:?})"
    )]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("market file: {0}")]
    MarketFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
