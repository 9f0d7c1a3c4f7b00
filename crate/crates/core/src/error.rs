use thiserror::Error;

/// Errors raised by the distribution, model and interval routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The triple does not define a proper distribution (`c <= a + b`).
    #[error("GWD({a}, {b}, {c}) is improper: c must exceed a + b")]
    Improper { a: f64, b: f64, c: f64 },

    /// Posterior of K is improper because `n11 + ell <= 1`.
    #[error("improper posterior: n11 + ell = {total} must exceed 1; use ell >= 2")]
    ImproperPosterior { total: f64 },

    #[error("no units captured: n10 + n01 + n11 must be at least 1")]
    EmptySample,

    #[error("hypergeometric margins exceed N: n1dot = {n1dot}, ndot1 = {ndot1}, N = {population}")]
    MarginsExceedPopulation {
        n1dot: u64,
        ndot1: u64,
        population: u64,
    },

    /// An interval method is not defined for these counts (e.g. Wald with `n11 = 0`).
    #[error("{method} is undefined for these counts: {reason}")]
    Undefined {
        method: &'static str,
        reason: &'static str,
    },

    #[error("adaptive quadrature did not reach tolerance {tolerance:e} within {subdivisions} subdivisions (estimated error {estimate:e})")]
    Convergence {
        tolerance: f64,
        subdivisions: usize,
        estimate: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie strictly between 0 and 1",
        })
    }
}
