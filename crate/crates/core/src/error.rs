use thiserror::Error;

/// Errors raised by the meta-analysis engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input for `{name}`: {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("`{name}` = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("at least {needed} studies required, got {got}")]
    TooFewStudies { needed: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error(
        "study `{study}` has a zero cell in its 2x2 table; use the exact mid-p route \
         (--exact) or apply a continuity correction upstream"
    )]
    ZeroCell { study: String },

    #[error("infeasible 2x2 table: {0}")]
    InfeasibleTable(String),

    #[error("value {x} lies outside the support [{lo}, {hi}]")]
    OutsideSupport { x: i64, lo: i64, hi: i64 },

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),

    #[error("additive (tau2) and multiplicative (phi) adjustments cannot both be active")]
    ConflictingAdjustment,

    #[error("root finding did not converge: {0}")]
    NoConvergence(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { name, value })
    }
}

pub(crate) fn probability_open(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected: "0 < p < 1",
        })
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected: "finite and > 0",
        })
    }
}
