use thiserror::Error;

/// Errors raised by the expansion, natural-extension and measure routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CfError {
    #[error("input is zero; the Gauss map digit is undefined at 0")]
    ZeroInput,
    #[error("{what} = {value} lies outside {range}")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: String,
    },
    #[error("digit {0} is even; partial quotients are odd")]
    EvenDigit(i64),
    #[error("partial quotient does not fit in 64 bits")]
    DigitOverflow,
    #[error("requested {requested} digits but {precision_bits} bits only support {max}")]
    PrecisionBudget {
        requested: usize,
        max: usize,
        precision_bits: u32,
    },
    #[error("residual check failed after {index} digits (|deviation| = {deviation})")]
    PrecisionExhausted { index: usize, deviation: String },
    #[error("digit string is not admissible: {0}")]
    InvalidDigitString(String),
    #[error("verification '{check}' failed: {detail}")]
    VerificationFailure { check: String, detail: String },
    #[error("adaptive quadrature did not converge on [{a}, {b}]")]
    QuadratureNonConvergence { a: f64, b: f64 },
    #[error("branch budget of {budget} pieces exceeded at depth {depth}")]
    BranchBudgetExceeded { budget: usize, depth: usize },
    #[error("cannot parse '{input}': {reason}")]
    Parse { input: String, reason: String },
}

impl CfError {
    pub(crate) fn out_of_range(what: &'static str, value: impl ToString, range: impl ToString) -> Self {
        CfError::OutOfRange {
            what,
            value: value.to_string(),
            range: range.to_string(),
        }
    }

    pub(crate) fn verification(check: impl Into<String>, detail: impl Into<String>) -> Self {
        CfError::VerificationFailure {
            check: check.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CfError>;
