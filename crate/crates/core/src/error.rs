use alloc::string::String;
use core::fmt;

/// Errors raised by the solver stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch { expected: usize, found: usize },
    SingularMatrix { index: usize, pivot: f64 },
    /// A diagonal block of the block-tridiagonal operator could not be factored.
    SingularBlock(usize),
    NonFiniteValue,
    /// Arnoldi produced a zero vector while the residual was still nonzero.
    Breakdown { iteration: usize },
    NewtonDivergence { step: usize, residual: f64 },
    IndivisibleSteps { steps: usize, levels: usize },
    MaxItersExceeded { iterations: usize },
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::SingularMatrix { index, pivot } => {
                write!(f, "singular matrix: pivot {pivot:e} at index {index}")
            }
            Error::SingularBlock(i) => write!(f, "diagonal block {i} is singular"),
            Error::NonFiniteValue => write!(f, "non-finite value encountered"),
            Error::Breakdown { iteration } => {
                write!(f, "Krylov breakdown at iteration {iteration}")
            }
            Error::NewtonDivergence { step, residual } => {
                write!(f, "Newton failed at time step {step} (residual {residual:e})")
            }
            Error::IndivisibleSteps { steps, levels } => {
                write!(f, "{steps} time steps cannot be coarsened over {levels} levels")
            }
            Error::MaxItersExceeded { iterations } => {
                write!(f, "iteration limit reached after {iterations} iterations")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
