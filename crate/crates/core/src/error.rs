use alloc::boxed::Box;
use alloc::string::String;

use crate::solver::SolveReport;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A parameter or configuration value violates its contract.
    #[error("configuration error: {0}")]
    Config(String),

    /// An exponent or dilation left the representable/accurate range.
    #[error("range error: {0}")]
    Range(String),

    /// A component has zero mass (or is otherwise unusable).
    #[error("degenerate state: {0}")]
    DegenerateState(&'static str),

    /// The fiber derivative never changes sign on the scan window.
    #[error("no fiber maximizer in [{lo}, {hi}]")]
    NoMaximizer { lo: f64, hi: f64 },

    /// More than one sign change of the fiber derivative.
    #[error("fiber maximizer is not unique: {sign_changes} sign changes on the scan grid")]
    NonUnique { sign_changes: usize },

    #[error("invalid mountain-pass path: {0}")]
    InvalidPath(String),

    /// No multi-start run reached the tolerances; carries the best run.
    #[error("no run converged (best energy {:.6e}, residual {:.3e})", .0.energy, .0.grad_residual)]
    NotConverged(Box<SolveReport>),

    #[error("refused: {0}")]
    Refused(&'static str),
}
