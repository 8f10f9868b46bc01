//! Term-sparse and sign-symmetric SOS relaxations for outer approximations
//! of maximum positively invariant sets of polynomial dynamical systems.

pub mod graphs;
pub mod models;
pub mod poly;
pub mod relax;
pub mod sparsity;
pub mod symmetry;
pub mod system;

pub use graphs::{CliqueSet, Extension, MonomialGraph};
pub use poly::{Exponent, Polynomial, SupportSet};
pub use relax::{assemble, recover, Assembly, CertificateSet, Mode, RelaxationConfig};
pub use system::{BoxSet, DynamicalSystem, Problem, ProblemFile};

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("parse error at position {pos}: {msg}\n  {text}\n  {caret:>width$}", caret = "^", width = pos + 1)]
    Parse { pos: usize, msg: String, text: String },
    #[error("{0}")]
    Invalid(String),
}

impl CoreError {
    /// Prefixes a parse error with where the text came from.
    pub fn context(self, what: &str) -> CoreError {
        match self {
            CoreError::Parse { pos, msg, text } => CoreError::Parse { pos, msg: format!("{what}: {msg}"), text },
            CoreError::Invalid(m) => CoreError::Invalid(format!("{what}: {m}")),
        }
    }
}
