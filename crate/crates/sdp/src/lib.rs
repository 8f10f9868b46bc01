//! Block semidefinite programming: problem representation, a primal–dual
//! interior-point solver, and SDPA sparse-format import/export.

pub mod problem;
pub mod sdpa;
pub mod solver;

pub use problem::{Block, BlockEntry, BlockKind, Constraint, LinearForm, SdpProblem};
pub use sdpa::{export_sdpa, parse_sdpa};
pub use solver::{solve, IterationRecord, Residuals, SdpSolution, SolveStatus, SolverOptions};

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("numerical breakdown at iteration {iteration}: {message}")]
    NumericalBreakdown { iteration: usize, message: String, trace: Vec<IterationRecord> },
    #[error("SDPA parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
