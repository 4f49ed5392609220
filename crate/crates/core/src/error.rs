use thiserror::Error;

use crate::ifs::TargetApprox;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet size {0}; need k >= 1")]
    InvalidAlphabet(usize),

    #[error("symbol {symbol} out of range 1..={k}")]
    SymbolOutOfRange { symbol: usize, k: usize },

    #[error("interval [{lo}, {hi}] is not inside the domain [{domain_lo}, {domain_hi}]")]
    OutsideDomain {
        lo: f64,
        hi: f64,
        domain_lo: f64,
        domain_hi: f64,
    },

    #[error("malformed interval [{lo}, {hi}]")]
    MalformedInterval { lo: f64, hi: f64 },

    #[error("operation requires a nonempty set")]
    EmptySet,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("interval set exceeds {limit} parts")]
    PartOverflow { limit: usize },

    #[error("invalid construction: {0}")]
    Construction(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Refinement ran out of budget; carries what was computed so far.
    #[error("budget exhausted after {} words", .0.words_examined)]
    Budget(Box<TargetApprox>),

    #[error("unsupported map: {0}")]
    UnsupportedMap(String),

    #[error("matrix structure: {0}")]
    Structure(String),

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    Convergence { iterations: usize, last_change: f64 },

    #[error("degenerate input: {0}")]
    Degeneracy(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("all {n_samples} sampled fibres stayed wider than the tolerance")]
    AllUnresolved { n_samples: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
