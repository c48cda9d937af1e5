//! Construction and verification of low-coherence spreading codebooks built
//! from quadratic Boolean functions.
//!
//! The pipeline has three stages, each its own module family:
//!
//! * [`boolfn`]: truth tables, Walsh-Hadamard spectra, quadratic forms over
//!   GF(2), and the rank machinery that classifies a quadratic function as
//!   bent / near-bent without expanding its spectrum.
//! * [`quadperm`] and [`search`]: path-graph quadratic forms `Q_pi` indexed
//!   by permutations, the compatibility relation (`Q_pi + Q_rho` bent or
//!   near-bent), and exhaustive search for mutually compatible sets via
//!   maximal-clique enumeration.
//! * [`extend`] and [`codebook`]: right-extension of compatible sets to
//!   higher dimension, and the resulting sign codebooks: each permutation
//!   contributes a block of `2^n` shifted Golay-Davis-Jedwab sequences,
//!   giving unit-PAPR-bounded columns with provably minimal cross-block
//!   coherence.
//!
//! Everything that feeds a verdict (orthogonality, coherence, Golay pairs,
//! spectra) is computed in exact integer arithmetic; floating point appears
//! only in PAPR estimation and in reporting.

pub mod boolfn;
pub mod codebook;
pub mod extend;
pub mod quadperm;
pub mod search;

/// Hard cap on the number of Boolean variables for truth-table expansion.
///
/// `2^24` entries is the largest spectrum the exact integer kernels are
/// sized for; rank-based routes keep working above this, truth tables do not.
pub const MAX_VARS: usize = 24;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("variable count {0} out of range 1..={MAX_VARS}")]
    VarCount(usize),
    #[error("operands disagree in size: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("index pair ({i}, {j}) invalid for n = {n}: need 1 <= i < j <= n")]
    BadIndexPair { i: usize, j: usize, n: usize },
    #[error("not a permutation of 1..={expected}: {got}")]
    NotPermutation { expected: usize, got: String },
    #[error("quadratic form is not bent (rank {rank} < n = {n})")]
    NotBent { n: usize, rank: usize },
    #[error("restriction dichotomy violated for pair ({i}, {j}): {detail}")]
    DichotomyViolation { i: usize, j: usize, detail: String },
    #[error("guard: {0}")]
    Guard(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
