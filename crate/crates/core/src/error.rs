use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: max |M - M^†| = {norm:.3e}")]
    NotHermitian { norm: f64 },

    #[error("matrix is not unitary: max |U^†U - I| = {norm:.3e}")]
    NotUnitary { norm: f64 },

    #[error("eigenphase {phase:.9} lies within {guard:.1e} of the ±π branch cut; logarithm is ambiguous")]
    BranchCut { phase: f64, guard: f64 },

    #[error("invalid walk parameters: {0}")]
    InvalidParameters(String),

    #[error("momentum direction undefined at κ = 0")]
    ZeroMomentum,

    #[error("spin state is not normalized: |a|² + |b|² = {norm_sq:.12}")]
    Unnormalized { norm_sq: f64 },

    #[error("packet width {width} is too large for a grid of {grid_size} sites (need N ≥ 8·width)")]
    Aliasing { width: f64, grid_size: usize },

    #[error("invalid lattice state: {0}")]
    InvalidState(String),

    #[error("wave packet wrapped around the periodic grid: displacement {displacement:.3} sites exceeds N/4 = {limit:.1}")]
    PacketWrapped { displacement: f64, limit: f64 },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid physical context: {0}")]
    InvalidContext(String),

    #[error("optimizer did not converge within {evaluations} evaluations")]
    NonConvergence { evaluations: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layout file error: {0}")]
    LayoutFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
