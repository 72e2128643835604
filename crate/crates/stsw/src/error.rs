//! Error type shared across the crate.

use thiserror::Error;

/// Error variants for spherical tree-sliced Wasserstein operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Two inputs live in different ambient dimensions.
    #[error("ambient dimension mismatch: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A vector with (near) zero norm cannot be normalized onto the sphere.
    #[error("cannot normalize a vector with norm {norm:e}")]
    ZeroVector { norm: f64 },

    /// Weights are negative, empty, or do not sum to one.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// Matrix fails the orthogonality check Q·Qᵀ = I.
    #[error("matrix is not orthogonal (max deviation {max_err:e})")]
    NotOrthogonal { max_err: f64 },

    /// A scalar or size parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Spherical tree invariant violated (direction not orthogonal to the
    /// root, degenerate duplicate directions, ...).
    #[error("invalid spherical tree: {0}")]
    InvalidTree(String),

    /// Rejection sampling failed to produce a valid direction.
    #[error("degenerate tree sampling: no valid direction after {attempts} redraws")]
    DegenerateSampling { attempts: usize },

    /// Tree coordinate outside [0, π].
    #[error("tree coordinate {coord} outside [0, π]")]
    CoordOutOfRange { coord: f64 },

    /// The two measures do not share a support list.
    #[error("measures do not share the same support list")]
    SupportMismatch,

    /// Desk-scale guard for the exact solvers.
    #[error("{what} exceeds the exact-solver limit: {got} > {limit}")]
    SizeGuard {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    /// The edge list does not form a tree rooted at the given node.
    #[error("invalid tree graph: {0}")]
    InvalidGraph(String),

    /// Gradient flow produced a non-finite gradient.
    #[error("non-finite gradient at epoch {epoch}")]
    NonFiniteGradient { epoch: usize },

    /// File or parse problem in the I/O layer.
    #[error("{path}: {msg}")]
    FileFormat { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
