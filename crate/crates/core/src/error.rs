use thiserror::Error;

/// Errors raised by graph construction and the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph must have at least {min} vertices, got {got}")]
    TooFewVertices { min: usize, got: usize },
    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("edge {{{u}, {v}}} has nonpositive weight {w}")]
    NonpositiveWeight { u: usize, v: usize, w: f64 },
    #[error("graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("signature dimension must be positive")]
    ZeroDimension,
    #[error("signature on edge ({u}, {v}) is not orthogonal (deviation {deviation:.3e})")]
    NonOrthogonalSignature { u: usize, v: usize, deviation: f64 },
    #[error("signature on edge ({u}, {v}) has shape {rows}x{cols}, expected {d}x{d}")]
    SignatureShape {
        u: usize,
        v: usize,
        rows: usize,
        cols: usize,
        d: usize,
    },
    #[error("signature does not cover the same edge set as the graph")]
    EdgeSetMismatch,
    #[error("switching matrix at vertex {vertex} is not orthogonal (deviation {deviation:.3e})")]
    NonOrthogonalSwitch { vertex: usize, deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vertex pair must be distinct, got ({0}, {0})")]
    SamePair(usize),
    #[error("index set must be nonempty")]
    EmptyIndexSet,

    #[error("block to eliminate is singular")]
    SingularBlock,
    #[error("input columns are not orthonormal (deviation {0:.3e})")]
    NotOrthonormalInput(f64),

    #[error("boundary set is empty")]
    EmptyBoundary,
    #[error("no interior vertices")]
    EmptyInterior,
    #[error("boundary vertex {0} has no prescribed value")]
    MissingBoundaryValue(usize),
    #[error("function is not harmonic at vertex {vertex} (residual {residual:.3e})")]
    NotHarmonic { vertex: usize, residual: f64 },

    #[error("conditioning event has probability {probability:.3e}")]
    UnreachableConditioning { probability: f64 },
    #[error("conditioning is degenerate: return probability {probability:.3e}")]
    DegenerateConditioning { probability: f64 },
    #[error("all {0} walks exceeded the step cap")]
    AllCensored(usize),
    #[error("no walk satisfied the conditioning event ({rejected} rejected, {censored} censored)")]
    ZeroAcceptance { rejected: usize, censored: usize },
    #[error("function is not in the kernel of the connection Laplacian (residual {0:.3e})")]
    NotInKernel(f64),

    #[error("lines are not internally disjoint")]
    NotInternallyDisjoint,
    #[error("({0}, {1}) is not an edge and the signature is inconsistent")]
    NotAnEdge(usize, usize),

    #[error("per-vertex kernel blocks are not orthonormal (deviation {0:.3e})")]
    KernelDegeneracy(f64),
    #[error("graph is not a single cycle")]
    NotACycle,
    #[error(
        "invertibility ({nullity} null directions) disagrees with the loop criterion (min margin {min_margin:.3e})"
    )]
    CriterionMismatch { nullity: usize, min_margin: f64 },
}

impl Error {
    /// Whether the error stems from malformed input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::TooFewVertices { .. }
                | Error::VertexOutOfRange { .. }
                | Error::SelfLoop(_)
                | Error::DuplicateEdge(..)
                | Error::NonpositiveWeight { .. }
                | Error::DisconnectedGraph { .. }
                | Error::ZeroDimension
                | Error::NonOrthogonalSignature { .. }
                | Error::SignatureShape { .. }
                | Error::EdgeSetMismatch
                | Error::NonOrthogonalSwitch { .. }
                | Error::InvalidParameter(_)
                | Error::SamePair(_)
                | Error::EmptyIndexSet
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
