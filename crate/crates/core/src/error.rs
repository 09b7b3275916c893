//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Everything that can go wrong while building graphs, boundary conditions,
/// kernels, evolutions or walk expansions.
#[derive(Debug, Clone, Error)]
pub enum Error {
    // graph construction
    #[error("graph is not connected")]
    DisconnectedGraph,
    #[error("vertex `{0}` has degree zero")]
    ZeroDegreeVertex(String),
    #[error("internal edge `{0}` has nonpositive length {1}")]
    NonpositiveLength(String, f64),
    #[error("edge `{edge}` refers to unknown vertex `{vertex}`")]
    DanglingVertexReference { edge: String, vertex: String },
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("missing boundary datum for edge `{0}`")]
    MissingEndpointDatum(String),

    // boundary conditions
    #[error("matrix dimensions do not match (expected {expected}, got {got})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("(A,B) is rank deficient: rank {rank} < {m}")]
    RankDeficient { rank: usize, m: usize },
    #[error("invalid vertex condition parameters: {0}")]
    InvalidParams(String),
    #[error("no vertex conditions supplied for `{0}`")]
    MissingVertex(String),
    #[error("vertex `{vertex}` has degree {degree}, expected {expected}")]
    DegreeMismatch { vertex: String, degree: usize, expected: usize },
    #[error("vertex `{0}` must have degree >= 2 for this construction")]
    DegreeTooSmall(String),
    #[error("A + ikB is numerically singular at k = {re}+{im}i")]
    SingularAtK { re: f64, im: f64 },
    #[error("closed-form scattering matrix has a pole at this k")]
    PoleAtK,
    #[error("conditions are not local, cannot take per-vertex forms")]
    NotLocalInput,
    #[error("vertex `{0}` has no continuity form")]
    NotContinuousInput(String),
    #[error("graph has a tadpole, operation requires tadpole-free graphs")]
    TadpolePresent,

    // resolvent / spectra
    #[error("k is not in the resolvent set (I - S(k)T(k) singular or Im k <= 0)")]
    NotInResolventSet,
    #[error("empty scan range")]
    EmptyRange,
    #[error("sampled Green's kernel has a negative entry, sup-norm bound not applicable")]
    NonpositiveKernel,

    // semigroup
    #[error("boundary conditions not certified as a semigroup generator: {0}")]
    NotAGenerator(String),
    #[error("contour inversion self-check failed: node doubling changed the result by {0:.3e}")]
    ContourFailure(f64),
    #[error("linear solve failed in finite-difference stepping")]
    LinearSolveFailure,

    // walks
    #[error("walk series diverges: q = {0:.3} >= 1 at this kappa")]
    SeriesDiverges(f64),
    #[error("walk enumeration exceeded the cutoff guard of {0} walks")]
    CutoffTooLarge(usize),
    #[error("missing scattering matrix for vertex `{0}`")]
    MissingVertexMatrix(String),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
