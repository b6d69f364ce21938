use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("top faces have mixed dimensions ({0} and {1})")]
    MixedDimension(usize, usize),
    #[error("top face {0:?} has non-positive weight {1}")]
    ZeroWeight(Vec<u32>, f64),
    #[error("duplicate top face {0:?}")]
    DuplicateTopFace(Vec<u32>),
    #[error("vertex {0} appears in no top face")]
    IsolatedVertex(u32),
    #[error("vertex {0} out of range for {1} vertices")]
    VertexOutOfRange(u32, usize),
    #[error("face {0:?} is not strictly increasing")]
    UnsortedFace(Vec<u32>),
    #[error("no top faces given")]
    EmptyComplex,
    #[error("dimension {d} too large for {n} vertices")]
    DimensionTooLarge { n: usize, d: usize },
    #[error("part {0} is empty")]
    EmptyPart(usize),
    #[error("truncation {truncation} exceeds matroid rank {rank}")]
    TruncationExceedsRank { truncation: usize, rank: usize },
    #[error("{0:?} is not a face of the complex")]
    NotAFace(Vec<u32>),
    #[error("invalid coloring: {0}")]
    InvalidColoring(String),
    #[error("level {k} out of range (top dimension {d})")]
    LevelOutOfRange { k: isize, d: isize },
    #[error("walk has no edges")]
    EmptyWalk,
    #[error("complex carries no coloring")]
    NotPartite,
    #[error("color set sizes invalid: {0}")]
    ColorSize(String),
    #[error("color sets overlap")]
    OverlappingColors,
    #[error("operator is not reversible (residual {0:e})")]
    NotReversible(f64),
    #[error("bipartite marginals inconsistent (residual {0:e})")]
    InconsistentMarginals(f64),
    #[error("operator must be square")]
    NotSquare,
    #[error("theorem hypothesis not applicable: {0}")]
    NotApplicable(String),
    #[error("mixing lemma hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("partition ordering violated: Pr[A] = {a} > Pr[B] = {b}")]
    OrderingViolated { a: f64, b: f64 },
    #[error("graph too large for exhaustive search ({0} vertices)")]
    TooLarge(usize),
    #[error("size cap exceeded: {what} needs {need}, cap {cap}")]
    SizeCap { what: String, need: usize, cap: usize },
    #[error("invalid field size {0}")]
    InvalidField(usize),
    #[error("dimension arithmetic violated: {0}")]
    DimensionArithmetic(String),
    #[error("parameter out of range: {0}")]
    ParameterRange(String),
    #[error("conditioning event has probability zero")]
    ZeroConditioning,
    #[error("ensemble does not match the set layer: {0}")]
    SupportMismatch(String),
    #[error("global assignment is partial ({0} of {1} points)")]
    PartialGlobal(usize, usize),
    #[error("element {0} of A is contained in no set")]
    OrphanA(usize),
    #[error("subset sampler marginal differs from the STAV marginal (residual {0:e})")]
    MarginalMismatch(f64),
    #[error("no good color tuple found (best score {0})")]
    NoGoodColors(f64),
    #[error("STAV invariant violated: {0}")]
    InvalidStav(String),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;
