use crate::lattice::Site;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("scale too coarse: N = {n} does not fit the origin's square inside the domain")]
    ScaleTooCoarse { n: u32 },

    #[error("invalid domain spec: {0}")]
    InvalidSpec(String),

    #[error("invalid lattice domain: {0}")]
    InvalidDomain(String),

    #[error("origin is blocked")]
    OriginBlocked,

    #[error("walk step {index} is not a nearest-neighbour step")]
    NonAdjacentStep { index: usize },

    #[error("path vertex {0:?} is not in the domain")]
    PathLeavesDomain(Site),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("enumeration guard exceeded: {size} vertices (limit {limit})")]
    EnumerationGuard { size: usize, limit: usize },

    #[error("target unreachable from the start edge")]
    Unreachable,

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("point swallowed by the hull")]
    Swallowed,

    #[error("curve leaves the upper half-plane at sample {0}")]
    ExitsHalfPlane(usize),

    #[error("numerical blow-up: {0}")]
    NumericalBlowUp(String),

    #[error("sine {value:.6} below floor {floor}")]
    SineFloor { value: f64, floor: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("memory budget exceeded: {needed} vertices > {budget}")]
    MemoryBudget { needed: usize, budget: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
