use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("halfspace intersection is unbounded")]
    Unbounded,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("section is empty: a halfspace parallel to the subspace excludes it")]
    EmptySection,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZonoidError {
    #[error("invalid directional distribution: {0}")]
    InvalidDistribution(String),
    #[error("zonotope has {count} generators, more than the cap of {cap}")]
    TooManyGenerators { count: usize, cap: usize },
    #[error("zonotope is lower dimensional (rank {rank} in {dim} coordinates)")]
    DegenerateZonotope { rank: usize, dim: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
    #[error("degenerate directional distribution: {0}")]
    DegenerateDistribution(String),
    #[error("moment table invariant violated: {0}")]
    InvariantViolated(String),
    #[error(transparent)]
    Zonoid(#[from] ZonoidError),
}

impl From<GeometryError> for OracleError {
    fn from(e: GeometryError) -> Self {
        OracleError::Zonoid(ZonoidError::Geometry(e))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("zero cell not contained in half the observation window (radius {radius})")]
    WindowTooSmall { radius: f64 },
    #[error("zero cell still not contained after {retries} window doublings")]
    RetryCapExceeded { retries: u32 },
    #[error("added directions are not in general position")]
    DegeneratePosition,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl From<ZonoidError> for SimulationError {
    fn from(e: ZonoidError) -> Self {
        SimulationError::Oracle(OracleError::Zonoid(e))
    }
}
