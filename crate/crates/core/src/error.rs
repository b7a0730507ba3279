use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("initial block [{lo}, {hi}] lies outside the grid")]
    SpecOutsideDomain { lo: f64, hi: f64 },
    #[error("value {0} is outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("density {0} outside the admissible range [0, 1]")]
    DomainError(f64),
    #[error("characteristic speed {xi} outside [-{k}, 1]")]
    RangeError { xi: f64, k: f64 },
    #[error("invalid velocity field: {0}")]
    InvalidVelocity(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("support reached the guard band at t = {t}")]
    DomainOverflow { t: f64 },
    #[error("non-finite value in cell {cell} at t = {t}")]
    NonFiniteValue { cell: usize, t: f64 },
    #[error("cell {cell} left the invariant region with value {value} at t = {t}")]
    InvariantRegion { cell: usize, value: f64, t: f64 },
    #[error("snapshots do not belong to the same run")]
    MismatchedRun,
    #[error("the pressure evolution residual requires eps > 0")]
    RequiresDiffusion,
    #[error("saturated set is empty")]
    EmptySaturatedSet,
    #[error("level {level} is not bracketed by the profile")]
    LevelNotBracketed { level: f64 },
    #[error("block has ambient density {0} >= 1")]
    DegenerateBlock(f64),
    #[error("velocity derivative {slope} > 0 at x = {x} on the block hull")]
    VelocityNotDecreasing { x: f64, slope: f64 },
    #[error("velocity {value} <= 0 at x = {x}")]
    NonPositiveVelocity { x: f64, value: f64 },
    #[error("block {index} collapsed (front caught by rear) at t = {t}")]
    FrontCatching { index: usize, t: f64 },
    #[error("agents {index} and {next} are out of order")]
    OrderingViolated { index: usize, next: usize },
    #[error("step size collapsed after {halvings} halvings at t = {t}")]
    StepCollapse { halvings: u32, t: f64 },
    #[error("{source} (at t = {t})")]
    AtTime { t: f64, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_time(self, t: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime {
                t,
                source: Box::new(e),
            },
        }
    }
}
