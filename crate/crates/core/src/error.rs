use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
///
/// `Invariant` is reserved for conditions that indicate a bug or a corrupted
/// state (exclusion violated, conservation broken); everything else is a
/// rejected input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("empty aggregate")]
    EmptyAggregate,
    #[error("cascade precondition violated: {0}")]
    CascadePrecondition(String),
    #[error("grid outside bounding region: {0}")]
    GridOutsideRegion(String),
    #[error("duplicate site in explicit initial list: {0:?}")]
    DuplicateSite(Vec<i32>),
    #[error("overfull lattice: {requested} particles for {available} sites")]
    OverfullLattice { requested: usize, available: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown Figure 2 variant N={requested}; admissible: {admissible}")]
    UnknownVariant { requested: usize, admissible: String },
    #[error("coincident points")]
    CoincidentPoints,
    #[error("point on curve")]
    PointOnCurve,
    #[error("path not closed")]
    NotClosed,
    #[error("invalid path: {0}")]
    Path(String),
    #[error("mass profile is not monotone at x={0}")]
    NonMonotoneProfile(f64),
    #[error("initial density has mass {0}, expected 1")]
    DensityMass(f64),
    #[error("exclusion-infeasible density: u0={value} at x={x}")]
    ExclusionInfeasible { x: f64, value: f64 },
    #[error("test function not supported in the solved window: {0}")]
    TestFunctionSupport(String),
    #[error("columns exceed square: R^2={r2} > n={n}")]
    ColumnsExceedSquare { r2: u32, n: u32 },
    #[error("mismatched seeds: {0}")]
    MismatchedSeeds(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub fn is_invariant(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
