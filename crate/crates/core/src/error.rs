use thiserror::Error;

/// Errors raised by the generalized-number machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid epsilon grid: {0}")]
    InvalidGrid(String),

    #[error("nets live on different epsilon grids")]
    GridMismatch,

    #[error("non-finite sample at epsilon index {index}")]
    NonFinite { index: usize },

    #[error("power net overflows at epsilon index {index}")]
    Overflow { index: usize },

    #[error("net is not strictly nonzero at exponent {exponent}; failing tail indices {indices:?}")]
    NotStrictlyNonzero { exponent: f64, indices: Vec<usize> },

    #[error("asymptotic fit needs at least 3 usable tail samples, found {usable}")]
    Fit { usable: usize },

    #[error("matrix at epsilon index {index} is not symmetric")]
    NotSymmetric { index: usize },

    #[error("eigensolver did not converge at epsilon index {index}")]
    EigenNonConvergence { index: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("vector is not free")]
    NotFree,

    #[error("Gram matrix is degenerate")]
    DegenerateGram,

    #[error("matrix is singular at epsilon index {index}")]
    Singular { index: usize },

    #[error("bilinear form is not Lorentzian")]
    NotLorentzian,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("tensor rank {found} does not match energy order {order}")]
    RankMismatch { order: usize, found: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("singular metric at epsilon index {index}, point {point}")]
    SingularMetric { index: usize, point: usize },

    #[error("solution blew up at epsilon index {index}")]
    Unstable { index: usize },

    #[error("time {0} is not a recorded slice")]
    NotASlice(f64),

    #[error("paraboloid ratio h/rho = {ratio} exceeds {limit}")]
    RatioViolated { ratio: f64, limit: f64 },

    #[error("nesting fails between balls {outer} and {inner}")]
    NotNested { outer: usize, inner: usize },

    #[error("width net has valuation {slope}, sharp norm 1 is unattainable")]
    ConditionE { slope: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
