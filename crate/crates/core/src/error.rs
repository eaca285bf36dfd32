use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polynomial order {0}: need N >= 1")]
    InvalidOrder(usize),

    #[error("order {0} has no interior LGL nodes: need N >= 2")]
    NoInteriorNodes(usize),

    #[error("point {point:?} lies outside the domain {lo:?}..{hi:?}")]
    OutOfDomain {
        point: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },

    #[error("degenerate rectangle: [{x_lo}, {x_hi}] x [{y_lo}, {y_hi}]")]
    DegenerateDomain { x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64 },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("quadrature order {got} too low for basis with max index {max_index}: need >= {needed}")]
    InsufficientQuadrature {
        got: usize,
        needed: usize,
        max_index: usize,
    },

    #[error("operation requires the cubic nonlinearity, got `{0}`")]
    WrongNonlinearity(String),

    #[error("unknown nonlinearity `{0}`")]
    UnknownNonlinearity(String),

    #[error("dense Jacobian requested for N = {0} (limit {1})")]
    TooLarge(usize, usize),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("singular Jacobian at Newton iteration {iteration}: pivot {pivot:.3e} below threshold {threshold:.3e}")]
    SingularJacobian {
        iteration: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("Newton failed to converge after {iterations} iterations (last residual {last_residual:.3e})")]
    NotConverged {
        iterations: usize,
        last_residual: f64,
        /// Residual norm after each iteration, starting with the initial residual.
        history: Vec<f64>,
        /// Final iterate, column-major interior nodal values.
        last_iterate: Box<nalgebra::DMatrix<f64>>,
    },

    #[error("continuation failed at parameter {parameter}: {source}")]
    Continuation {
        parameter: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
