use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid body: {0}")]
    InvalidBody(String),
    #[error("point ({0}, {1}) lies strictly inside the body")]
    InsideBody(f64, f64),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("support hull is degenerate ({0})")]
    DegenerateHull(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("support of the measure leaves the grid")]
    OutOfGrid,
    #[error("point ({0}, {1}) is outside the field domain")]
    OutsideDomain(f64, f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("ray from ({0}, {1}) leaves the grid before crossing the boundary")]
    UnboundedRay(f64, f64),
    #[error("level {level} is not below the ray start value {start}")]
    LevelAboveRay { level: f64, start: f64 },
    #[error("free boundary collapsed onto the support hull (clearance {clearance:e})")]
    Collapse { clearance: f64 },
    #[error("free-boundary iteration diverged at iteration {iteration}")]
    Divergence { iteration: usize, history: Vec<f64> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
