use thiserror::Error;

use crate::semilinear::ContractionReport;

pub type Result<T, E = BbemError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BbemError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("kernel evaluated at coincident points")]
    Singularity,
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("mesh import failed at line {line}: {msg}")]
    Import { line: usize, msg: String },
    #[error("unsupported quadrature order {0} (expected one of 1, 3, 6, 12)")]
    UnsupportedOrder(usize),
    #[error("singular point lies off the panel (distance {0:e})")]
    OffPanel(f64),
    #[error("degenerate panel {index} (area {area:e})")]
    DegeneratePanel { index: usize, area: f64 },
    #[error("evaluation point {index} lies on the boundary (distance {distance:e})")]
    OnBoundary { index: usize, distance: f64 },
    #[error("size mismatch: {0}")]
    Mismatch(String),
    #[error("Dirichlet data violates the zero-flux condition: |<h, nu>| / (|h| |nu|) = {ratio:e} > {tol:e}")]
    FluxIncompatible { ratio: f64, tol: f64 },
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),
    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),
    #[error("invalid patch labeling: {0}")]
    InvalidLabeling(String),
    #[error("invalid manufactured source: {0}")]
    InvalidSource(String),
    #[error("fixed-point iteration left the contraction ball")]
    SmallnessViolated(Box<ContractionReport>),
    #[error("fixed-point iteration did not converge in {} iterations", .0.iterates.len())]
    NotConverged(Box<ContractionReport>),
    #[error("configuration error at {path}: {msg}")]
    Config { path: String, msg: String },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("unknown verification suite {0:?}")]
    UnknownSuite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BbemError {
    /// Process exit code: 2 for usage/configuration problems, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BbemError::Config { .. }
            | BbemError::UnknownSuite(_)
            | BbemError::Import { .. }
            | BbemError::Io(_)
            | BbemError::Json(_)
            | BbemError::Budget(_)
            | BbemError::InvalidSource(_)
            | BbemError::InvalidLabeling(_)
            | BbemError::UnsupportedParameter(_)
            | BbemError::UnsupportedOrder(_) => 2,
            _ => 1,
        }
    }
}
