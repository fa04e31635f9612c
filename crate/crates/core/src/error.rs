use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Variants split into two families: bad input (geometry, configuration,
/// contract violations) and numerical failure (factorization, branch
/// tracking). [`Error::is_numerical`] tells them apart; the CLI maps the
/// former to exit code 2 and the latter to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh is not watertight: {0}")]
    NotWatertight(String),

    #[error("mesh orientation is inverted (signed volume {volume:.6e} <= 0)")]
    InvertedOrientation { volume: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("normal perturbation with h = {h} breaks the embedding: {reason}")]
    Embedding { h: f64, reason: String },

    #[error("field {field} is not defined in dimension {dim}")]
    IncompatibleField { field: String, dim: usize },

    #[error("field amplitude {max:.6} exceeds the unit bound")]
    FieldAmplitude { max: f64 },

    #[error("resolution {got} is below the minimum {min}")]
    Resolution { got: usize, min: usize },

    #[error("Cholesky factorization of the Gram matrix failed: {0}")]
    Cholesky(String),

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("eigenvalue {lambda} is excluded from the variational formula")]
    ExcludedEigenvalue { lambda: f64 },

    #[error("branch tracking failed at h = {h}: overlap {overlap:.3} below 0.5")]
    BranchTracking { h: f64, overlap: f64 },

    #[error("point is too close to the boundary (distance {distance:.3e}, local panel size {panel_size:.3e})")]
    NearField { distance: f64, panel_size: f64 },

    #[error("point lies inside the domain (winding number {winding:.3})")]
    InteriorPoint { winding: f64 },

    #[error("interval endpoint {endpoint} is within tolerance of eigenvalue {eigenvalue}")]
    IllPosedInterval { endpoint: f64, eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (relative residual {residual:.3e})")]
    NotSymmetric { residual: f64 },
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Cholesky(_)
                | Error::NonFinite(_)
                | Error::Eigensolver(_)
                | Error::BranchTracking { .. }
        )
    }

    /// Short machine-readable tag used in JSON error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotWatertight(_) => "not_watertight",
            Error::InvertedOrientation { .. } => "inverted_orientation",
            Error::Degenerate(_) => "degenerate",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Embedding { .. } => "embedding",
            Error::IncompatibleField { .. } => "incompatible_field",
            Error::FieldAmplitude { .. } => "field_amplitude",
            Error::Resolution { .. } => "resolution",
            Error::Cholesky(_) => "cholesky",
            Error::NonFinite(_) => "non_finite",
            Error::Eigensolver(_) => "eigensolver",
            Error::Unsupported(_) => "unsupported",
            Error::ExcludedEigenvalue { .. } => "excluded_eigenvalue",
            Error::BranchTracking { .. } => "branch_tracking",
            Error::NearField { .. } => "near_field",
            Error::InteriorPoint { .. } => "interior_point",
            Error::IllPosedInterval { .. } => "ill_posed_interval",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotSymmetric { .. } => "not_symmetric",
        }
    }
}
