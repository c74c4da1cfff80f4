use thiserror::Error;

use crate::lorentz::ValidityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid metric signature ({minus},{plus})")]
    InvalidSignature { minus: usize, plus: usize },

    #[error("matrix is not an orthochronous Lorentz transformation: {0:?}")]
    NotLorentz(Box<ValidityReport>),

    #[error("invalid cone tag k={0}; expected 0, 1 or -1")]
    InvalidConeKind(i64),

    #[error("point is not on the unit sphere (|z| - 1 = {0:e})")]
    NotUnit(f64),

    #[error("stereographic projection is undefined at the pole z1 = 1")]
    Pole,

    #[error("dilation factor must be nonzero")]
    ZeroDilation,

    #[error("matrix is not orthogonal (max |B^T B - I| = {0:e})")]
    NotOrthogonal(f64),

    #[error("non-positive Möbius denominator {0:e}; matrix is not orthochronous")]
    NonPositiveDenominator(f64),

    #[error("point is not on the light cone L+^({kind}) (residuals: cone {cone:e}, slice {slice:e}, time {time})")]
    NotOnCone {
        kind: i8,
        cone: f64,
        slice: f64,
        time: f64,
    },

    #[error("invalid grid chart: {0}")]
    InvalidChart(String),

    #[error("invalid metric field: {0}")]
    InvalidMetric(String),

    #[error("conformal factor is non-positive at node {node} (c = {value:e})")]
    NonPositiveFactor { node: usize, value: f64 },

    #[error(
        "map is not conformal with respect to the metric (residual {residual:e} > {tolerance:e})"
    )]
    NotConformal { residual: f64, tolerance: f64 },

    #[error("invalid correspondence set: {0}")]
    InvalidCorrespondence(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
