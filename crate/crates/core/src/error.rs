use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error(
        "ellipticity violated at y = {point:?}, ξ = {direction:?}: Rayleigh quotient {quotient} outside [{lower}, {upper}]"
    )]
    Ellipticity {
        point: Vec<f64>,
        direction: Vec<f64>,
        quotient: f64,
        lower: f64,
        upper: f64,
    },

    #[error("coefficient field is not block-diagonal in the last variable")]
    NotBlockStructured,

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("operator lost positivity after {iterations} iterations; field is not elliptic")]
    NonElliptic { iterations: usize },

    #[error("homogenized eigenvalue {eigenvalue} outside the band [{lower}, {upper}]")]
    BandViolation { eigenvalue: f64, lower: f64, upper: f64 },

    #[error("mesh size h = {h} violates h ≤ ε/8 for ε = {eps}")]
    MeshResolution { h: f64, eps: f64 },

    #[error("shifted operator is near-singular (Ritz ratio {ratio:e})")]
    NearSingular { ratio: f64 },

    #[error("point {0:?} is not inside the open ellipsoid")]
    OutsideEllipsoid(Vec<f64>),

    #[error("point {0:?} is not on the ellipsoid boundary")]
    OffBoundary(Vec<f64>),

    #[error("region contains no mesh nodes")]
    EmptyRegion,

    #[error("odd reflection needs a vanishing flat trace; found {0:e}")]
    NonzeroFlatTrace(f64),

    #[error("exponent β = {0} is not positive (need R₂ < λR₃/2)")]
    NonPositiveExponent(f64),

    #[error("chain center {index} at {center:?} leaves the solution domain")]
    ChainExitsDomain { index: usize, center: Vec<f64> },

    #[error("artifact mismatch in `{field}`: expected {expected}, found {found}")]
    Mismatch { field: String, expected: String, found: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
