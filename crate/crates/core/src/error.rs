use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is within the equator cutoff of the hemisphere (last coordinate {last:e})")]
    NearEquator { last: f64 },

    #[error("point maps to infinity")]
    AtInfinity,

    #[error("atom {atom} of mass {mass:?} lies on a region boundary")]
    AtomOnBoundary { mass: String, atom: usize },

    #[error("projected reference mass is concentrated in a single direction ({fraction:.6} of total)")]
    DegenerateProjection { fraction: f64 },

    #[error("no bisecting half-angle: the monotone search bracket collapsed")]
    NoBisection,

    #[error("residual blocks do not match the shift ({0})")]
    BlockMismatch(String),

    #[error("sample {index} has norm below 1e-12")]
    ZeroVector { index: usize },

    #[error("angular step {step:.4} rad between samples {index} and {next} is at least π/2")]
    Aliasing { index: usize, next: usize, step: f64 },

    #[error("map is near zero at a mesh vertex (norm {norm:e})")]
    NearZero { norm: f64 },

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse { line: usize, field: String, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {d}: {reason}")]
    UnsupportedDimension { d: usize, reason: String },

    #[error("point sets are not in general position: {0}")]
    GeneralPositionViolation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
