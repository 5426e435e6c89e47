use thiserror::Error;

/// Errors raised by the geometry, operator and Fitzpatrick layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitzError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("point is within tolerance of the set; no separating functional exists")]
    NotSeparable,

    #[error("no closed-form resolvent: {0}")]
    NoClosedForm(String),

    #[error("operator given by a finite graph is not maximal; no resolvent")]
    NotMaximal,

    #[error("z lies within tolerance of a sampled domain point; quotient undefined")]
    ZOnDomain,

    #[error("domain projection is vacuous for finite graphs (F_A is finite everywhere)")]
    VacuousForFiniteGraph,

    #[error("invalid operator: {0}")]
    InvalidSpec(String),

    #[error("grid has {count} nodes, above the cap of {cap}")]
    GridTooLarge { count: usize, cap: usize },

    #[error("resolvent residual {residual:e} exceeds tolerance at w = {w:?}")]
    ResidualTooLarge { residual: f64, w: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, FitzError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(FitzError::DimensionMismatch { expected, got })
    }
}
