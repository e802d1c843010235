use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite evaluation: {0}")]
    NonFiniteEvaluation(String),
    #[error("singular matrix (reciprocal condition {rcond:.3e})")]
    SingularMatrix { rcond: f64 },
    #[error("singular constrained system: {0}")]
    SingularConstrainedSystem(String),
    #[error("state is off the constraint (residual {residual:.3e})")]
    OffConstraint { residual: f64 },
    #[error("constraint jacobian has rank {rank}, expected {expected}")]
    RankDeficientConstraint { rank: usize, expected: usize },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("not of Chaplygin type: {0}")]
    NotChaplyginType(String),
    #[error("section leaves the constraint distribution (residual {residual:.3e})")]
    SectionNotInKD { residual: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("step failure at t = {t}: {source}")]
    StepFailure { t: f64, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
