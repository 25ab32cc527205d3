use thiserror::Error;

/// Errors raised by the lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("matrix is not hyperbolic: {0}")]
    NotHyperbolic(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("zero vector has no cone ratio")]
    ZeroVector,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("direction did not converge (gap {gap:.3e})")]
    NotConverged { gap: f64 },
    #[error("refinement budget exhausted on parameter interval [{t_lo:.6e}, {t_hi:.6e}]")]
    RefinementBudget { t_lo: f64, t_hi: f64 },
    #[error("no admissible subcurve: {0}")]
    NoSubcurve(String),
    #[error("precision exhausted at generation {generation}; increase bits")]
    PrecisionExhausted { generation: u32 },
    #[error("no lattice solution within radius {radius}; minimal radius {min_radius:.4}")]
    SearchRadiusExhausted { radius: f64, min_radius: f64 },
    #[error("point is not on the expected leaf (offset {offset:.3e})")]
    NotOnLeaf { offset: f64 },
    #[error("curves do not intersect")]
    NoIntersection,
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: Box<LabError> },
}

impl LabError {
    /// Tags the error with the pipeline stage that raised it.
    pub fn at(self, stage: &'static str) -> LabError {
        LabError::Stage { stage, source: Box::new(self) }
    }
}
