use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mode mismatch: operator acts on {expected} mode(s), state has {found}")]
    ModeMismatch { expected: usize, found: usize },

    #[error("truncation overflow: {mass:.3e} probability at the top of the retained space (tolerance {tolerance:.1e})")]
    TruncationOverflow { mass: f64, tolerance: f64 },

    #[error("not symplectic: |mu|^2 - |nu|^2 - 1 = {defect:.3e}")]
    NotSymplectic { defect: f64 },

    #[error("quadrature grid is empty")]
    GridEmpty,

    #[error("step too large: conserved quantity drifted by {drift:.3e} (relative)")]
    StepTooLarge { drift: f64 },

    #[error("norm drift {drift:.3e} exceeds tolerance")]
    NormDrift { drift: f64 },

    #[error("frame inconsistent: residual {order}-order coefficient {magnitude:.3e} on mode {mode}")]
    FrameInconsistent { mode: usize, order: usize, magnitude: f64 },

    #[error("regime violation: {0}")]
    RegimeViolation(String),

    #[error("outcome density {density:.3e} is effectively zero")]
    ZeroDensity { density: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
