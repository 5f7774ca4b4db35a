use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FblError {
    #[error("invalid channel point: {0}")]
    InvalidPoint(String),

    #[error("tilt {zeta} outside the CGF domain [0, {domain_max})")]
    Domain { zeta: f64, domain_max: f64 },

    #[error("saddlepoint equation has no root below the domain edge {domain_max} for rate {rate}")]
    ExponentUnreachable { rate: f64, domain_max: f64 },

    #[error("Monte Carlo needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("metric parameter s must be positive and finite, got {0}")]
    InvalidS(f64),
}
