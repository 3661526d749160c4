use thiserror::Error;

use crate::scalar::Rational;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("series order must be positive")]
    EmptySeries,

    #[error("series has zero multiplier and is not invertible")]
    ZeroMultiplier,

    #[error("multiplier must be -1, got {0}")]
    NotReversingMultiplier(String),

    #[error("root multiplier squared ({mu_sq}) does not match multiplier {multiplier}")]
    RootMultiplierMismatch { mu_sq: String, multiplier: String },

    #[error("resonant multiplier {0}: linearization requires |lambda| != 0, 1")]
    Resonant(String),

    #[error("series is the identity to order {0}; deviation index undefined")]
    IdentitySeries(usize),

    #[error("series do not commute to order {0}")]
    NotCommuting(usize),

    #[error("nonlinear constraint on free coefficients at index {0}")]
    NonlinearConstraint(usize),

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// The value exists but is not representable in an exact carrier.
    #[error("not exactly representable: {0}")]
    Inexact(String),

    #[error("not smooth: {0}")]
    NonSmooth(String),

    #[error("root finding failed: {0}")]
    NoConvergence(String),

    #[error("invalid diffeomorphism spec: {0}")]
    InvalidSpec(String),

    #[error("degree mismatch: declared {declared}, observed {observed}")]
    DegreeMismatch { declared: i8, observed: i8 },

    #[error("not a diffeomorphism: {0}")]
    NotDiffeomorphism(String),

    #[error("fixed point check failed: {0}")]
    FixedPoint(String),

    #[error("not an involution: {0}")]
    NotInvolution(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub fn multiplier_mismatch(mu: &Rational, multiplier: &Rational) -> Self {
        Error::RootMultiplierMismatch {
            mu_sq: (mu * mu).to_string(),
            multiplier: multiplier.to_string(),
        }
    }
}
