use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A pulse list violates `0 < d_1 < ... < d_n < 1`.
    #[error("invalid pulse instant at index {index}: {reason}")]
    InvalidInstant { index: usize, reason: String },

    /// A sequence spec string could not be parsed.
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested closed form does not exist for this family or parity.
    #[error("no closed form for {0}")]
    UnsupportedClosedForm(String),

    /// The frequency integral does not converge for this bath.
    #[error("divergent configuration: {0}")]
    Divergent(String),

    /// Adaptive quadrature ran out of panels before meeting its tolerance.
    #[error("quadrature did not converge: estimate {value:e} with error {error:e} after {panels} panels")]
    Quadrature {
        value: f64,
        error: f64,
        panels: usize,
    },

    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    /// `advance` was called past the final stage of the sequence.
    #[error("stage {stage} cannot be advanced: sequence has {pulses} pulses")]
    StageOverflow { stage: usize, pulses: usize },

    /// Exact rational arithmetic was requested for irrational instants.
    #[error("exact arithmetic unavailable: {0}")]
    NotRational(String),

    /// The working precision cannot resolve the vanishing coefficients.
    #[error(
        "precision too low: {digits} digits leave only {separation:.1} orders of magnitude \
         between the pass threshold and the coefficient scale; use at least {suggested} digits"
    )]
    PrecisionTooLow {
        digits: u32,
        separation: f64,
        suggested: u32,
    },
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidInstant { .. }
                | Error::Parse { .. }
                | Error::InvalidArgument(_)
                | Error::UnsupportedClosedForm(_)
                | Error::Divergent(_)
                | Error::NotRational(_)
                | Error::StageOverflow { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
