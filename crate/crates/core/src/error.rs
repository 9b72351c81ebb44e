use thiserror::Error;

/// Errors raised while building fields, factorizing propagators or integrating.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },

    /// `|Re Δf|` exceeded the overflow guard; `e^{±Δf/2}` would not be representable
    /// with useful precision.
    #[error("|Re Δf| = {value} exceeds the overflow guard at t = {t}")]
    Range { t: f64, value: f64 },

    #[error("driving field vanishes at t = {t} (|R| = {magnitude:e})")]
    SingularField { t: f64, magnitude: f64 },

    /// The factorization breaks down: a zero of φ or of a closed-form denominator.
    #[error("factorization is singular at t = {t}: {what}")]
    Singularity { t: f64, what: &'static str },

    #[error("oscillator solution is not paired with the field: {0}")]
    InvalidPairing(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("field synthesis failed: {0}")]
    Synthesis(String),

    #[error("degenerate family: {0}")]
    DegenerateFamily(String),

    #[error("integrator step size underflow at t = {t}")]
    Stiffness { t: f64 },

    #[error("adaptive quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
