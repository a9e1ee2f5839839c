use thiserror::Error;

/// Failures raised across the solver pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integrator has zero range on [{a}, {b}]")]
    DegenerateIntegrator { a: f64, b: f64 },

    #[error("adaptive quadrature did not reach tolerance after {subdivisions} subdivisions (error estimate {estimate:e})")]
    QuadratureFailure { subdivisions: usize, estimate: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("integral condition on derivative order {order} with a jump-bearing weight must be given in canonical form")]
    UnsupportedWeight { order: usize },

    #[error("ODE integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("t = {t} lies outside [{a}, {b}]")]
    OutOfDomain { t: f64, a: f64, b: f64 },

    #[error("boundary matrix is numerically singular (condition estimate {condition:e}); the homogeneous problem has a nontrivial solution")]
    NotUniquelySolvable { condition: f64 },

    #[error("reference problem could not be solved: {0}")]
    ReferenceUnsolvable(Box<Error>),

    #[error("perturbation exceeds epsilon = {epsilon:e}: {which} distance {distance:e}")]
    PerturbationTooLarge {
        epsilon: f64,
        which: &'static str,
        distance: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
