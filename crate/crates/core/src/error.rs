use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coefficient evaluation failed at x = {x}: {what}")]
    CoefficientDomain { x: f64, what: &'static str },

    #[error("order v = {0} is outside the integral representation (requires v < 0)")]
    OrderDomain(f64),

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {subdivisions} subdivisions")]
    QuadratureNonConvergence { estimate: f64, error: f64, subdivisions: usize },

    #[error("parameter b = {0} is a pole (non-positive integer)")]
    ParameterPole(f64),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("no closed-form eigenfunctions for {0}")]
    UnsupportedFamily(String),

    #[error("ODE integration failed at x = {x}: {reason}")]
    IntegrationFailure { x: f64, reason: String },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("points must satisfy x < y < z, got ({x}, {y}, {z})")]
    Ordering { x: f64, y: f64, z: f64 },

    #[error("no sign change of the barrier sensitivity below a_max = {a_max} (last value {last_value:e})")]
    NoBracket { a_max: f64, last_value: f64 },

    #[error("degenerate denominator W12(0, {a}) = {value:e}")]
    Degenerate { a: f64, value: f64 },

    #[error("invalid simulation config: {0}")]
    Config(String),
}
