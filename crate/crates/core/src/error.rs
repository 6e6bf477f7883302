use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (value {value_re:e}{value_im:+e}i, error estimate {error_estimate:e})"
    )]
    NonConvergence {
        value_re: f64,
        value_im: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    #[error("integrand violates conjugate symmetry at ({x}, {y}): relative deviation {deviation:e}")]
    SymmetryViolation { x: f64, y: f64, deviation: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),

    #[error("Re z = {re} lies outside the admissible strip ({lo}, {hi})")]
    OutOfStrip { re: f64, lo: f64, hi: f64 },

    #[error("complex branch cut reached while evaluating {0}")]
    BranchFailure(&'static str),

    #[error("degenerate model: kappa(2) - 2 kappa(1) = {0:e}")]
    DegenerateModel(f64),

    #[error("finite-difference derivative unstable: {0}")]
    NumericalInstability(String),

    #[error("gamma function pole at {0}")]
    PoleError(f64),

    #[error("abscissa R = {0} is not admissible for this payoff")]
    InvalidAbscissa(f64),

    #[error("integral should be real but has imaginary part {im:e} (real part {re:e})")]
    NonRealResult { re: f64, im: f64 },

    #[error("pricing model is not a martingale: kappa(1) = {0:e}")]
    NotMartingale(f64),

    #[error("pricing model has no Brownian component; pass an integrability waiver to proceed")]
    NoBrownianComponent,

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid hedging problem: {0}")]
    InvalidProblem(String),

    #[error("negative mean squared error {mse:e} exceeds quadrature error {quad_error:e}")]
    NegativeMse { mse: f64, quad_error: f64 },

    #[error("no volatility in [{lo}, {hi}] reproduces the target price {target}")]
    NoBracket { lo: f64, hi: f64, target: f64 },

    #[error("exact increment sampling is not available for {0}")]
    UnsupportedModel(&'static str),

    #[error("hedge-ratio table interpolation error {max_error:e} exceeds {tolerance:e}")]
    TableAccuracy { max_error: f64, tolerance: f64 },

    #[error("invalid simulation configuration: {0}")]
    InvalidSimulation(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_usage_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidParameters(_)
                | Error::OutOfStrip { .. }
                | Error::InvalidAbscissa(_)
                | Error::NotMartingale(_)
                | Error::NoBrownianComponent
                | Error::InvalidStrategy(_)
                | Error::InvalidProblem(_)
                | Error::UnsupportedModel(_)
                | Error::InvalidSimulation(_)
                | Error::DegenerateModel(_)
        )
    }
}
