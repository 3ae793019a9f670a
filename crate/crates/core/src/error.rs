use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid model, supply or solver parameters.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A precondition of an operation does not hold for the given inputs.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no sign change bracketing {what} on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    BracketFailure {
        what: String,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// The fallback sign scan found more than one root; refusing to pick one.
    #[error("{what}: multiple sign changes found near {roots:?}")]
    MultipleRoots { what: String, roots: Vec<f64> },

    #[error("{what}: no convergence after {iterations} iterations (bracket width {width})")]
    ConvergenceFailure {
        what: String,
        iterations: usize,
        width: f64,
    },

    #[error("step size underflow at t = {t} (state {state:?})")]
    StepUnderflow { t: f64, state: Vec<f64> },

    #[error("integration exceeded {max_steps} steps at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("quadrature did not converge: successive refinements differ by {change} (tolerance {tolerance}) with {panels} panels")]
    QuadratureNonConvergence {
        change: f64,
        tolerance: f64,
        panels: usize,
    },

    #[error("periodic orbit search did not converge after {iterations} iterations (last residual {residual})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The sign of the mean proliferation rate is not resolved by the quadrature.
    #[error("ambiguous classification: |s_bar| = {s_bar_abs} is within the quadrature error {quad_error}")]
    AmbiguousClassification { s_bar_abs: f64, quad_error: f64 },
}

impl Error {
    /// True for errors raised by a numerical solver (as opposed to bad inputs).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::BracketFailure { .. }
                | Error::MultipleRoots { .. }
                | Error::ConvergenceFailure { .. }
                | Error::StepUnderflow { .. }
                | Error::TooManySteps { .. }
                | Error::QuadratureNonConvergence { .. }
                | Error::NonConvergence { .. }
        )
    }
}
