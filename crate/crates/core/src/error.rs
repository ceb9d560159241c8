use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("control index {index} out of range (control set has {len} entries)")]
    InvalidControl { index: usize, len: usize },

    #[error("non-finite dynamics or cost at x = {x:?}")]
    SingularDynamics { x: Vec<f64> },

    #[error("negative Lagrangian {value} at x = {x:?}, control #{control}")]
    NegativeLagrangian { x: Vec<f64>, control: usize, value: f64 },

    #[error("no smooth piece of the candidate is active at x = {x:?}")]
    NoActivePiece { x: Vec<f64> },

    #[error("Hamiltonian inequality violated at {count} sample(s); worst H = {worst:e} at x = {x:?}")]
    Violation { count: usize, worst: f64, x: Vec<f64> },

    #[error("candidate is not positive definite: U(x) = {value} at x = {x:?}")]
    PositiveDefiniteness { x: Vec<f64>, value: f64 },

    #[error("sublevel set U <= {sigma} is not contained in the sampling box (U = {value} at boundary node {x:?})")]
    Unbounded { x: Vec<f64>, value: f64, sigma: f64 },

    #[error("decrease modulus cannot be built: {0}")]
    Modulus(String),

    #[error("integrability of 1/mu fails on ]0, {delta}]: {reason}")]
    Integrability { delta: f64, reason: String },

    #[error("no feedback achieves the unit decrease at x = {x:?}; best quotient {best}")]
    FeedbackGap { x: Vec<f64>, best: f64 },

    #[error("step size collapsed below {min_step:e} at x = {x:?} (U = {value})")]
    StepCollapse { x: Vec<f64>, value: f64, min_step: f64 },

    #[error("state x = {x:?} has U = {value}, outside the certified band (sigma = {sigma})")]
    OutOfBand { x: Vec<f64>, value: f64, sigma: f64 },

    #[error("piecewise-linear function is not invertible: {0}")]
    NotInvertible(String),

    #[error("value iteration did not converge after {sweeps} sweeps (last change {last_change:e})")]
    NonConvergence { sweeps: usize, last_change: f64 },
}
