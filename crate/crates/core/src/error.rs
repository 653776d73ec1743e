use thiserror::Error;

use crate::integrator::State;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// F(v) left the normal floating range; the caller must continue in the
    /// phase-plane (v-parameterised) representation.
    #[error("nonlinearity saturated at v = {v} (limit {limit}); switch to the phase-plane representation")]
    Saturation { v: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no finite explosion: {0}")]
    NoFiniteExplosion(String),

    #[error("root polishing failed in bracket [{lo}, {hi}]")]
    RootPolish { lo: f64, hi: f64 },

    #[error("stiffness failure at t = {}, v = {}, w = {} (dt fell below {dt_min})", .state.t, .state.v, .state.w)]
    Stiffness { state: State, dt_min: f64 },

    #[error("step budget of {max_steps} exhausted at t = {}", .state.t)]
    StepBudget { state: State, max_steps: usize },

    #[error("captured by rest state: no spiking-zone entry before t = {t}")]
    CapturedByRest { t: f64 },

    #[error("left spiking zone at v = {v}: denominator {denominator} below {floor}")]
    LeftSpikingZone { v: f64, denominator: f64, floor: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}] (error estimate {estimate:e})")]
    Quadrature { lo: f64, hi: f64, estimate: f64 },

    #[error("precondition violated: denominator F(u) - b u + I has a root near u = {u}")]
    DenominatorRoot { u: f64 },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("insufficient data: need more than {required} spikes, got {available}")]
    InsufficientData { required: usize, available: usize },

    #[error("oracle budget exhausted: {0}")]
    OracleBudget(String),
}
