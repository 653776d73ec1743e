//! Simulation and analysis of nonlinear adaptive integrate-and-fire neurons.
//!
//! The membrane potential of these models blows up in finite time and a
//! spike is declared when it reaches a cutoff `theta`. Whether the
//! adaptation variable also diverges at that moment (quadratic `F`) or
//! converges (quartic and exponential `F`) decides how sensitive the spike
//! pattern is to the choice of cutoff. This crate provides:
//!
//! - [`model`]: nonlinearities, vector field, equilibria, analytic blow-up times;
//! - [`integrator`]: adaptive time stepping through blow-up, cutoff events and resets;
//! - [`phase_plane`]: the orbit graph `W(v)` and its lower/upper envelopes;
//! - [`spike_analysis`]: reset-sequence classification and firing rates;
//! - [`bifurcation`]: cutoff sweeps, rate curves and divergence profiles;
//! - [`oracle`]: an independent reference integrator and quadrature.

mod dopri;
pub mod error;
pub mod integrator;
pub mod model;
pub mod phase_plane;
pub mod quadrature;
pub mod spike_analysis;
pub mod bifurcation;
pub mod oracle;

pub use error::{Error, Result};
