//! Nipah virus transmission model with treatment and time-dependent controls.
//!
//! - [`model`]: parameters, compartments and the three right-hand sides
//! - [`analysis`]: equilibria, reproduction numbers, spectra, Lyapunov checks
//! - [`integrator`]: fixed-step RK4 forward and backward, trapezoid quadrature
//! - [`trajectory`]: node-aligned time series and simulation
//! - [`control`]: Hamiltonian, costates, control characterization, sweep solver
//! - [`scenario`], [`io`], [`chart`], [`sweep`]: configuration and output

pub mod analysis;
pub mod chart;
pub mod control;
pub mod error;
pub mod integrator;
pub mod io;
pub mod model;
pub mod scenario;
pub mod sweep;
pub mod trajectory;

pub use error::{Error, ErrorKind, Result};
pub use integrator::TimeGrid;
pub use model::{
    ControlBounds, ControlVector, Mixing, ModelVariant, ObjectiveWeights, Params, State,
};
pub use scenario::{load_scenario, load_scenario_with_overrides, Mode, Scenario};
pub use trajectory::{simulate, Dynamics, Trajectory};
