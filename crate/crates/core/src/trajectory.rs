//! The time-series exchange type and state-space simulation on top of the
//! generic integrator.

use serde::Serialize;

use crate::control::AdjointState;
use crate::error::{Error, Result};
use crate::integrator::{quadrature, rk4_forward, rk4_forward_driven, TimeGrid};
use crate::model::{rhs_controlled, rhs_full, rhs_treatment_free, ControlVector, Params, State};

/// Node-aligned samples of a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<State>,
    pub controls: Option<Vec<ControlVector>>,
    pub adjoints: Option<Vec<AdjointState>>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, states: Vec<State>) -> Result<Self> {
        let traj = Trajectory {
            grid,
            states,
            controls: None,
            adjoints: None,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn with_controls(mut self, controls: Vec<ControlVector>) -> Result<Self> {
        self.controls = Some(controls);
        self.validate()?;
        Ok(self)
    }

    pub fn with_adjoints(mut self, adjoints: Vec<AdjointState>) -> Result<Self> {
        self.adjoints = Some(adjoints);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.grid.len();
        let lens = [
            Some(self.states.len()),
            self.controls.as_ref().map(Vec::len),
            self.adjoints.as_ref().map(Vec::len),
        ];
        for got in lens.into_iter().flatten() {
            if got != expected {
                return Err(Error::LengthMismatch { expected, got });
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// One compartment as a series, by index into `(S, E, I, T, R)`.
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|x| x.to_array()[index]).collect()
    }

    pub fn infected(&self) -> Vec<f64> {
        self.states.iter().map(|x| x.i).collect()
    }

    pub fn peak_infected(&self) -> f64 {
        self.states
            .iter()
            .map(|x| x.i)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `integral of I dt` over the grid.
    pub fn cumulative_infected(&self) -> f64 {
        quadrature(&self.infected(), &self.grid).expect("validated trajectory")
    }

    pub fn final_state(&self) -> State {
        *self
            .states
            .last()
            .expect("trajectory has at least one node")
    }

    pub fn invariant_report(&self, p: &Params) -> InvariantReport {
        InvariantReport::evaluate(self, p)
    }
}

/// Numerical positivity and invariant-region diagnostics, in units of `pi/mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantReport {
    /// `min_{t, k} x_k(t) / (pi/mu)`.
    pub min_component_ratio: f64,
    /// `max_t N(t) / (pi/mu)`.
    pub max_total_ratio: f64,
    /// Whether `N(0) <= pi/mu`, the precondition of the region check.
    pub starts_in_region: bool,
    pub positivity_ok: bool,
    pub region_ok: bool,
}

impl InvariantReport {
    pub const POSITIVITY_SLACK: f64 = 1e-9;
    pub const REGION_SLACK: f64 = 1e-9;

    fn evaluate(traj: &Trajectory, p: &Params) -> Self {
        let cap = p.carrying_capacity();
        let min_component_ratio = traj
            .states
            .iter()
            .flat_map(|x| x.to_array())
            .fold(f64::INFINITY, f64::min)
            / cap;
        let max_total_ratio = traj
            .states
            .iter()
            .map(State::total)
            .fold(f64::NEG_INFINITY, f64::max)
            / cap;
        let starts_in_region = traj.states[0].total() <= cap;
        InvariantReport {
            min_component_ratio,
            max_total_ratio,
            starts_in_region,
            positivity_ok: min_component_ratio >= -Self::POSITIVITY_SLACK,
            region_ok: !starts_in_region || max_total_ratio <= 1.0 + Self::REGION_SLACK,
        }
    }
}

/// Which right-hand side a simulation integrates.
#[derive(Debug, Clone, Copy)]
pub enum Dynamics<'a> {
    TreatmentFree,
    Full,
    /// Controlled system with a constant control vector.
    FixedControls(ControlVector),
    /// Controlled system with a node-aligned control schedule.
    Controlled(&'a [ControlVector]),
}

/// Integrates the chosen system from `x0` over `grid` with RK4.
pub fn simulate(
    p: &Params,
    x0: &State,
    grid: &TimeGrid,
    dynamics: Dynamics<'_>,
) -> Result<Trajectory> {
    fn write(dx: &mut [f64], d: Result<State>) -> Result<()> {
        dx.copy_from_slice(&d?.to_array());
        Ok(())
    }
    let x0_arr = x0.to_array();
    let samples = match dynamics {
        Dynamics::TreatmentFree => {
            let mut x0 = x0_arr;
            x0[3] = 0.0;
            rk4_forward(
                |_, x, dx| write(dx, rhs_treatment_free(p, &State::from_slice(x))),
                &x0,
                grid,
            )?
        }
        Dynamics::Full => rk4_forward(
            |_, x, dx| write(dx, rhs_full(p, &State::from_slice(x))),
            &x0_arr,
            grid,
        )?,
        Dynamics::FixedControls(u) => rk4_forward(
            |_, x, dx| write(dx, rhs_controlled(p, &State::from_slice(x), &u)),
            &x0_arr,
            grid,
        )?,
        Dynamics::Controlled(schedule) => {
            let drive: Vec<Vec<f64>> = schedule.iter().map(|u| u.to_array().to_vec()).collect();
            rk4_forward_driven(
                |_, x, d, dx| {
                    let u = ControlVector::new(d[0], d[1], d[2]);
                    write(dx, rhs_controlled(p, &State::from_slice(x), &u))
                },
                &x0_arr,
                grid,
                &drive,
            )?
        }
    };
    let states = samples.iter().map(|x| State::from_slice(x)).collect();
    let traj = Trajectory::new(*grid, states)?;
    match dynamics {
        Dynamics::FixedControls(u) => traj.with_controls(vec![u; grid.len()]),
        Dynamics::Controlled(schedule) => traj.with_controls(schedule.to_vec()),
        _ => Ok(traj),
    }
}
