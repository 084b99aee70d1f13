//! Pontryagin necessary conditions for the controlled system and the
//! forward-backward sweep that solves them.
//!
//! With running cost `L = b1 E + b2 I + (w1 u1^2 + w2 u2^2 + w3 u3^2) / 2` the
//! Hamiltonian is `H = L + l . f(x, u)` where `f` is the controlled right-hand
//! side. The costates obey `l' = -dH/dx` with `l(tf) = 0`; the controls
//! minimize `H` pointwise over the admissible box. Both are derived from `H`
//! directly, so `adjoint_rhs` honours the mixing convention: under dynamic-N
//! the total population is differentiated through.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{quadrature, rk4_backward, TimeGrid};
use crate::model::{
    effective_population, rhs_controlled, ControlBounds, ControlVector, Mixing, ObjectiveWeights,
    Params, State,
};
use crate::trajectory::{simulate, Dynamics, Trajectory};

/// Costates, one per compartment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdjointState {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
}

impl AdjointState {
    pub const ZERO: AdjointState = AdjointState::new(0.0, 0.0, 0.0, 0.0, 0.0);
    pub const LABELS: [&'static str; 5] = ["l1", "l2", "l3", "l4", "l5"];

    pub const fn new(l1: f64, l2: f64, l3: f64, l4: f64, l5: f64) -> Self {
        AdjointState { l1, l2, l3, l4, l5 }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.l1, self.l2, self.l3, self.l4, self.l5]
    }

    pub fn from_slice(l: &[f64]) -> Self {
        AdjointState::new(l[0], l[1], l[2], l[3], l[4])
    }
}

fn running_cost(w: &ObjectiveWeights, x: &State, u: &ControlVector) -> f64 {
    w.b1 * x.e + w.b2 * x.i + 0.5 * (w.w1 * u.u1 * u.u1 + w.w2 * u.u2 * u.u2 + w.w3 * u.u3 * u.u3)
}

pub fn hamiltonian(
    p: &Params,
    w: &ObjectiveWeights,
    x: &State,
    u: &ControlVector,
    l: &AdjointState,
) -> Result<f64> {
    let f = rhs_controlled(p, x, u)?;
    let flow: f64 = l
        .to_array()
        .iter()
        .zip(f.to_array())
        .map(|(li, fi)| li * fi)
        .sum();
    Ok(running_cost(w, x, u) + flow)
}

/// Partial derivatives of the incidence `phi = (1 - u1) beta I S / N` with
/// respect to `(S, E, I, T, R)`.
fn incidence_gradient(p: &Params, x: &State, u1: f64) -> Result<[f64; 5]> {
    let n = effective_population(p, x)?;
    let c = (1.0 - u1) * p.beta;
    Ok(match p.mixing {
        Mixing::ConstantN => [c * x.i / n, 0.0, c * x.s / n, 0.0, 0.0],
        Mixing::DynamicN => {
            let dn = -c * x.i * x.s / (n * n);
            [c * x.i / n + dn, dn, c * x.s / n + dn, dn, dn]
        }
    })
}

/// Costate dynamics `l' = -dH/dx`.
pub fn adjoint_rhs(
    p: &Params,
    w: &ObjectiveWeights,
    x: &State,
    u: &ControlVector,
    l: &AdjointState,
) -> Result<AdjointState> {
    let phi = incidence_gradient(p, x, u.u1)?;
    let d = l.l1 - l.l2;
    let infected_out = p.eps1 + p.delta + p.mu + p.gamma + u.u2;
    let treated_out = p.nu + p.theta * p.delta + p.eps2 + p.mu + p.alpha + u.u3;
    Ok(AdjointState {
        l1: d * phi[0] + p.mu * l.l1,
        l2: -w.b1 + d * phi[1] + (p.sigma + p.mu) * l.l2 - p.sigma * l.l3,
        l3: -w.b2 + d * phi[2] + infected_out * l.l3 - (p.gamma + u.u2) * l.l4 - p.eps1 * l.l5,
        l4: d * phi[3] - p.nu * l.l3 + treated_out * l.l4 - (p.alpha + u.u3 + p.eps2) * l.l5,
        l5: d * phi[4] + p.mu * l.l5,
    })
}

/// `dH/du` at the given point.
pub fn control_gradient(
    p: &Params,
    w: &ObjectiveWeights,
    x: &State,
    u: &ControlVector,
    l: &AdjointState,
) -> Result<[f64; 3]> {
    let n = effective_population(p, x)?;
    let incidence = p.beta * x.i * x.s / n;
    Ok([
        w.w1 * u.u1 + (l.l1 - l.l2) * incidence,
        w.w2 * u.u2 - (l.l3 - l.l4) * x.i,
        w.w3 * u.u3 - (l.l4 - l.l5) * x.t,
    ])
}

/// Pointwise minimizer of `H` over the admissible box. `H` is a separable
/// quadratic in `u`, so this is the stationary point clamped to the bounds.
pub fn characterize_controls(
    p: &Params,
    w: &ObjectiveWeights,
    bounds: &ControlBounds,
    x: &State,
    l: &AdjointState,
) -> Result<ControlVector> {
    let n = effective_population(p, x)?;
    let incidence = p.beta * x.i * x.s / n;
    let stationary = [
        (l.l2 - l.l1) * incidence / w.w1,
        (l.l3 - l.l4) * x.i / w.w2,
        (l.l4 - l.l5) * x.t / w.w3,
    ];
    Ok(bounds.clamp(stationary))
}

/// Largest projected-gradient residual `|clamp(u - g/w) - u|` over the three
/// controls. Zero exactly when `u` satisfies the box-constrained stationarity
/// conditions.
pub fn stationarity_residual(
    p: &Params,
    w: &ObjectiveWeights,
    bounds: &ControlBounds,
    x: &State,
    u: &ControlVector,
    l: &AdjointState,
) -> Result<f64> {
    let g = control_gradient(p, w, x, u, l)?;
    let weights = w.control_weights();
    let u = u.to_array();
    let projected = bounds.clamp(std::array::from_fn(|k| u[k] - g[k] / weights[k]));
    Ok(projected
        .to_array()
        .iter()
        .zip(u)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Cost functional `J = integral over [t0, tf] of the running cost`.
pub fn objective(traj: &Trajectory, w: &ObjectiveWeights) -> Result<f64> {
    let controls = traj.controls.as_ref().ok_or(Error::MissingControls)?;
    let integrand: Vec<f64> = traj
        .states
        .iter()
        .zip(controls)
        .map(|(x, u)| running_cost(w, x, u))
        .collect();
    quadrature(&integrand, &traj.grid)
}

/// Solver knobs as they appear in scenario files; every field has a default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FbsSettings {
    pub relaxation: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub weights: ObjectiveWeights,
    pub bounds: ControlBounds,
}

impl Default for FbsSettings {
    fn default() -> Self {
        FbsSettings {
            relaxation: FbsConfig::DEFAULT_RELAXATION,
            tol: FbsConfig::DEFAULT_TOL,
            max_iters: FbsConfig::DEFAULT_MAX_ITERS,
            weights: ObjectiveWeights::default(),
            bounds: ControlBounds::default(),
        }
    }
}

impl FbsSettings {
    pub fn into_config(self, grid: TimeGrid) -> FbsConfig {
        FbsConfig {
            relaxation: self.relaxation,
            tol: self.tol,
            max_iters: self.max_iters,
            weights: self.weights,
            bounds: self.bounds,
            grid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbsConfig {
    /// Weight of the freshly characterized controls in the update.
    pub relaxation: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub weights: ObjectiveWeights,
    pub bounds: ControlBounds,
    pub grid: TimeGrid,
}

impl FbsConfig {
    pub const DEFAULT_RELAXATION: f64 = 0.5;
    pub const DEFAULT_TOL: f64 = 1e-3;
    pub const DEFAULT_MAX_ITERS: usize = 100;

    pub fn new(grid: TimeGrid) -> Self {
        FbsSettings::default().into_config(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        self.weights.validate()?;
        self.bounds.validate()?;
        self.grid.validate()
    }
}

#[derive(Debug, Clone)]
pub struct FbsResult {
    /// States, controls and costates of the final sweep, all node-aligned.
    pub trajectory: Trajectory,
    /// `J` of each forward pass, ending with the returned trajectory.
    pub objective_history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FbsResult {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().expect("at least one sweep")
    }
}

/// `tol * |new|_1 - |new - old|_1`; nonnegative when the change is small.
fn relative_change_margin(new: &[f64], old: &[f64], tol: f64) -> f64 {
    let norm: f64 = new.iter().map(|v| v.abs()).sum();
    let diff: f64 = new.iter().zip(old).map(|(a, b)| (a - b).abs()).sum();
    tol * norm - diff
}

fn flatten<const K: usize>(rows: impl Iterator<Item = [f64; K]>) -> Vec<f64> {
    rows.flatten().collect()
}

struct Sweep {
    traj: Trajectory,
    adjoints: Vec<AdjointState>,
}

fn forward_backward(
    p: &Params,
    x0: &State,
    cfg: &FbsConfig,
    controls: &[ControlVector],
    iteration: usize,
) -> Result<Sweep> {
    let diverged = |phase: &'static str| {
        move |e: Error| match e {
            Error::NonFinite { step } => Error::SweepDiverged {
                iteration,
                phase,
                step,
            },
            other => other,
        }
    };
    let traj =
        simulate(p, x0, &cfg.grid, Dynamics::Controlled(controls)).map_err(diverged("forward"))?;
    let frozen: Vec<Vec<f64>> = traj
        .states
        .iter()
        .zip(controls)
        .map(|(x, u)| x.to_array().into_iter().chain(u.to_array()).collect())
        .collect();
    let weights = cfg.weights;
    let samples = rk4_backward(
        |_, l, z, dl| {
            let x = State::from_slice(&z[..5]);
            let u = ControlVector::new(z[5], z[6], z[7]);
            let d = adjoint_rhs(p, &weights, &x, &u, &AdjointState::from_slice(l))?;
            dl.copy_from_slice(&d.to_array());
            Ok(())
        },
        &[0.0; 5],
        &cfg.grid,
        &frozen,
    )
    .map_err(diverged("backward"))?;
    let adjoints = samples
        .iter()
        .map(|l| AdjointState::from_slice(l))
        .collect();
    Ok(Sweep { traj, adjoints })
}

/// Forward-backward sweep: integrate the state forward under the current
/// controls, the costates backward from `l(tf) = 0`, characterize new controls
/// at every node and blend them with the old ones, until controls, states and
/// costates all stop changing relative to `tol`.
///
/// The returned trajectory is a final consistent sweep under the returned
/// controls. Hitting `max_iters` is reported through `converged = false`.
pub fn solve_fbs(p: &Params, x0: &State, cfg: &FbsConfig) -> Result<FbsResult> {
    p.validate()?;
    x0.validate()?;
    cfg.validate()?;

    let n = cfg.grid.len();
    let mut controls = vec![cfg.bounds.lower_controls(); n];
    let mut history = Vec::new();
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let sweep = forward_backward(p, x0, cfg, &controls, iterations)?;
        history.push(objective(&sweep.traj, &cfg.weights)?);

        let updated: Vec<ControlVector> = sweep
            .traj
            .states
            .iter()
            .zip(&sweep.adjoints)
            .zip(&controls)
            .map(|((x, l), old)| {
                let fresh = characterize_controls(p, &cfg.weights, &cfg.bounds, x, l)?;
                let (f, o) = (fresh.to_array(), old.to_array());
                Ok(ControlVector::from_array(std::array::from_fn(|k| {
                    cfg.relaxation * f[k] + (1.0 - cfg.relaxation) * o[k]
                })))
            })
            .collect::<Result<_>>()?;

        let states = flatten(sweep.traj.states.iter().map(|x| x.to_array()));
        let adjoints = flatten(sweep.adjoints.iter().map(|l| l.to_array()));
        let u_new = flatten(updated.iter().map(|u| u.to_array()));
        let u_old = flatten(controls.iter().map(|u| u.to_array()));
        controls = updated;

        if let Some((old_states, old_adjoints)) = &previous {
            let margin = relative_change_margin(&u_new, &u_old, cfg.tol)
                .min(relative_change_margin(&states, old_states, cfg.tol))
                .min(relative_change_margin(&adjoints, old_adjoints, cfg.tol));
            if margin >= 0.0 {
                converged = true;
                break;
            }
        }
        previous = Some((states, adjoints));
    }

    let last = forward_backward(p, x0, cfg, &controls, iterations + 1)?;
    let trajectory = last.traj.with_adjoints(last.adjoints)?;
    history.push(objective(&trajectory, &cfg.weights)?);
    Ok(FbsResult {
        trajectory,
        objective_history: history,
        converged,
        iterations,
    })
}
