//! Parameters, compartment state and the right-hand sides of the
//! treatment-free, full and controlled transmission systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the denominator of the force of infection is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    /// `N` is the fixed `n_total` parameter. Required by the threshold analysis.
    #[default]
    ConstantN,
    /// `N = S + E + I + T + R`, evaluated from the current state.
    DynamicN,
}

/// Which of the two uncontrolled systems an analysis refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// The reduced system with `T = theta = nu = gamma = alpha = 0`.
    TreatmentFree,
    /// The full five-compartment system.
    Treatment,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 2] = [ModelVariant::TreatmentFree, ModelVariant::Treatment];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::TreatmentFree => "treatment_free",
            ModelVariant::Treatment => "treatment",
        }
    }
}

/// Rate constants of the model. All rates are per model time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Recruitment rate (people per time unit).
    pub pi: f64,
    /// Transmission rate.
    pub beta: f64,
    /// Progression from exposed to infected.
    pub sigma: f64,
    /// Progression from infected to treatment.
    pub gamma: f64,
    /// Disease-induced death rate.
    pub delta: f64,
    /// Re-infection rate of the treated class (flow T -> I).
    pub nu: f64,
    /// Recovery rate due to treatment.
    pub alpha: f64,
    /// Natural recovery rate of the infected class.
    pub eps1: f64,
    /// Natural recovery rate of the treated class.
    pub eps2: f64,
    /// Death modification factor for treated individuals.
    pub theta: f64,
    /// Natural death rate.
    pub mu: f64,
    /// Population size used by the constant-N force of infection.
    pub n_total: f64,
    #[serde(default)]
    pub mixing: Mixing,
}

impl Params {
    /// Names of the numeric fields, in declaration order.
    pub const FIELDS: [&'static str; 12] = [
        "pi", "beta", "sigma", "gamma", "delta", "nu", "alpha", "eps1", "eps2", "theta", "mu",
        "n_total",
    ];

    /// Baseline values of the published parameter table (rates per year).
    pub fn baseline() -> Self {
        Params {
            pi: 6102.0,
            beta: 0.75,
            sigma: 0.60,
            gamma: 0.97,
            delta: 0.76,
            nu: 0.89,
            alpha: 0.09,
            eps1: 0.0054,
            eps2: 0.0061,
            theta: 0.51,
            mu: 0.000038642,
            n_total: 164_700_000.0,
            mixing: Mixing::ConstantN,
        }
    }

    pub fn with_mixing(mut self, mixing: Mixing) -> Self {
        self.mixing = mixing;
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "pi" => self.pi,
            "beta" => self.beta,
            "sigma" => self.sigma,
            "gamma" => self.gamma,
            "delta" => self.delta,
            "nu" => self.nu,
            "alpha" => self.alpha,
            "eps1" => self.eps1,
            "eps2" => self.eps2,
            "theta" => self.theta,
            "mu" => self.mu,
            "n_total" => self.n_total,
            _ => return None,
        })
    }

    /// Sets a numeric field by name. Does not validate the new value.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "pi" => &mut self.pi,
            "beta" => &mut self.beta,
            "sigma" => &mut self.sigma,
            "gamma" => &mut self.gamma,
            "delta" => &mut self.delta,
            "nu" => &mut self.nu,
            "alpha" => &mut self.alpha,
            "eps1" => &mut self.eps1,
            "eps2" => &mut self.eps2,
            "theta" => &mut self.theta,
            "mu" => &mut self.mu,
            "n_total" => &mut self.n_total,
            _ => return Err(Error::invalid(name, "not a model parameter")),
        };
        *slot = value;
        Ok(())
    }

    /// Checks positivity of every rate (`theta` may be zero).
    pub fn validate(&self) -> Result<()> {
        for name in Self::FIELDS {
            let value = self.get(name).expect("listed field");
            if !value.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
            if name == "theta" {
                if value < 0.0 {
                    return Err(Error::invalid(name, "must be >= 0"));
                }
            } else if value <= 0.0 {
                return Err(Error::invalid(name, "must be > 0"));
            }
        }
        Ok(())
    }

    /// Upper bound `pi / mu` of the total population in the invariant region.
    pub fn carrying_capacity(&self) -> f64 {
        self.pi / self.mu
    }

    /// The parameter set of the treatment-free reduction.
    pub fn treatment_free(&self) -> Params {
        Params {
            gamma: 0.0,
            nu: 0.0,
            alpha: 0.0,
            theta: 0.0,
            ..*self
        }
    }
}

/// Compartment sizes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub t: f64,
    pub r: f64,
}

impl State {
    pub const LABELS: [&'static str; 5] = ["S", "E", "I", "T", "R"];

    pub const fn new(s: f64, e: f64, i: f64, t: f64, r: f64) -> Self {
        State { s, e, i, t, r }
    }

    pub fn total(&self) -> f64 {
        self.s + self.e + self.i + self.t + self.r
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.s, self.e, self.i, self.t, self.r]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        State::new(x[0], x[1], x[2], x[3], x[4])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        for (label, value) in State::LABELS.iter().zip(self.to_array()) {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::invalid(
                    format!("x0.{}", label.to_lowercase()),
                    "compartment sizes must be finite and >= 0",
                ));
            }
        }
        Ok(())
    }
}

/// Intensities of prevention (`u1`), treatment of infected (`u2`) and
/// treatment of the treated class (`u3`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlVector {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

impl ControlVector {
    pub const ZERO: ControlVector = ControlVector::new(0.0, 0.0, 0.0);

    pub const fn new(u1: f64, u2: f64, u3: f64) -> Self {
        ControlVector { u1, u2, u3 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.u1, self.u2, self.u3]
    }

    pub fn from_array(u: [f64; 3]) -> Self {
        ControlVector::new(u[0], u[1], u[2])
    }
}

/// Weights of the running cost `b1 E + b2 I + (w1 u1^2 + w2 u2^2 + w3 u3^2) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveWeights {
    pub b1: f64,
    pub b2: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            b1: 1.0,
            b2: 1.0,
            w1: 100.0,
            w2: 100.0,
            w3: 100.0,
        }
    }
}

impl ObjectiveWeights {
    pub fn control_weights(&self) -> [f64; 3] {
        [self.w1, self.w2, self.w3]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("b1", self.b1), ("b2", self.b2)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::invalid(name, "state-cost weights must be >= 0"));
            }
        }
        for (name, value) in [("w1", self.w1), ("w2", self.w2), ("w3", self.w3)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, "control-cost weights must be > 0"));
            }
        }
        Ok(())
    }
}

/// Per-control admissible interval `[lower[k], upper[k]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlBounds {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl Default for ControlBounds {
    fn default() -> Self {
        ControlBounds {
            lower: [0.0; 3],
            upper: [0.99; 3],
        }
    }
}

impl ControlBounds {
    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            let (lo, hi) = (self.lower[k], self.upper[k]);
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi < 1.0) {
                return Err(Error::invalid(
                    format!("bounds[{k}]"),
                    format!("require 0 <= lower < upper < 1, got [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }

    pub fn clamp(&self, u: [f64; 3]) -> ControlVector {
        ControlVector::from_array(std::array::from_fn(|k| {
            u[k].clamp(self.lower[k], self.upper[k])
        }))
    }

    pub fn lower_controls(&self) -> ControlVector {
        ControlVector::from_array(self.lower)
    }

    pub fn contains(&self, u: &ControlVector) -> bool {
        u.to_array()
            .iter()
            .enumerate()
            .all(|(k, v)| (self.lower[k]..=self.upper[k]).contains(v))
    }
}

/// Denominator of the force of infection under the given mixing convention.
pub fn effective_population(p: &Params, x: &State) -> Result<f64> {
    match p.mixing {
        Mixing::ConstantN => Ok(p.n_total),
        Mixing::DynamicN => {
            let n = x.total();
            if n == 0.0 {
                Err(Error::ZeroPopulation)
            } else {
                Ok(n)
            }
        }
    }
}

/// Per-susceptible infection rate `(1 - u1) beta I / N`.
pub fn force_of_infection(p: &Params, x: &State, u1: f64) -> Result<f64> {
    let n = effective_population(p, x)?;
    if x.i == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - u1) * p.beta * x.i / n)
}

/// Right-hand side of the controlled system. With `u = 0` this is the full model.
pub fn rhs_controlled(p: &Params, x: &State, u: &ControlVector) -> Result<State> {
    let lambda = force_of_infection(p, x, u.u1)?;
    let incidence = lambda * x.s;
    let to_treatment = (p.gamma + u.u2) * x.i;
    let treated_recovery = (p.alpha + u.u3) * x.t;
    Ok(State {
        s: p.pi - incidence - p.mu * x.s,
        e: incidence - (p.sigma + p.mu) * x.e,
        i: p.sigma * x.e + p.nu * x.t - (p.eps1 + p.delta + p.mu) * x.i - to_treatment,
        t: to_treatment - (p.nu + p.theta * p.delta + p.eps2 + p.mu) * x.t - treated_recovery,
        r: treated_recovery + p.eps1 * x.i + p.eps2 * x.t - p.mu * x.r,
    })
}

/// Right-hand side of the uncontrolled five-compartment model.
pub fn rhs_full(p: &Params, x: &State) -> Result<State> {
    rhs_controlled(p, x, &ControlVector::ZERO)
}

/// Right-hand side of the treatment-free reduction. `x.t` is ignored and the
/// returned `t` component is zero.
pub fn rhs_treatment_free(p: &Params, x: &State) -> Result<State> {
    let x = State { t: 0.0, ..*x };
    let lambda = force_of_infection(p, &x, 0.0)?;
    let incidence = lambda * x.s;
    Ok(State {
        s: p.pi - incidence - p.mu * x.s,
        e: incidence - (p.sigma + p.mu) * x.e,
        i: p.sigma * x.e - (p.eps1 + p.delta + p.mu) * x.i,
        t: 0.0,
        r: p.eps1 * x.i - p.mu * x.r,
    })
}

/// Uncontrolled right-hand side of the chosen variant.
pub fn rhs(p: &Params, x: &State, variant: ModelVariant) -> Result<State> {
    match variant {
        ModelVariant::TreatmentFree => rhs_treatment_free(p, x),
        ModelVariant::Treatment => rhs_full(p, x),
    }
}
