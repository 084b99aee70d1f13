//! Threshold analysis of the uncontrolled systems: disease-free and endemic
//! equilibria, reproduction numbers from next-generation matrices, Jacobian
//! spectra and Lyapunov diagnostics along trajectories.
//!
//! Everything here assumes the constant-N convention, under which the
//! closed-form reproduction numbers and endemic coordinates are exact.

use nalgebra::{Complex, DMatrix, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rhs, Mixing, ModelVariant, Params, State};
use crate::trajectory::Trajectory;

/// Real parts within this margin of zero give an indeterminate verdict.
pub const STABILITY_MARGIN: f64 = 1e-12;

/// Relative tolerance, scaled by `pi`, of the endemic steady-state residual.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-6;

/// Slack of the Lyapunov monotonicity check, relative to `F(0)`.
pub const LYAPUNOV_SLACK: f64 = 1e-8;

fn require_constant_n(p: &Params) -> Result<()> {
    match p.mixing {
        Mixing::ConstantN => Ok(()),
        Mixing::DynamicN => Err(Error::RequiresConstantN),
    }
}

/// Parameters as seen by the variant: the treatment-free system zeroes the
/// treatment rates.
fn variant_params(p: &Params, variant: ModelVariant) -> Params {
    match variant {
        ModelVariant::TreatmentFree => p.treatment_free(),
        ModelVariant::Treatment => *p,
    }
}

/// Composite rates `P1..P4`. For the treatment-free variant the treatment
/// rates are zero, so `p2 = eps1 + delta + mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    /// `p2 * p3 - nu * gamma`; must be positive for the treatment formulas.
    pub coupling_margin: f64,
}

impl DerivedRates {
    pub fn new(p: &Params, variant: ModelVariant) -> Self {
        let q = variant_params(p, variant);
        let p1 = q.sigma + q.mu;
        let p2 = q.gamma + q.eps1 + q.delta + q.mu;
        let p3 = q.alpha + q.nu + q.theta * q.delta + q.eps2 + q.mu;
        let p4 = q.alpha + q.eps2;
        DerivedRates {
            p1,
            p2,
            p3,
            p4,
            coupling_margin: p2 * p3 - q.nu * q.gamma,
        }
    }

    fn dominant(&self) -> f64 {
        self.p1.max(self.p2).max(self.p3)
    }
}

/// Disease-free equilibrium `(pi/mu, 0, 0, 0, 0)`.
pub fn dfe(p: &Params, _variant: ModelVariant) -> State {
    State::new(p.pi / p.mu, 0.0, 0.0, 0.0, 0.0)
}

/// New-infection matrix `F` and transfer matrix `V` at the disease-free
/// equilibrium, over `(E, I)` or `(E, I, T)`.
pub fn next_generation_matrices(
    p: &Params,
    variant: ModelVariant,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    require_constant_n(p)?;
    let d = DerivedRates::new(p, variant);
    let entry = p.beta * p.pi / (p.n_total * p.mu);
    let (f, v) = match variant {
        ModelVariant::TreatmentFree => (
            DMatrix::from_row_slice(2, 2, &[0.0, entry, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[d.p1, 0.0, -p.sigma, d.p2]),
        ),
        ModelVariant::Treatment => (
            DMatrix::from_row_slice(3, 3, &[0.0, entry, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(
                3,
                3,
                &[d.p1, 0.0, 0.0, -p.sigma, d.p2, -p.nu, 0.0, -p.gamma, d.p3],
            ),
        ),
    };
    let det = v.determinant();
    if !det.is_finite() || det == 0.0 {
        return Err(Error::SingularTransferMatrix { det });
    }
    Ok((f, v))
}

const SCHUR_MAX_ITERS: usize = 10_000;

fn schur_eigenvalues(m: DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    Schur::try_new(m, f64::EPSILON, SCHUR_MAX_ITERS)
        .map(|s| s.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of a square real matrix via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    let scale = m.amax();
    // The Schur iteration stalls on the exact zero matrix.
    if scale == 0.0 {
        return Ok(vec![Complex::new(0.0, 0.0); n]);
    }
    if let Some(values) = schur_eigenvalues(m.clone()) {
        return Ok(values);
    }
    let shifted = m + DMatrix::identity(n, n) * scale;
    schur_eigenvalues(shifted)
        .map(|values| values.into_iter().map(|z| z - scale).collect())
        .ok_or(Error::EigenSolveFailed(n))
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproductionNumber {
    /// Closed-form value.
    pub value: f64,
    /// Spectral radius of `F V^-1`, computed numerically.
    pub spectral_radius: f64,
    /// Transmission term, progression probability and infectious-period term;
    /// their product is `value`.
    pub factors: [f64; 3],
}

/// Basic reproduction number of the chosen variant.
pub fn r0(p: &Params, variant: ModelVariant) -> Result<ReproductionNumber> {
    require_constant_n(p)?;
    let d = DerivedRates::new(p, variant);
    let transmission = p.beta * p.pi / (p.n_total * p.mu);
    let progression = p.sigma / d.p1;
    let (value, infectious) = match variant {
        ModelVariant::TreatmentFree => (
            p.beta * p.pi * p.sigma / (p.n_total * p.mu * d.p1 * d.p2),
            1.0 / d.p2,
        ),
        ModelVariant::Treatment => {
            if d.coupling_margin.is_nan() || d.coupling_margin <= 0.0 {
                return Err(Error::InvalidReproductionFormula(d.coupling_margin));
            }
            (
                p.beta * p.pi * p.sigma * d.p3 / (p.n_total * p.mu * d.p1 * d.coupling_margin),
                d.p3 / d.coupling_margin,
            )
        }
    };
    let (f, v) = next_generation_matrices(p, variant)?;
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or(Error::SingularTransferMatrix {
            det: v.determinant(),
        })?;
    Ok(ReproductionNumber {
        value,
        spectral_radius: spectral_radius(&(f * v_inv))?,
        factors: [transmission, progression, infectious],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndemicEquilibrium {
    pub state: State,
    /// Equilibrium force of infection `mu (R0 - 1)`.
    pub force_of_infection: f64,
}

fn residual_norm(p: &Params, x: &State, variant: ModelVariant) -> Result<(Vec<f64>, f64)> {
    let r = rhs(p, x, variant)?.to_array().to_vec();
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((r, norm))
}

/// Endemic equilibrium, present only when the reproduction number exceeds one.
/// The closed-form state is verified by a residual check on the right-hand side.
pub fn endemic_equilibrium(
    p: &Params,
    variant: ModelVariant,
) -> Result<Option<EndemicEquilibrium>> {
    let rn = r0(p, variant)?.value;
    if rn <= 1.0 {
        return Ok(None);
    }
    let d = DerivedRates::new(p, variant);
    let lam = p.mu * (rn - 1.0);
    let base = p.pi / (lam + p.mu);
    let s = base;
    let e = base * lam / d.p1;
    let state = match variant {
        ModelVariant::TreatmentFree => {
            let i = p.sigma * base * lam / (d.p1 * d.p2);
            let r = p.eps1 * p.sigma * base * lam / (p.mu * d.p1 * d.p2);
            State::new(s, e, i, 0.0, r)
        }
        ModelVariant::Treatment => {
            let scale = p.sigma * base * lam / (d.p1 * d.coupling_margin);
            let i = d.p3 * scale;
            let t = p.gamma * scale;
            let r = (p.eps1 * d.p3 + p.gamma * d.p4) * scale / p.mu;
            State::new(s, e, i, t, r)
        }
    };
    let (residual, norm) = residual_norm(p, &state, variant)?;
    let tolerance = EQUILIBRIUM_RESIDUAL_TOL * p.pi;
    if norm.is_nan() || norm > tolerance {
        return Err(Error::EquilibriumResidual {
            residual,
            norm,
            tolerance,
        });
    }
    Ok(Some(EndemicEquilibrium {
        state,
        force_of_infection: lam,
    }))
}

/// Central finite-difference Jacobian with step `max(1e-6 |x|_inf, 1e-6)`.
pub fn fd_jacobian<F>(f: F, x: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = (1e-6 * scale).max(1e-6);
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + h;
        let plus = f(&probe)?;
        probe[j] = x[j] - h;
        let minus = f(&probe)?;
        probe[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Indeterminate,
}

impl Stability {
    pub fn from_max_real(max_real: f64) -> Self {
        if max_real < -STABILITY_MARGIN {
            Stability::Stable
        } else if max_real > STABILITY_MARGIN {
            Stability::Unstable
        } else {
            Stability::Indeterminate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    pub max_real: f64,
    pub stability: Stability,
}

impl Spectrum {
    pub fn of(m: &DMatrix<f64>) -> Result<Self> {
        let eigenvalues: Vec<Eigenvalue> = eigenvalues(m)?
            .into_iter()
            .map(|z| Eigenvalue { re: z.re, im: z.im })
            .collect();
        let max_real = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Spectrum {
            eigenvalues,
            max_real,
            stability: Stability::from_max_real(max_real),
        })
    }
}

/// Linearization of the uncontrolled right-hand side at `x`. The
/// treatment-free variant is linearized over `(S, E, I, R)` only.
pub fn jacobian_at(p: &Params, x: &State, variant: ModelVariant) -> Result<DMatrix<f64>> {
    match variant {
        ModelVariant::Treatment => fd_jacobian(
            |y| Ok(rhs(p, &State::from_slice(y), variant)?.to_array().to_vec()),
            &x.to_array(),
        ),
        ModelVariant::TreatmentFree => fd_jacobian(
            |y| {
                let d = rhs(p, &State::new(y[0], y[1], y[2], 0.0, y[3]), variant)?;
                Ok(vec![d.s, d.e, d.i, d.r])
            },
            &[x.s, x.e, x.i, x.r],
        ),
    }
}

pub fn jacobian_spectrum_at(p: &Params, x: &State, variant: ModelVariant) -> Result<Spectrum> {
    Spectrum::of(&jacobian_at(p, x, variant)?)
}

/// Coefficients `(a, b, c)` of `F = a E + b I + c T`.
pub fn lyapunov_coefficients(p: &Params, variant: ModelVariant) -> [f64; 3] {
    let d = DerivedRates::new(p, variant);
    match variant {
        ModelVariant::TreatmentFree => [p.sigma, d.p1, 0.0],
        ModelVariant::Treatment => [p.sigma * d.p3, d.p1 * d.p3, p.nu * d.p1],
    }
}

pub fn lyapunov_value(p: &Params, x: &State, variant: ModelVariant) -> f64 {
    let [a, b, c] = lyapunov_coefficients(p, variant);
    a * x.e + b * x.i + c * x.t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub r0: f64,
    /// Whether the monotonicity claim applies, i.e. `r0 <= 1`.
    pub applicable: bool,
    pub initial_value: f64,
    /// Largest finite-difference estimate of `dF/dt` along the samples.
    pub max_derivative: f64,
    /// Largest increase `F(t_{k+1}) - F(t_k)` between consecutive nodes.
    pub max_increment: f64,
    /// `1e-8 * F(0) * max(P1, P2, P3)`.
    pub derivative_threshold: f64,
    /// `max_increment <= 1e-8 * F(0)`.
    pub nonincreasing: bool,
    /// Set when `applicable` and `max_derivative` exceeds the threshold.
    pub violation: bool,
}

/// Differentiates the Lyapunov function numerically along a trajectory.
pub fn lyapunov_derivative_check(
    traj: &Trajectory,
    p: &Params,
    variant: ModelVariant,
) -> Result<LyapunovReport> {
    require_constant_n(p)?;
    if traj.len() < 3 {
        return Err(Error::TrajectoryTooShort(traj.len()));
    }
    let rn = r0(p, variant)?.value;
    let values: Vec<f64> = traj
        .states
        .iter()
        .map(|x| lyapunov_value(p, x, variant))
        .collect();
    let t = traj.times();
    let n = values.len();
    let mut max_derivative = f64::NEG_INFINITY;
    for k in 0..n {
        let (lo, hi) = match k {
            0 => (0, 1),
            k if k == n - 1 => (n - 2, n - 1),
            k => (k - 1, k + 1),
        };
        let slope = (values[hi] - values[lo]) / (t[hi] - t[lo]);
        max_derivative = max_derivative.max(slope);
    }
    let max_increment = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let initial_value = values[0];
    let derivative_threshold =
        LYAPUNOV_SLACK * initial_value * DerivedRates::new(p, variant).dominant();
    let applicable = rn <= 1.0;
    Ok(LyapunovReport {
        r0: rn,
        applicable,
        initial_value,
        max_derivative,
        max_increment,
        derivative_threshold,
        nonincreasing: max_increment <= LYAPUNOV_SLACK * initial_value,
        violation: applicable && max_derivative > derivative_threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub dfe_locally_stable: bool,
    pub dfe_stability: Stability,
    pub endemic_exists: bool,
    pub endemic_stability: Option<Stability>,
}

/// Full threshold analysis of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub variant: ModelVariant,
    pub r0: f64,
    pub r0_spectral: f64,
    pub r0_factors: [f64; 3],
    pub derived_rates: DerivedRates,
    pub dfe: State,
    pub endemic: Option<EndemicEquilibrium>,
    pub dfe_spectrum: Spectrum,
    /// Linearization at the endemic point, reported as numerical evidence only.
    pub endemic_spectrum: Option<Spectrum>,
    pub verdicts: Verdicts,
}

pub fn analyze(p: &Params, variant: ModelVariant) -> Result<AnalysisReport> {
    p.validate()?;
    let rn = r0(p, variant)?;
    let dfe_state = dfe(p, variant);
    let endemic = endemic_equilibrium(p, variant)?;
    let dfe_spectrum = jacobian_spectrum_at(p, &dfe_state, variant)?;
    let endemic_spectrum = endemic
        .as_ref()
        .map(|ee| jacobian_spectrum_at(p, &ee.state, variant))
        .transpose()?;
    let verdicts = Verdicts {
        dfe_locally_stable: dfe_spectrum.stability == Stability::Stable,
        dfe_stability: dfe_spectrum.stability,
        endemic_exists: endemic.is_some(),
        endemic_stability: endemic_spectrum.as_ref().map(|s| s.stability),
    };
    Ok(AnalysisReport {
        variant,
        r0: rn.value,
        r0_spectral: rn.spectral_radius,
        r0_factors: rn.factors,
        derived_rates: DerivedRates::new(p, variant),
        dfe: dfe_state,
        endemic,
        dfe_spectrum,
        endemic_spectrum,
        verdicts,
    })
}
