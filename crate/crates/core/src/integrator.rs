//! Fixed-step classical RK4 on a uniform grid, forward and backward in time,
//! plus trapezoidal quadrature over the same grid.
//!
//! The integrators are dimension-generic: states are plain `f64` slices. Sample
//! arrays are always stored in forward index order, node `i` at `t0 + i*h`.
//!
//! Driven and backward passes read auxiliary data (controls, or a frozen state
//! trajectory) that only exists at grid nodes. At the RK4 midpoint stages that
//! data is linearly interpolated, which at a half step is the mean of the two
//! neighbouring nodes. This coupling is only second-order accurate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub tf: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, n_steps: usize) -> Result<Self> {
        let grid = TimeGrid { t0, tf, n_steps };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.tf.is_finite()) {
            return Err(Error::InvalidGrid("endpoints must be finite".into()));
        }
        if self.tf <= self.t0 {
            return Err(Error::InvalidGrid(format!(
                "tf ({}) must exceed t0 ({})",
                self.tf, self.t0
            )));
        }
        if self.n_steps < 2 {
            return Err(Error::InvalidGrid(format!(
                "n_steps must be >= 2, got {}",
                self.n_steps
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.tf - self.t0) / self.n_steps as f64
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.tf
        } else {
            self.t0 + i as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }
}

fn check_finite(values: &[f64], step: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

fn check_samples(grid: &TimeGrid, samples: &[Vec<f64>]) -> Result<()> {
    if samples.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: samples.len(),
        });
    }
    Ok(())
}

fn midpoint(a: &[f64], b: &[f64], out: &mut [f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = 0.5 * (x + y);
    }
}

/// One RK4 pass over the whole grid, from `tf` to `t0` when `backward` is set.
/// `aux` holds per-node data handed to the field.
fn sweep<F>(
    field: &mut F,
    start: &[f64],
    grid: &TimeGrid,
    aux: Option<&[Vec<f64>]>,
    backward: bool,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &[f64], &mut [f64]) -> Result<()>,
{
    let n = start.len();
    let steps = grid.n_steps;
    let h = if backward { -grid.step() } else { grid.step() };
    let aux_dim = aux.map_or(0, |a| a.first().map_or(0, Vec::len));
    let empty = Vec::new();
    let aux_at = |i: usize| -> &Vec<f64> { aux.map_or(&empty, |a| &a[i]) };

    check_finite(start, 0)?;
    let mut out = vec![Vec::new(); grid.len()];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut mid = vec![0.0; aux_dim];
    let mut y = start.to_vec();

    for s in 0..steps {
        let (from, to) = if backward {
            (steps - s, steps - s - 1)
        } else {
            (s, s + 1)
        };
        out[from] = y.clone();
        let t = grid.time(from);
        let (a_from, a_to) = (aux_at(from), aux_at(to));
        midpoint(a_from, a_to, &mut mid);

        field(t, &y, a_from, &mut k1)?;
        for j in 0..n {
            stage[j] = y[j] + 0.5 * h * k1[j];
        }
        field(t + 0.5 * h, &stage, &mid, &mut k2)?;
        for j in 0..n {
            stage[j] = y[j] + 0.5 * h * k2[j];
        }
        field(t + 0.5 * h, &stage, &mid, &mut k3)?;
        for j in 0..n {
            stage[j] = y[j] + h * k3[j];
        }
        field(grid.time(to), &stage, a_to, &mut k4)?;
        for j in 0..n {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        check_finite(&y, s + 1)?;
    }
    let last = if backward { 0 } else { steps };
    out[last] = y;
    Ok(out)
}

/// Integrates `dx/dt = field(t, x)` from `x0` at `grid.t0` to `grid.tf`.
pub fn rk4_forward<F>(mut field: F, x0: &[f64], grid: &TimeGrid) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    grid.validate()?;
    let mut f = |t: f64, x: &[f64], _: &[f64], dx: &mut [f64]| field(t, x, dx);
    sweep(&mut f, x0, grid, None, false)
}

/// Forward integration of `dx/dt = field(t, x, d(t))` where the driving signal
/// `d` is given at grid nodes (for example a control schedule).
pub fn rk4_forward_driven<F>(
    mut field: F,
    x0: &[f64],
    grid: &TimeGrid,
    drive: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &[f64], &mut [f64]) -> Result<()>,
{
    grid.validate()?;
    check_samples(grid, drive)?;
    sweep(&mut field, x0, grid, Some(drive), false)
}

/// Integrates `dl/dt = field(t, l, frozen(t))` from `terminal` at `grid.tf`
/// back to `grid.t0`. The result is indexed forward: element 0 is at `t0`.
pub fn rk4_backward<F>(
    mut field: F,
    terminal: &[f64],
    grid: &TimeGrid,
    frozen: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &[f64], &mut [f64]) -> Result<()>,
{
    grid.validate()?;
    check_samples(grid, frozen)?;
    sweep(&mut field, terminal, grid, Some(frozen), true)
}

/// Composite trapezoid rule over the grid nodes.
pub fn quadrature(values: &[f64], grid: &TimeGrid) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    Ok(grid.step() * (0.5 * (values[0] + values[values.len() - 1]) + interior))
}
