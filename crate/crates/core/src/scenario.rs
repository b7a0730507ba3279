//! Experiment descriptions and piecewise-constant initial data.

use crate::error::{Error, Result};
use crate::grid::{DensityField, DensityField2D, Grid1D, Grid2D};
use crate::solver1d::{DiffusionMode, StepControl};
use crate::velocity::{VelocityField1D, VelocityField2D};

/// `value` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, value: f64) -> Self {
        Self { lo, hi, value }
    }

    pub fn mass(&self) -> f64 {
        (self.hi - self.lo) * self.value
    }
}

/// `value` on `[x_lo, x_hi] x [y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub value: f64,
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, value: f64) -> Self {
        Self {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            value,
        }
    }

    pub fn mass(&self) -> f64 {
        (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo) * self.value
    }
}

fn check_value(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::ValueOutOfRange(v))
    }
}

fn check_span(lo: f64, hi: f64, min: f64, max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || hi < lo || lo < min || hi > max {
        Err(Error::SpecOutsideDomain { lo, hi })
    } else {
        Ok(())
    }
}

/// Length of `[a, b] ∩ [c, d]`.
fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

fn to_cell_units(x: f64, grid: &Grid1D) -> f64 {
    (x - grid.x_min()) * grid.n_cells() as f64 / (grid.x_max() - grid.x_min())
}

/// Exact cell averages of `sum_j value_j * 1_{[lo_j, hi_j]}`.
pub fn build_initial(blocks: &[Interval], grid: &Grid1D) -> Result<DensityField> {
    let mut values = vec![0.0; grid.n_cells()];
    for b in blocks {
        check_value(b.value)?;
        check_span(b.lo, b.hi, grid.x_min(), grid.x_max())?;
        if b.hi == b.lo || b.value == 0.0 {
            continue;
        }
        // work in cell units so faces are exact integers
        let (lo, hi) = (to_cell_units(b.lo, grid), to_cell_units(b.hi, grid));
        let first = (lo.floor() as usize).min(grid.n_cells() - 1);
        let last = (hi.ceil() as usize).min(grid.n_cells());
        for (i, v) in values.iter_mut().enumerate().take(last).skip(first) {
            *v += b.value * overlap(i as f64, (i + 1) as f64, lo, hi);
        }
    }
    if let Some(v) = values.iter().find(|&&v| v > 1.0 + crate::grid::TOL_NEG) {
        return Err(Error::ValueOutOfRange(*v));
    }
    DensityField::from_values(*grid, values)
}

pub fn build_initial_2d(blocks: &[Rect], grid: &Grid2D) -> Result<DensityField2D> {
    let mut values = vec![0.0; grid.len()];
    let (gx, gy) = (grid.x, grid.y);
    for b in blocks {
        check_value(b.value)?;
        check_span(b.x_lo, b.x_hi, gx.x_min(), gx.x_max())?;
        check_span(b.y_lo, b.y_hi, gy.x_min(), gy.x_max())?;
        let (xl, xh) = (to_cell_units(b.x_lo, &gx), to_cell_units(b.x_hi, &gx));
        let (yl, yh) = (to_cell_units(b.y_lo, &gy), to_cell_units(b.y_hi, &gy));
        for j in 0..grid.ny() {
            let wy = overlap(j as f64, (j + 1) as f64, yl, yh);
            if wy == 0.0 {
                continue;
            }
            for i in 0..grid.nx() {
                let wx = overlap(i as f64, (i + 1) as f64, xl, xh);
                if wx > 0.0 {
                    values[grid.index(i, j)] += b.value * wx * wy;
                }
            }
        }
    }
    if let Some(v) = values.iter().find(|&&v| v > 1.0 + crate::grid::TOL_NEG) {
        return Err(Error::ValueOutOfRange(*v));
    }
    DensityField2D::from_values(*grid, values)
}

/// Mass of the piecewise-constant datum.
pub fn analytic_mass(blocks: &[Interval]) -> f64 {
    blocks.iter().map(Interval::mass).sum()
}

pub fn analytic_mass_2d(blocks: &[Rect]) -> f64 {
    blocks.iter().map(Rect::mass).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Setup {
    OneD {
        grid: Grid1D,
        velocity: VelocityField1D,
        blocks: Vec<Interval>,
    },
    TwoD {
        grid: Grid2D,
        velocity: VelocityField2D,
        blocks: Vec<Rect>,
    },
}

/// Full description of one finite-volume experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub setup: Setup,
    pub k: f64,
    pub eps: f64,
    pub control: StepControl,
    pub t_end: f64,
    /// Snapshot spacing in time; snapshots are taken at every multiple of it
    /// and at `t_end`.
    pub output_interval: f64,
    pub sat_threshold: f64,
}

impl Scenario {
    pub fn one_d(grid: Grid1D, velocity: VelocityField1D, blocks: Vec<Interval>) -> Self {
        Self {
            setup: Setup::OneD {
                grid,
                velocity,
                blocks,
            },
            k: 1.0,
            eps: 0.0,
            control: StepControl::default(),
            t_end: 1.0,
            output_interval: 0.1,
            sat_threshold: 0.99,
        }
    }

    pub fn two_d(grid: Grid2D, velocity: VelocityField2D, blocks: Vec<Rect>) -> Self {
        Self {
            setup: Setup::TwoD {
                grid,
                velocity,
                blocks,
            },
            ..Self::one_d(
                grid.x,
                VelocityField1D::constant(0.0, grid.x.x_min(), grid.x.x_max())
                    .expect("valid box"),
                Vec::new(),
            )
        }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_output_interval(mut self, dt: f64) -> Self {
        self.output_interval = dt;
        self
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.control.cfl = cfl;
        self
    }

    pub fn with_diffusion(mut self, mode: DiffusionMode) -> Self {
        self.control.diffusion = mode;
        self
    }

    pub fn with_dt_max(mut self, dt_max: f64) -> Self {
        self.control.dt_max = dt_max;
        self
    }

    pub fn with_sat_threshold(mut self, s: f64) -> Self {
        self.sat_threshold = s;
        self
    }

    pub fn initial_mass(&self) -> f64 {
        match &self.setup {
            Setup::OneD { blocks, .. } => analytic_mass(blocks),
            Setup::TwoD { blocks, .. } => analytic_mass_2d(blocks),
        }
    }

    /// Check the scalar parameters; the initial data is checked when built.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidScenario(what.to_string()));
        if !(self.k.is_finite() && self.k >= 1.0) {
            return bad("k must be finite and >= 1");
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return bad("eps must be finite and >= 0");
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad("t_end must be finite and > 0");
        }
        if !(self.output_interval.is_finite() && self.output_interval > 0.0) {
            return bad("output_interval must be > 0");
        }
        if !(self.sat_threshold > 0.0 && self.sat_threshold < 1.0) {
            return bad("sat_threshold must lie in (0, 1)");
        }
        self.control.validate()?;
        match &self.setup {
            Setup::OneD { grid, blocks, .. } => {
                build_initial(blocks, grid)?;
            }
            Setup::TwoD { grid, blocks, .. } => {
                build_initial_2d(blocks, grid)?;
            }
        }
        Ok(())
    }
}
