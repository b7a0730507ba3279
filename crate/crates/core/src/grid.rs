//! Uniform Cartesian grids and cell-averaged density fields.
//!
//! Cells are indexed from the left (1D) or in row-major order (2D): cell
//! `(i, j)` with `i` along x and `j` along y lives at `j * nx + i`, so each
//! row of constant y is a contiguous slice.

use crate::error::{Error, Result};

/// Tolerance on the invariant region [0, 1] for cell values.
pub const TOL_NEG: f64 = 1e-12;

/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 4;

/// Number of cells at each end of an axis that must stay empty.
pub const GUARD_CELLS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "bounds [{x_min}, {x_max}] are not an increasing finite interval"
            )));
        }
        if n_cells < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "{n_cells} cells, need at least {MIN_CELLS}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
            dx: (x_max - x_min) / n_cells as f64,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Center of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    /// Position of face `i`; face `i` is the left edge of cell `i`, faces run
    /// from 0 to `n_cells` inclusive.
    pub fn face(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(|i| self.center(i))
    }

    /// Refine by an integer factor, keeping the bounds.
    pub fn refined(&self, factor: usize) -> Self {
        Self::new(self.x_min, self.x_max, self.n_cells * factor.max(1))
            .expect("refining a valid grid stays valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub x: Grid1D,
    pub y: Grid1D,
}

impl Grid2D {
    pub fn new(x: Grid1D, y: Grid1D) -> Self {
        Self { x, y }
    }

    pub fn nx(&self) -> usize {
        self.x.n_cells()
    }

    pub fn ny(&self) -> usize {
        self.y.n_cells()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    pub fn cell_area(&self) -> f64 {
        self.x.dx() * self.y.dx()
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x.center(i), self.y.center(j)]
    }
}

/// Cell averages of the density on a 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl DensityField {
    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_cells()],
        }
    }

    pub fn from_values(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// First cell whose value leaves `[-TOL_NEG, 1 + TOL_NEG]`, if any.
    pub fn invariant_violation(&self) -> Option<(usize, f64)> {
        first_outside_unit(&self.values)
    }
}

/// Cell averages of the density on a 2D grid (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl DensityField2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let nx = self.grid.nx();
        &self.values[j * nx..(j + 1) * nx]
    }

    pub fn invariant_violation(&self) -> Option<(usize, f64)> {
        first_outside_unit(&self.values)
    }
}

pub(crate) fn first_outside_unit(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .copied()
        .enumerate()
        .find(|&(_, v)| !(-TOL_NEG..=1.0 + TOL_NEG).contains(&v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_geometry() {
        let g = Grid1D::new(-2.0, 2.0, 400).unwrap();
        assert_eq!(g.dx(), 0.01);
        assert!((g.center(0) - (-1.995)).abs() < 1e-15);
        assert_eq!(g.face(0), -2.0);
        assert!((g.face(400) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::new(0.0, 1.0, 3).is_err());
        assert!(Grid1D::new(1.0, 0.0, 10).is_err());
        assert!(Grid1D::new(0.0, f64::NAN, 10).is_err());
    }

    #[test]
    fn row_major_indexing() {
        let g = Grid2D::new(
            Grid1D::new(0.0, 1.0, 5).unwrap(),
            Grid1D::new(0.0, 2.0, 4).unwrap(),
        );
        assert_eq!(g.index(0, 0), 0);
        assert_eq!(g.index(4, 0), 4);
        assert_eq!(g.index(0, 1), 5);
        assert_eq!(g.index(2, 3), 17);
    }

    #[test]
    fn invariant_region_check() {
        let g = Grid1D::new(0.0, 1.0, 4).unwrap();
        let ok = DensityField::from_values(g, vec![0.0, 1.0 + 1e-13, -1e-13, 0.5]).unwrap();
        assert!(ok.invariant_violation().is_none());
        let bad = DensityField::from_values(g, vec![0.0, 1.0 + 1e-11, 0.0, 0.0]).unwrap();
        assert_eq!(bad.invariant_violation().map(|(i, _)| i), Some(1));
    }
}
