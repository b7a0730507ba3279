//! Fixtures shared by the kernel benchmarks.

use stifflwr_core::{Grid1D, Grid2D, Interval, Rect, Scenario, Solver1D, Solver2D, VelocityField1D, VelocityField2D};

/// Converging affine field on [-1, 3] with a half-congested block.
pub fn solver_1d(n: usize, k: f64) -> Solver1D {
    let grid = Grid1D::new(-1.0, 3.0, n).expect("grid");
    let u = VelocityField1D::affine(2.0, -1.0, -1.0, 3.0).expect("velocity");
    let sc = Scenario::one_d(grid, u, vec![Interval::new(0.0, 0.5, 0.9), Interval::new(0.8, 1.2, 0.5)]).with_k(k);
    Solver1D::from_scenario(&sc).expect("solver")
}

/// Radial contraction on [-2, 2]^2 with two bumps.
pub fn solver_2d(n: usize, k: f64, parallel: bool) -> Solver2D {
    let axis = Grid1D::new(-2.0, 2.0, n).expect("grid");
    let u = VelocityField2D::radial([0.0, 0.0], 0.8, [-2.0, 2.0, -2.0, 2.0]).expect("velocity");
    let blocks = vec![
        Rect::new(-1.4, -0.6, -0.5, 0.5, 0.5),
        Rect::new(0.6, 1.4, -0.3, 0.7, 0.6),
    ];
    let sc = Scenario::two_d(Grid2D::new(axis, axis), u, blocks).with_k(k);
    Solver2D::from_scenario(&sc).expect("solver").with_parallel(parallel)
}

/// Deterministic pairs of states covering [0, 1]^2.
pub fn state_pairs(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let a = (i as f64 * 0.618_033_988_749_895).fract();
            let b = (i as f64 * 0.754_877_666_246_693).fract();
            (a, b)
        })
        .collect()
}
