use proptest::prelude::*;
use stifflwr_core::diagnostics::{bump, gronwall_envelope, mass, total_variation, total_variation_2d};
use stifflwr_core::scenario::build_initial;
use stifflwr_core::{
    DensityField, Grid1D, Grid2D, Interval, Rect, Scenario, Solver1D, Solver2D, StepControl, VelocityField1D,
    VelocityField2D,
};

fn l1(a: &DensityField, b: &DensityField) -> f64 {
    let dx = a.grid().dx();
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx
}

fn solver(grid: Grid1D, u: VelocityField1D, blocks: &[Interval], k: f64) -> Solver1D {
    let field = build_initial(blocks, &grid).unwrap();
    Solver1D::new(field, u, k, 0.0, StepControl::default()).unwrap()
}

#[test]
fn l1_contraction_between_solutions() {
    let grid = Grid1D::new(-2.0, 3.0, 500).unwrap();
    let u = VelocityField1D::affine(1.5, -0.5, -2.0, 3.0).unwrap();
    for k in [1.0, 8.0, 64.0] {
        let mut a = solver(grid, u.clone(), &[Interval::new(-1.0, 0.0, 0.9), Interval::new(0.5, 1.0, 0.4)], k);
        let mut b = solver(grid, u.clone(), &[Interval::new(-1.2, -0.1, 0.7), Interval::new(0.3, 1.1, 0.6)], k);
        let mut prev = l1(a.field(), b.field());
        for n in 1..=40 {
            let t = 0.025 * n as f64;
            a.advance_to(t).unwrap();
            b.advance_to(t).unwrap();
            let d = l1(a.field(), b.field());
            assert!(d <= prev + 1e-10, "k={k} t={t}: {d} > {prev}");
            prev = d;
        }
    }
}

#[test]
fn constant_velocity_steps_are_tvd() {
    let grid = Grid1D::new(-1.0, 3.0, 400).unwrap();
    let u = VelocityField1D::constant(1.0, -1.0, 3.0).unwrap();
    let blocks = [
        Interval::new(-0.8, -0.3, 0.3),
        Interval::new(-0.3, 0.2, 1.0),
        Interval::new(0.4, 0.9, 0.55),
    ];
    for k in [1.0, 4.0, 128.0] {
        let mut s = solver(grid, u.clone(), &blocks, k);
        let mut tv = total_variation(s.field());
        while s.time() < 1.0 {
            s.step(1.0).unwrap();
            let next = total_variation(s.field());
            assert!(next <= tv + 1e-12, "k={k} t={}: {next} > {tv}", s.time());
            tv = next;
        }
    }
}

fn smooth_solution(n: usize, t: f64) -> DensityField {
    let grid = Grid1D::new(-1.5, 2.5, n).unwrap();
    let values = grid.centers().map(|x| 0.5 * bump(x)).collect();
    let field = DensityField::from_values(grid, values).unwrap();
    let u = VelocityField1D::constant(1.0, -1.5, 2.5).unwrap();
    let mut s = Solver1D::new(field, u, 1.0, 0.0, StepControl::default()).unwrap();
    s.advance_to(t).unwrap();
    s.field().clone()
}

fn coarsen(fine: &DensityField, factor: usize) -> Vec<f64> {
    fine.values()
        .chunks(factor)
        .map(|c| c.iter().sum::<f64>() / factor as f64)
        .collect()
}

#[test]
fn first_order_convergence_before_shocks() {
    let t = 0.3;
    let err = |n: usize| {
        let coarse = smooth_solution(n, t);
        let reference = coarsen(&smooth_solution(4 * n, t), 4);
        let dx = coarse.grid().dx();
        coarse.values().iter().zip(&reference).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx
    };
    let (e1, e2) = (err(200), err(400));
    assert!(e1 / e2 >= 1.8, "{e1} / {e2} = {}", e1 / e2);
}

#[test]
fn variation_stays_under_gronwall_envelope() {
    let grid = Grid1D::new(-1.0, 3.0, 800).unwrap();
    let u = VelocityField1D::affine(2.0, -1.0, -1.0, 3.0).unwrap();
    let blocks = [Interval::new(0.0, 0.5, 0.8), Interval::new(0.8, 1.2, 0.5)];
    let field = build_initial(&blocks, &grid).unwrap();
    let tv0 = total_variation(&field);
    let beta = u.bounds().w2inf();
    for k in [1.0, 8.0, 64.0, 512.0] {
        let mut s = solver(grid, u.clone(), &blocks, k);
        for n in 1..=10 {
            let t = 0.1 * n as f64;
            s.advance_to(t).unwrap();
            let tv = total_variation(s.field());
            assert!(tv <= gronwall_envelope(tv0, beta, t) + 1e-12, "k={k} t={t}: {tv}");
        }
    }
}

#[test]
fn anisotropic_variation_is_uniform_in_k() {
    let bbox = [-2.0, 2.0, -2.0, 2.0];
    let g = Grid2D::new(Grid1D::new(-2.0, 2.0, 64).unwrap(), Grid1D::new(-2.0, 2.0, 64).unwrap());
    let u = VelocityField2D::radial([0.0, 0.0], 0.8, bbox).unwrap();
    let blocks = vec![
        Rect::new(-1.4, -0.6, -0.5, 0.5, 0.5),
        Rect::new(0.6, 1.4, -0.3, 0.7, 0.6),
    ];
    let mut tvs = Vec::new();
    for k in [1.0, 4.0, 16.0, 64.0] {
        let sc = Scenario::two_d(g, u, blocks.clone()).with_k(k).with_t_end(0.5);
        let mut s = Solver2D::from_scenario(&sc).unwrap();
        let tv0 = total_variation_2d(s.field());
        s.advance_to(0.5).unwrap();
        let tv = total_variation_2d(s.field());
        assert!(tv.is_finite() && tv <= 3.0 * tv0, "k={k}: {tv} vs {tv0}");
        tvs.push(tv);
    }
    let spread = tvs.iter().cloned().fold(0.0, f64::max) / tvs.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 2.0, "{tvs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_blocks_keep_mass_and_bounds(
        raw in proptest::collection::vec((0.0f64..1.0, 0.05f64..0.4, 0.05f64..=1.0), 1..4),
        k in 1.0f64..200.0,
        slope in 0.0f64..1.0,
    ) {
        let mut blocks = Vec::new();
        let mut lo = -1.0;
        for (gap, len, v) in raw {
            let a = lo + 0.5 * gap;
            blocks.push(Interval::new(a, a + len, v));
            lo = a + len;
        }
        let grid = Grid1D::new(-1.5, 4.0, 300).unwrap();
        let u = VelocityField1D::affine(1.0 + slope, -slope, -1.5, 4.0).unwrap();
        let mut s = solver(grid, u, &blocks, k);
        let m0 = mass(s.field());
        s.advance_to(0.6).unwrap();
        let m = mass(s.field());
        prop_assert!((m - m0).abs() <= 1e-12 * m0.max(1.0));
        let max = s.field().values().iter().cloned().fold(0.0, f64::max);
        let min = s.field().values().iter().cloned().fold(1.0, f64::min);
        prop_assert!(max <= 1.0 + 1e-12 && min >= -1e-12);
    }
}
