use stifflwr_core::fronttrack::{evolve, pressure_profile};
use stifflwr_core::ftl::{empirical_density, integrate};
use stifflwr_core::{AgentChain, Block, BlockSystem, Grid1D, VelocityField1D};

fn converging() -> VelocityField1D {
    VelocityField1D::affine(2.0, -1.0, -3.0, 4.0).unwrap()
}

fn three_blocks() -> BlockSystem {
    let blocks = vec![
        Block::new(-2.0, -1.6, 0.0),
        Block::new(-0.5, -0.2, 0.0),
        Block::new(0.4, 0.7, 0.0),
    ];
    BlockSystem::new(blocks, converging()).unwrap()
}

#[test]
fn saturated_length_survives_merges() {
    let sys = three_blocks();
    let total0: f64 = sys.blocks().iter().map(Block::length).sum();
    let traj = evolve(&sys, 3.0, 1e-3).unwrap();
    assert_eq!(traj.events.len(), 2, "{:?}", traj.events);
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let total: f64 = state.iter().map(Block::length).sum();
        assert!((total - total0).abs() <= 1e-9, "t={t}: {total}");
        for w in state.windows(2) {
            assert!(w[0].x_plus <= w[1].x_minus + 1e-10, "t={t}: {w:?}");
        }
        for b in state {
            assert!(b.x_minus < b.x_plus);
        }
    }
    assert_eq!(traj.state_at(3.0).len(), 1);
}

#[test]
fn merged_block_carries_single_block_pressure() {
    let sys = three_blocks();
    let traj = evolve(&sys, 3.0, 1e-3).unwrap();
    let u = traj.velocity();
    let t_merge = traj.events[0].t;
    let after = traj.state_at(t_merge + 1e-3);
    let merged = after[traj.events[0].left_index];
    assert!((merged.length() - 0.6).abs() <= 1e-9);
    let p = pressure_profile(merged, u).unwrap();
    let up = u.eval(merged.x_plus);
    for j in 0..=20 {
        let x = merged.x_minus + merged.length() * j as f64 / 20.0;
        let expected = 1.0 - up / u.eval(x);
        assert!((p.eval(x) - expected).abs() <= 1e-14, "x={x}");
        assert!(p.eval(x) >= 0.0 && p.eval(x) < 1.0);
    }
    assert!(p.eval(merged.x_plus).abs() <= 1e-15);
}

#[test]
fn merge_time_is_consistent_with_the_gap() {
    let sys = three_blocks();
    let traj = evolve(&sys, 3.0, 1e-3).unwrap();
    let t = traj.events[0].t;
    let i = traj.events[0].left_index;
    let before = traj.state_at(t - 1e-6);
    let gap = before[i + 1].x_minus - before[i].x_plus;
    assert!(gap > 0.0 && gap < 1e-5, "gap {gap}");
}

#[test]
fn ftl_chain_keeps_order_and_mass() {
    let u = converging();
    for k in [1.0, 16.0, 64.0] {
        let chain = AgentChain::from_block(-1.0, 0.5, 0.6, 100, k, u.clone()).unwrap();
        let dt = chain.suggested_dt();
        let (end, traj) = integrate(&chain, 1.5, dt, 50).unwrap();
        for x in &traj.positions {
            assert!(x.windows(2).all(|w| w[0] < w[1]), "k={k}");
        }
        let grid = Grid1D::new(-3.0, 4.0, 700).unwrap();
        let rho = empirical_density(end.positions(), end.delta(), &grid);
        let m: f64 = rho.values().iter().sum::<f64>() * grid.dx();
        let expected = end.delta() * (end.len() - 1) as f64;
        assert!((m - expected).abs() <= 1e-12, "k={k}: {m} vs {expected}");
        assert!((expected - 0.6 * 1.5).abs() <= 1e-12);
        let max = rho.values().iter().cloned().fold(0.0, f64::max);
        assert!(max <= 1.0 + 1e-9, "k={k}: {max}");
    }
}
