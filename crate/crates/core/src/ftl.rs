//! Follow-the-leader agents.
//!
//! Agent `i` sees the local density rho_i = min(delta / (x_{i+1} - x_i), 1)
//! and moves at (1 - rho_i^k) U(x_i); the leader moves at U(x_N). With
//! rho = delta / headway this is a Lagrangian discretisation of
//! rho_t + (rho (1 - rho^k) U)_x = 0.

use crate::error::{Error, Result};
use crate::flux::pow_k;
use crate::grid::{DensityField, Grid1D};
use crate::velocity::VelocityField1D;

/// Retries with a halved step before giving up.
pub const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentChain {
    positions: Vec<f64>,
    delta: f64,
    k: f64,
    velocity: VelocityField1D,
}

impl AgentChain {
    pub fn new(positions: Vec<f64>, delta: f64, k: f64, velocity: VelocityField1D) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidScenario("a chain needs at least two agents".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidScenario(format!("delta = {delta}")));
        }
        if !(k.is_finite() && k >= 1.0) {
            return Err(Error::InvalidScenario(format!("k = {k}")));
        }
        check_order(&positions)?;
        Ok(Self {
            positions,
            delta,
            k,
            velocity,
        })
    }

    /// `n` agents spread evenly over `[lo, hi]` so that the painted density
    /// equals `value` on the block.
    pub fn from_block(lo: f64, hi: f64, value: f64, n: usize, k: f64, velocity: VelocityField1D) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::ValueOutOfRange(value));
        }
        if n < 2 || !(hi > lo) {
            return Err(Error::InvalidScenario(format!("block [{lo}, {hi}] with {n} agents")));
        }
        let gap = (hi - lo) / (n - 1) as f64;
        let positions = (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + i as f64 * gap })
            .collect();
        Self::new(positions, value * gap, k, velocity)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Step size for which RK4 stays well inside its stability region:
    /// the closure's sensitivity to the headway is at most k sup|U| / delta.
    pub fn suggested_dt(&self) -> f64 {
        let sup = self.velocity.bounds().sup.max(1e-300);
        0.5 * self.delta / (self.k * sup)
    }
}

fn check_order(x: &[f64]) -> Result<()> {
    match x.windows(2).position(|w| !(w[1] > w[0])) {
        Some(i) => Err(Error::OrderingViolated { index: i, next: i + 1 }),
        None => Ok(()),
    }
}

fn velocities(x: &[f64], delta: f64, k: f64, u: &VelocityField1D, out: &mut Vec<f64>) -> Result<()> {
    check_order(x)?;
    out.clear();
    for w in x.windows(2) {
        let rho = (delta / (w[1] - w[0])).min(1.0);
        out.push((1.0 - pow_k(rho, k)) * u.eval(w[0]));
    }
    out.push(u.eval(x[x.len() - 1]));
    Ok(())
}

pub fn ftl_rhs(chain: &AgentChain) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(chain.len());
    velocities(&chain.positions, chain.delta, chain.k, &chain.velocity, &mut v)?;
    Ok(v)
}

/// Sampled trajectory; `positions[j]` belongs to `times[j]`.
#[derive(Debug, Clone)]
pub struct FtlTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub delta: f64,
}

impl FtlTrajectory {
    /// Rows `t x_1 ... x_N`, keeping every `stride`-th agent (and the leader).
    pub fn to_table(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut out = String::from("# t x_1 ... x_N\n");
        for (t, x) in self.times.iter().zip(&self.positions) {
            out.push_str(&format!("{t:.12e}"));
            for (i, xi) in x.iter().enumerate() {
                if i % stride == 0 || i + 1 == x.len() {
                    out.push_str(&format!(" {xi:.12e}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

struct Rk4 {
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Rk4 {
    fn try_step(&mut self, chain: &AgentChain, h: f64) -> Result<Vec<f64>> {
        let x = &chain.positions;
        let (d, k, u) = (chain.delta, chain.k, &chain.velocity);
        velocities(x, d, k, u, &mut self.k[0])?;
        for s in 1..4 {
            let c = if s == 3 { h } else { 0.5 * h };
            self.stage.clear();
            self.stage.extend(x.iter().zip(&self.k[s - 1]).map(|(xi, vi)| xi + c * vi));
            velocities(&self.stage, d, k, u, &mut self.k[s])?;
        }
        let next: Vec<f64> = (0..x.len())
            .map(|i| x[i] + h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]))
            .collect();
        check_order(&next)?;
        Ok(next)
    }
}

/// Fixed-step RK4 to `t_end`. A step that breaks the ordering is retried at
/// half the size, at most [`MAX_HALVINGS`] times. Every `record_every`-th
/// step is stored, plus the final state.
pub fn integrate(chain: &AgentChain, t_end: f64, dt: f64, record_every: usize) -> Result<(AgentChain, FtlTrajectory)> {
    if !(t_end >= 0.0 && dt > 0.0) {
        return Err(Error::InvalidScenario(format!("t_end = {t_end}, dt = {dt}")));
    }
    let record_every = record_every.max(1);
    let mut cur = chain.clone();
    let mut rk = Rk4 {
        k: Default::default(),
        stage: Vec::new(),
    };
    let mut t = 0.0;
    let mut traj = FtlTrajectory {
        times: vec![0.0],
        positions: vec![cur.positions.clone()],
        delta: chain.delta,
    };
    let mut n = 0usize;
    while t < t_end {
        let mut h = dt.min(t_end - t);
        let mut halvings = 0;
        let next = loop {
            match rk.try_step(&cur, h) {
                Ok(x) => break x,
                Err(Error::OrderingViolated { .. }) if halvings < MAX_HALVINGS => {
                    h *= 0.5;
                    halvings += 1;
                }
                Err(Error::OrderingViolated { .. }) => return Err(Error::StepCollapse { halvings, t }),
                Err(e) => return Err(e),
            }
        };
        cur.positions = next;
        t = if t_end - (t + h) < 1e-14 * t_end.max(1.0) { t_end } else { t + h };
        n += 1;
        if n.is_multiple_of(record_every) || t == t_end {
            traj.times.push(t);
            traj.positions.push(cur.positions.clone());
        }
    }
    Ok((cur, traj))
}

/// Paint delta / (x_{i+1} - x_i) on each headway and average over cells.
/// Headways outside the grid are dropped.
pub fn empirical_density(positions: &[f64], delta: f64, grid: &Grid1D) -> DensityField {
    let n = grid.n_cells();
    let mut v = vec![0.0; n];
    let (x0, dx) = (grid.x_min(), grid.dx());
    for w in positions.windows(2) {
        let rho = delta / (w[1] - w[0]);
        let a = ((w[0] - x0) / dx).max(0.0);
        let b = ((w[1] - x0) / dx).min(n as f64);
        if b <= a {
            continue;
        }
        let (ia, ib) = (a.floor() as usize, (b.ceil() as usize).min(n));
        for (i, cell) in v.iter_mut().enumerate().take(ib).skip(ia) {
            let lo = a.max(i as f64);
            let hi = b.min(i as f64 + 1.0);
            if hi > lo {
                *cell += rho * (hi - lo);
            }
        }
    }
    DensityField::from_values(*grid, v).expect("length matches the grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> VelocityField1D {
        VelocityField1D::constant(1.0, -10.0, 10.0).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let c = AgentChain::new(vec![0.0, 0.1, 0.2], 0.1, 3.0, one()).unwrap();
        assert_eq!(ftl_rhs(&c).unwrap(), vec![0.0, 0.0, 1.0]);
        let c = AgentChain::new(vec![0.0, 0.2, 5.0], 0.1, 1.0, one()).unwrap();
        let v = ftl_rhs(&c).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert_eq!(v[2], 1.0);
        assert!(matches!(
            AgentChain::new(vec![0.0, 0.0], 0.1, 1.0, one()),
            Err(Error::OrderingViolated { index: 0, next: 1 })
        ));
    }

    #[test]
    fn free_pair_translates() {
        let c = AgentChain::new(vec![0.0, 5.0], 1e-6, 2.0, one()).unwrap();
        let (end, _) = integrate(&c, 1.0, 0.01, 1).unwrap();
        assert!((end.positions()[1] - 6.0).abs() < 1e-12);
        assert!((end.positions()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn column_relaxes_to_leader_speed() {
        let c = AgentChain::from_block(0.0, 1.0, 1.0, 11, 2.0, one()).unwrap();
        let (mid, _) = integrate(&c, 2.0, c.suggested_dt(), 100).unwrap();
        let (end, _) = integrate(&c, 8.0, c.suggested_dt(), 100).unwrap();
        let (v2, v8) = (ftl_rhs(&mid).unwrap(), ftl_rhs(&end).unwrap());
        // headways grow without bound, so the approach is only algebraic
        assert!(v2.iter().zip(&v8).all(|(a, b)| b >= a));
        assert!(v8.iter().all(|&s| s > 0.8 && s <= 1.0), "{v8:?}");
    }

    #[test]
    fn empirical_density_paints_headways() {
        let g = Grid1D::new(-1.0, 2.0, 30).unwrap();
        let x: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let f = empirical_density(&x, 0.05, &g);
        for i in 10..20 {
            assert!((f.values()[i] - 0.5).abs() < 1e-12, "{}", f.values()[i]);
        }
        let m: f64 = f.values().iter().sum::<f64>() * g.dx();
        assert!((m - 0.5).abs() < 1e-12);
        let jam = AgentChain::from_block(0.0, 1.0, 1.0, 101, 4.0, one()).unwrap();
        let f = empirical_density(jam.positions(), jam.delta(), &g);
        assert!((f.values()[15] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ordering_survives_stiff_closure() {
        let u = VelocityField1D::affine(2.0, -1.0, -1.0, 4.0).unwrap();
        let c = AgentChain::from_block(0.0, 0.5, 1.0, 200, 32.0, u).unwrap();
        let (end, tr) = integrate(&c, 0.5, 10.0 * c.suggested_dt(), 10).unwrap();
        assert!(end.positions().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*tr.times.last().unwrap(), 0.5);
    }
}
