//! Front tracking for the 1D hard-congestion limit.
//!
//! Each saturated block `[x-, x+]` moves by
//!
//!   (x+)' = U(x+),    (x-)' = (U(x+) - rho_b U(x-)) / (1 - rho_b),
//!
//! where `rho_b` is the ambient density right behind the rear. Endpoints are
//! integrated with fixed-step RK4; when a gap between consecutive blocks
//! closes, the crossing time is bisected and the two blocks are replaced by
//! their union. Inside a block the pressure is p = 1 - U(x+)/U(x).

use crate::diagnostics::LimitState;
use crate::error::{Error, Result};
use crate::velocity::VelocityField1D;

/// Bisection tolerance for merge times.
pub const MERGE_TOL: f64 = 1e-10;

/// Samples per unit length used to check the sign of U and U' on the hull.
const HULL_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub x_minus: f64,
    pub x_plus: f64,
    /// Ambient density immediately behind the rear.
    pub rho_behind: f64,
}

impl Block {
    pub fn new(x_minus: f64, x_plus: f64, rho_behind: f64) -> Self {
        Self {
            x_minus,
            x_plus,
            rho_behind,
        }
    }

    pub fn length(&self) -> f64 {
        self.x_plus - self.x_minus
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_minus && x <= self.x_plus
    }
}

/// Two blocks joined at `t`; `left_index` is the rear block's index before
/// the merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeEvent {
    pub t: f64,
    pub left_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    blocks: Vec<Block>,
    velocity: VelocityField1D,
}

impl BlockSystem {
    pub fn new(blocks: Vec<Block>, velocity: VelocityField1D) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidScenario("block system without blocks".into()));
        }
        for (j, b) in blocks.iter().enumerate() {
            if !(b.rho_behind >= 0.0) {
                return Err(Error::ValueOutOfRange(b.rho_behind));
            }
            if b.rho_behind >= 1.0 {
                return Err(Error::DegenerateBlock(b.rho_behind));
            }
            if !(b.x_minus < b.x_plus) {
                return Err(Error::InvalidScenario(format!(
                    "block {j} has x- = {} >= x+ = {}",
                    b.x_minus, b.x_plus
                )));
            }
            if j > 0 && !(blocks[j - 1].x_plus < b.x_minus) {
                return Err(Error::InvalidScenario(format!("blocks {} and {j} overlap or touch", j - 1)));
            }
        }
        let s = Self { blocks, velocity };
        s.check_hull()?;
        Ok(s)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn velocity(&self) -> &VelocityField1D {
        &self.velocity
    }

    fn check_hull(&self) -> Result<()> {
        let a = self.blocks[0].x_minus;
        let b = self.blocks[self.blocks.len() - 1].x_plus;
        let n = ((b - a) * HULL_SAMPLES as f64).ceil().max(1.0) as usize;
        for i in 0..=n {
            let x = a + (b - a) * i as f64 / n as f64;
            check_point(&self.velocity, x)?;
        }
        Ok(())
    }
}

fn check_point(u: &VelocityField1D, x: f64) -> Result<()> {
    let value = u.eval(x);
    if !(value > 0.0) {
        return Err(Error::NonPositiveVelocity { x, value });
    }
    let slope = u.derivative(x);
    if slope > 1e-12 {
        return Err(Error::VelocityNotDecreasing { x, slope });
    }
    Ok(())
}

/// Endpoint velocities `(rear, front)` for every block.
pub fn block_rhs(system: &BlockSystem) -> Result<Vec<(f64, f64)>> {
    system
        .blocks
        .iter()
        .map(|b| endpoint_velocities(b, &system.velocity))
        .collect()
}

fn endpoint_velocities(b: &Block, u: &VelocityField1D) -> Result<(f64, f64)> {
    if b.rho_behind >= 1.0 {
        return Err(Error::DegenerateBlock(b.rho_behind));
    }
    let front = u.eval(b.x_plus);
    let rear = if b.rho_behind == 0.0 {
        front
    } else {
        (front - b.rho_behind * u.eval(b.x_minus)) / (1.0 - b.rho_behind)
    };
    Ok((rear, front))
}

/// Pressure inside one block: p(x) = 1 - U(x+)/U(x), zero outside.
#[derive(Debug, Clone)]
pub struct PressureProfile<'a> {
    block: Block,
    u_plus: f64,
    velocity: &'a VelocityField1D,
}

impl PressureProfile<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        if !self.block.contains(x) {
            return 0.0;
        }
        1.0 - self.u_plus / self.velocity.eval(x)
    }
}

pub fn pressure_profile(block: Block, u: &VelocityField1D) -> Result<PressureProfile<'_>> {
    for x in [block.x_minus, block.x_plus] {
        let value = u.eval(x);
        if !(value > 0.0) {
            return Err(Error::NonPositiveVelocity { x, value });
        }
    }
    Ok(PressureProfile {
        block,
        u_plus: u.eval(block.x_plus),
        velocity: u,
    })
}

/// Limit density: 1 inside a block, the ambient density of the next block
/// downstream in a gap or behind the first rear, 0 ahead of the last front.
pub fn limit_density(blocks: &[Block], x: f64) -> f64 {
    for b in blocks {
        if x < b.x_minus {
            return b.rho_behind;
        }
        if x <= b.x_plus {
            return 1.0;
        }
    }
    0.0
}

fn limit_pressure(blocks: &[Block], u: &VelocityField1D, x: f64) -> f64 {
    blocks
        .iter()
        .find(|b| b.contains(x))
        .map_or(0.0, |b| 1.0 - u.eval(b.x_plus) / u.eval(x))
}

/// Recorded evolution. Samples at a merge time appear twice, before and
/// after the merge; evaluation at that instant uses the merged state.
#[derive(Debug, Clone)]
pub struct FrontTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Block>>,
    pub events: Vec<MergeEvent>,
    velocity: VelocityField1D,
}

impl FrontTrajectory {
    pub fn velocity(&self) -> &VelocityField1D {
        &self.velocity
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Blocks at time `t` by cubic Hermite interpolation between samples.
    pub fn state_at(&self, t: f64) -> Vec<Block> {
        let n = self.times.len();
        let j = self.times.partition_point(|&s| s <= t);
        if j == 0 {
            return self.states[0].clone();
        }
        if j == n {
            return self.states[n - 1].clone();
        }
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let (a, b) = (&self.states[j - 1], &self.states[j]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let u = &self.velocity;
        a.iter()
            .zip(b)
            .map(|(ba, bb)| {
                let (ra, fa) = endpoint_velocities(ba, u).unwrap_or((0.0, 0.0));
                let (rb, fb) = endpoint_velocities(bb, u).unwrap_or((0.0, 0.0));
                Block {
                    x_minus: hermite(s, h, ba.x_minus, ra, bb.x_minus, rb),
                    x_plus: hermite(s, h, ba.x_plus, fa, bb.x_plus, fb),
                    rho_behind: ba.rho_behind,
                }
            })
            .collect()
    }

    /// Front and rear positions as a row `t x_minus_1 x_plus_1 ...` per sample.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# t x_minus_1 x_plus_1 ...\n");
        for (t, st) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.12e}"));
            for b in st {
                out.push_str(&format!(" {:.12e} {:.12e}", b.x_minus, b.x_plus));
            }
            out.push('\n');
        }
        out
    }

    pub fn events_table(&self) -> String {
        let mut out = String::from("# t_merge left_index\n");
        for e in &self.events {
            out.push_str(&format!("{:.12e} {}\n", e.t, e.left_index));
        }
        out
    }
}

fn hermite(s: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

impl LimitState for FrontTrajectory {
    fn time_span(&self) -> (f64, f64) {
        (self.times[0], self.t_end())
    }

    fn time_breaks(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.t).collect()
    }

    fn space_breaks(&self, t: f64) -> Vec<f64> {
        self.state_at(t)
            .iter()
            .flat_map(|b| [b.x_minus, b.x_plus])
            .collect()
    }

    fn density(&self, t: f64, x: f64) -> f64 {
        limit_density(&self.state_at(t), x)
    }

    fn pressure(&self, t: f64, x: f64) -> f64 {
        limit_pressure(&self.state_at(t), &self.velocity, x)
    }

    fn saturated(&self, t: f64, x: f64) -> bool {
        self.state_at(t).iter().any(|b| b.contains(x))
    }

    fn slice(&self, t: f64) -> Box<dyn Fn(f64) -> (f64, f64, bool) + '_> {
        let blocks = self.state_at(t);
        Box::new(move |x| {
            let p = limit_pressure(&blocks, &self.velocity, x);
            let sat = blocks.iter().any(|b| b.contains(x));
            (limit_density(&blocks, x), p, sat)
        })
    }
}

fn rk4(blocks: &[Block], u: &VelocityField1D, h: f64) -> Result<Vec<Block>> {
    let shift = |bs: &[Block], d: &[(f64, f64)], c: f64| -> Vec<Block> {
        bs.iter()
            .zip(d)
            .map(|(b, &(r, f))| Block {
                x_minus: b.x_minus + c * r,
                x_plus: b.x_plus + c * f,
                rho_behind: b.rho_behind,
            })
            .collect()
    };
    let rhs = |bs: &[Block]| -> Result<Vec<(f64, f64)>> { bs.iter().map(|b| endpoint_velocities(b, u)).collect() };
    let k1 = rhs(blocks)?;
    let k2 = rhs(&shift(blocks, &k1, 0.5 * h))?;
    let k3 = rhs(&shift(blocks, &k2, 0.5 * h))?;
    let k4 = rhs(&shift(blocks, &k3, h))?;
    Ok(blocks
        .iter()
        .enumerate()
        .map(|(j, b)| Block {
            x_minus: b.x_minus + h / 6.0 * (k1[j].0 + 2.0 * k2[j].0 + 2.0 * k3[j].0 + k4[j].0),
            x_plus: b.x_plus + h / 6.0 * (k1[j].1 + 2.0 * k2[j].1 + 2.0 * k3[j].1 + k4[j].1),
            rho_behind: b.rho_behind,
        })
        .collect())
}

fn first_closed_gap(blocks: &[Block]) -> Option<usize> {
    (1..blocks.len()).find(|&j| blocks[j].x_minus <= blocks[j - 1].x_plus)
}

/// Integrate the block system to `t_end` with RK4 steps of at most `dt_hint`.
pub fn evolve(system: &BlockSystem, t_end: f64, dt_hint: f64) -> Result<FrontTrajectory> {
    if !(t_end > 0.0 && t_end.is_finite() && dt_hint > 0.0) {
        return Err(Error::InvalidScenario(format!("t_end = {t_end}, dt = {dt_hint}")));
    }
    let u = &system.velocity;
    let mut blocks = system.blocks.clone();
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![blocks.clone()];
    let mut events = Vec::new();
    while t < t_end {
        let h = dt_hint.min(t_end - t);
        let mut next = rk4(&blocks, u, h)?;
        if first_closed_gap(&next).is_some() {
            // earliest closing gap: shrink the step by bisection on RK4 from t
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > MERGE_TOL {
                let mid = 0.5 * (lo + hi);
                if first_closed_gap(&rk4(&blocks, u, mid)?).is_some() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let te = 0.5 * (lo + hi);
            let at = rk4(&blocks, u, te)?;
            let j = (1..at.len())
                .min_by(|&a, &b| {
                    let ga = at[a].x_minus - at[a - 1].x_plus;
                    let gb = at[b].x_minus - at[b - 1].x_plus;
                    ga.total_cmp(&gb)
                })
                .expect("at least two blocks");
            t += te;
            times.push(t);
            states.push(at.clone());
            let mut merged = at;
            let right = merged.remove(j);
            merged[j - 1].x_plus = right.x_plus;
            events.push(MergeEvent { t, left_index: j - 1 });
            times.push(t);
            states.push(merged.clone());
            blocks = merged;
            continue;
        }
        for (j, b) in next.iter().enumerate() {
            if !(b.x_plus > b.x_minus) {
                return Err(Error::FrontCatching { index: j, t: t + h });
            }
            check_point(u, b.x_minus)?;
            check_point(u, b.x_plus)?;
        }
        t = if t_end - (t + h) < 1e-14 * t_end { t_end } else { t + h };
        blocks = std::mem::take(&mut next);
        times.push(t);
        states.push(blocks.clone());
    }
    Ok(FrontTrajectory {
        times,
        states,
        events,
        velocity: u.clone(),
    })
}
