//! Verification measurements on solver output.
//!
//! Discrete quantities (mass, variation, residuals) are computed with a
//! fixed summation order so reruns reproduce them bit for bit. Distributional
//! inequalities are paired against nonnegative bump test functions; a
//! positive pairing is a violation.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flux::{pow_k, Flux};
use crate::grid::{DensityField, DensityField2D, Grid1D};
use crate::quadrature::{integrate_piecewise, nodes_piecewise};
use rayon::prelude::*;
use crate::solver1d::{face_velocities, Snapshot1D};
use crate::velocity::{VelocityField1D, VelocityField2D};

pub const DEFAULT_SAT_THRESHOLD: f64 = 0.99;

/// Midpoint between the sonic density (k+1)^{-1/k} and 1. Cells above it sit
/// on the congested branch of F_k for every k.
pub fn congested_threshold(k: f64) -> f64 {
    0.5 * (1.0 + (k + 1.0).powf(-1.0 / k))
}

pub fn mass(field: &DensityField) -> f64 {
    field.values().iter().sum::<f64>() * field.grid().dx()
}

pub fn mass_2d(field: &DensityField2D) -> f64 {
    field.values().iter().sum::<f64>() * field.grid().cell_area()
}

/// Sum of |rho_{i+1} - rho_i|.
pub fn total_variation(field: &DensityField) -> f64 {
    field.values().windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Anisotropic variation sum(|D_x rho| dy + |D_y rho| dx).
pub fn total_variation_2d(field: &DensityField2D) -> f64 {
    let g = field.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let v = field.values();
    let mut tx = 0.0;
    let mut ty = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let c = v[j * nx + i];
            if i + 1 < nx {
                tx += (v[j * nx + i + 1] - c).abs();
            }
            if j + 1 < ny {
                ty += (v[(j + 1) * nx + i] - c).abs();
            }
        }
    }
    tx * g.y.dx() + ty * g.x.dx()
}

/// Bound e^{beta t} (tv0 + beta t) on the variation at time `t`.
pub fn gronwall_envelope(tv0: f64, beta: f64, t: f64) -> f64 {
    (beta * t).exp() * (tv0 + beta * t)
}

/// p = rho^k cell by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub values: Vec<f64>,
}

impl PressureField {
    pub fn from_density(values: &[f64], k: f64) -> Self {
        Self {
            values: values.iter().map(|&r| pow_k(r, k)).collect(),
        }
    }
}

/// max rho^k (1 - rho); never above 1/(k+1) for values in [0, 1].
pub fn law_of_state_residual(values: &[f64], k: f64) -> f64 {
    values
        .iter()
        .map(|&r| {
            let r = r.clamp(0.0, 1.0);
            pow_k(r, k) * (1.0 - r)
        })
        .fold(0.0, f64::max)
}

/// Cells with rho >= threshold, grouped into maximal runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedSet {
    /// Inclusive cell ranges, sorted and disjoint.
    pub components: Vec<(usize, usize)>,
    /// Boundary cells whose outward normal has n U > 0.
    pub frontal: Vec<usize>,
    /// Boundary cells whose outward normal has n U <= 0.
    pub rear: Vec<usize>,
}

impl SaturatedSet {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.components.iter().any(|&(a, b)| a <= i && i <= b)
    }
}

pub fn saturated_set(field: &DensityField, u: &VelocityField1D, threshold: f64) -> SaturatedSet {
    let g = field.grid();
    let v = field.values();
    let mut components = Vec::new();
    let mut i = 0;
    while i < v.len() {
        if v[i] >= threshold {
            let start = i;
            while i + 1 < v.len() && v[i + 1] >= threshold {
                i += 1;
            }
            components.push((start, i));
        }
        i += 1;
    }
    let mut frontal = Vec::new();
    let mut rear = Vec::new();
    for &(a, b) in &components {
        // outward normal -1 at a, +1 at b
        let mut mark = |cell: usize, normal: f64| {
            let list = if normal * u.eval(g.center(cell)) > 0.0 { &mut frontal } else { &mut rear };
            if !list.contains(&cell) {
                list.push(cell);
            }
        };
        mark(a, -1.0);
        mark(b, 1.0);
    }
    SaturatedSet {
        components,
        frontal,
        rear,
    }
}

/// max |D_x ((1 - p) U)| over saturated cells at least two cells inside
/// their component; centred differences.
pub fn complementarity_residual(
    field: &DensityField,
    p: &[f64],
    u: &VelocityField1D,
    threshold: f64,
) -> Result<f64> {
    let set = saturated_set(field, u, threshold);
    if set.is_empty() {
        return Err(Error::EmptySaturatedSet);
    }
    let g = field.grid();
    let w = |i: usize| (1.0 - p[i]) * u.eval(g.center(i));
    let mut worst = 0.0f64;
    for &(a, b) in &set.components {
        if b < a + 4 {
            continue;
        }
        for i in a + 2..=b - 2 {
            worst = worst.max(((w(i + 1) - w(i - 1)) / (2.0 * g.dx())).abs());
        }
    }
    Ok(worst)
}

/// max p over frontal boundary cells of the saturated set.
pub fn frontal_pressure_trace(
    field: &DensityField,
    p: &[f64],
    u: &VelocityField1D,
    threshold: f64,
) -> Result<f64> {
    let set = saturated_set(field, u, threshold);
    if set.is_empty() {
        return Err(Error::EmptySaturatedSet);
    }
    Ok(set.frontal.iter().map(|&i| p[i]).fold(0.0, f64::max))
}

/// Saturated set on a 2D grid with 4-connected components.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedSet2D {
    /// Cell indices of each component in flood-fill order.
    pub components: Vec<Vec<usize>>,
    pub frontal: Vec<usize>,
}

pub fn saturated_set_2d(field: &DensityField2D, u: &VelocityField2D, threshold: f64) -> SaturatedSet2D {
    let g = field.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let v = field.values();
    let sat = |i: isize, j: isize| {
        i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && v[j as usize * nx + i as usize] >= threshold
    };
    let mut label = vec![usize::MAX; v.len()];
    let mut components = Vec::new();
    let mut frontal = Vec::new();
    let dirs: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    for start in 0..v.len() {
        if v[start] < threshold || label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut cells = Vec::new();
        let mut queue = VecDeque::from([start]);
        label[start] = id;
        while let Some(c) = queue.pop_front() {
            cells.push(c);
            let (i, j) = ((c % nx) as isize, (c / nx) as isize);
            let mut is_front = false;
            for (di, dj) in dirs {
                if sat(i + di, j + dj) {
                    let n = (j + dj) as usize * nx + (i + di) as usize;
                    if label[n] == usize::MAX {
                        label[n] = id;
                        queue.push_back(n);
                    }
                } else {
                    let uc = u.eval(g.center(i as usize, j as usize));
                    if di as f64 * uc[0] + dj as f64 * uc[1] > 0.0 {
                        is_front = true;
                    }
                }
            }
            if is_front {
                frontal.push(c);
            }
        }
        components.push(cells);
    }
    SaturatedSet2D { components, frontal }
}

/// 2D analogue of [`complementarity_residual`]: max |div((1 - p) U)| over
/// saturated cells whose neighbours up to distance two along both axes are
/// saturated.
pub fn complementarity_residual_2d(
    field: &DensityField2D,
    p: &[f64],
    u: &VelocityField2D,
    threshold: f64,
) -> Result<f64> {
    let g = field.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let v = field.values();
    if !v.iter().any(|&r| r >= threshold) {
        return Err(Error::EmptySaturatedSet);
    }
    let w = |i: usize, j: usize| {
        let uc = u.eval(g.center(i, j));
        let q = 1.0 - p[j * nx + i];
        [q * uc[0], q * uc[1]]
    };
    let mut worst = 0.0f64;
    for j in 2..ny.saturating_sub(2) {
        for i in 2..nx.saturating_sub(2) {
            let inside = (-2isize..=2).all(|d| {
                v[j * nx + (i as isize + d) as usize] >= threshold
                    && v[(j as isize + d) as usize * nx + i] >= threshold
            });
            if !inside {
                continue;
            }
            let dx = (w(i + 1, j)[0] - w(i - 1, j)[0]) / (2.0 * g.x.dx());
            let dy = (w(i, j + 1)[1] - w(i, j - 1)[1]) / (2.0 * g.y.dx());
            worst = worst.max((dx + dy).abs());
        }
    }
    Ok(worst)
}

fn check_pair(a: &Snapshot1D, b: &Snapshot1D) -> Result<f64> {
    if a.k != b.k || a.eps != b.eps || a.field.grid() != b.field.grid() || !(b.t > a.t) {
        return Err(Error::MismatchedRun);
    }
    Ok(b.t - a.t)
}

/// Per-cell residual and the integral of its positive part.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub residual: Vec<f64>,
    pub positive_part: f64,
}

impl ResidualReport {
    fn from_cells(residual: Vec<f64>, dx: f64) -> Self {
        let positive_part = residual.iter().map(|r| r.max(0.0)).sum::<f64>() * dx;
        Self {
            residual,
            positive_part,
        }
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Discrete Kruzhkov residual of one scheme step from `before` to `after`.
///
/// The entropy flux is the numerical one built from the scheme's interface
/// solver, Q = G(a v c, b v c) - G(a ^ c, b ^ c) - eps (|b - c| - |a - c|)/dx,
/// with empty ghost cells beyond both ends. The divergence term uses face
/// velocity differences.
pub fn kruzhkov_residual(
    before: &Snapshot1D,
    after: &Snapshot1D,
    u: &VelocityField1D,
    c: f64,
) -> Result<ResidualReport> {
    let dt = check_pair(before, after)?;
    let g = before.field.grid();
    let flux = Flux::new(before.k)?;
    let dx = g.dx();
    let eps = before.eps;
    let r0 = before.field.values();
    let r1 = after.field.values();
    let n = r0.len();
    let uf = face_velocities(g, u);
    let state = |i: isize| if i < 0 || i >= n as isize { 0.0 } else { r0[i as usize] };
    let q: Vec<f64> = (0..=n)
        .map(|f| {
            let (a, b) = (state(f as isize - 1), state(f as isize));
            let hi = flux.godunov(a.max(c), b.max(c), uf[f]);
            let lo = flux.godunov(a.min(c), b.min(c), uf[f]);
            hi - lo - eps * ((b - c).abs() - (a - c).abs()) / dx
        })
        .collect();
    let fc = flux.value(c);
    let residual = (0..n)
        .map(|i| {
            let div = (uf[i + 1] - uf[i]) / dx;
            ((r1[i] - c).abs() - (r0[i] - c).abs()) / dt
                + (q[i + 1] - q[i]) / dx
                + fc * sgn(r0[i] - c) * div
        })
        .collect();
    Ok(ResidualReport::from_cells(residual, dx))
}

/// Kruzhkov constants `j / (m - 1)`, `j = 0..m`.
pub fn kruzhkov_lattice(m: usize) -> Vec<f64> {
    (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
}

/// Residual of the evolution inequality for rho^n,
///
///   d_t rho^n + U d_x[rho^n - n(k+1)/(n+k) rho^{n+k}]
///     + n (rho^n - rho^{n+k}) U' - eps d_xx rho^n <= 0,
///
/// evaluated between two snapshots: forward difference in time, centred
/// differences in space on the average of the two levels.
pub fn pressure_evolution_residual(
    before: &Snapshot1D,
    after: &Snapshot1D,
    u: &VelocityField1D,
    n_exp: f64,
) -> Result<ResidualReport> {
    let dt = check_pair(before, after)?;
    if before.eps <= 0.0 {
        return Err(Error::RequiresDiffusion);
    }
    let (k, eps) = (before.k, before.eps);
    let g = before.field.grid();
    let dx = g.dx();
    let r0 = before.field.values();
    let r1 = after.field.values();
    let m = r0.len();
    let coef = n_exp * (k + 1.0) / (n_exp + k);
    // time-averaged rho^n, flux potential and rho^{n+k}
    let avg = |f: &dyn Fn(f64) -> f64, i: usize| 0.5 * (f(r0[i]) + f(r1[i]));
    let pow_n = |r: f64| pow_k(r, n_exp);
    let pow_nk = |r: f64| pow_k(r, n_exp + k);
    let an: Vec<f64> = (0..m).map(|i| avg(&pow_n, i)).collect();
    let ank: Vec<f64> = (0..m).map(|i| avg(&pow_nk, i)).collect();
    let phi: Vec<f64> = (0..m).map(|i| an[i] - coef * ank[i]).collect();
    let at = |v: &[f64], i: isize| if i < 0 || i >= m as isize { 0.0 } else { v[i as usize] };
    let residual = (0..m)
        .map(|i| {
            let x = g.center(i);
            let ii = i as isize;
            let dphi = (at(&phi, ii + 1) - at(&phi, ii - 1)) / (2.0 * dx);
            let lap = (at(&an, ii + 1) - 2.0 * an[i] + at(&an, ii - 1)) / (dx * dx);
            (pow_n(r1[i]) - pow_n(r0[i])) / dt
                + u.eval(x) * dphi
                + n_exp * (an[i] - ank[i]) * u.derivative(x)
                - eps * lap
        })
        .collect();
    Ok(ResidualReport::from_cells(residual, dx))
}

/// exp(1 - 1/(1 - s^2)) on (-1, 1), zero outside.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

pub fn bump_derivative(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - s * s;
        -2.0 * s / (q * q) * bump(s)
    }
}

/// Nonnegative test function phi(t, x) = b((x - xc)/rx) b((t - tc)/rt).
/// With `rt = inf` it is constant in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub xc: f64,
    pub rx: f64,
    pub tc: f64,
    pub rt: f64,
}

impl TestFunction {
    pub fn spatial(xc: f64, rx: f64) -> Self {
        Self {
            xc,
            rx,
            tc: 0.0,
            rt: f64::INFINITY,
        }
    }

    fn time_factor(&self, t: f64) -> (f64, f64) {
        if self.rt.is_infinite() {
            (1.0, 0.0)
        } else {
            let s = (t - self.tc) / self.rt;
            (bump(s), bump_derivative(s) / self.rt)
        }
    }

    /// `(phi, phi_x, phi_t)` at one point.
    pub fn parts(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let s = (x - self.xc) / self.rx;
        let (b, db) = (bump(s), bump_derivative(s) / self.rx);
        let (tf, dtf) = self.time_factor(t);
        (b * tf, db * tf, b * dtf)
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        bump((x - self.xc) / self.rx) * self.time_factor(t).0
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        bump_derivative((x - self.xc) / self.rx) / self.rx * self.time_factor(t).0
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        bump((x - self.xc) / self.rx) * self.time_factor(t).1
    }

    pub fn x_support(&self) -> (f64, f64) {
        (self.xc - self.rx, self.xc + self.rx)
    }

    pub fn t_support(&self) -> (f64, f64) {
        (self.tc - self.rt, self.tc + self.rt)
    }
}

/// Space-time lattice of bumps: `nx` by `nt` centres on the open box, radii
/// equal to 1.5 lattice spacings so neighbouring supports overlap.
pub fn bump_lattice(x_range: (f64, f64), t_range: (f64, f64), nx: usize, nt: usize) -> Vec<TestFunction> {
    let hx = (x_range.1 - x_range.0) / (nx + 1) as f64;
    let ht = (t_range.1 - t_range.0) / (nt + 1) as f64;
    let rt = (1.5 * ht).min(t_range.1 - t_range.0);
    let mut out = Vec::with_capacity(nx * nt);
    for a in 1..=nt {
        let tc = t_range.0 + a as f64 * ht;
        // keep the time support inside the horizon
        let rt = rt.min(tc - t_range.0).min(t_range.1 - tc);
        for b in 1..=nx {
            out.push(TestFunction {
                xc: x_range.0 + b as f64 * hx,
                rx: 1.5 * hx,
                tc,
                rt,
            });
        }
    }
    out
}

/// Spatial bumps only (for pairings at a fixed time).
pub fn spatial_bumps(x_range: (f64, f64), nx: usize) -> Vec<TestFunction> {
    let hx = (x_range.1 - x_range.0) / (nx + 1) as f64;
    (1..=nx)
        .map(|b| TestFunction::spatial(x_range.0 + b as f64 * hx, 1.5 * hx))
        .collect()
}

/// A density/pressure pair on space-time that can be sampled pointwise,
/// with its discontinuity locations exposed for quadrature.
pub trait LimitState: Sync {
    fn time_span(&self) -> (f64, f64);
    /// Times at which the state changes non-smoothly.
    fn time_breaks(&self) -> Vec<f64>;
    /// Points where rho or p may jump at time `t`.
    fn space_breaks(&self, t: f64) -> Vec<f64>;
    fn density(&self, t: f64, x: f64) -> f64;
    fn pressure(&self, t: f64, x: f64) -> f64;
    /// Whether `(t, x)` lies in the saturated set.
    fn saturated(&self, t: f64, x: f64) -> bool {
        self.density(t, x) >= DEFAULT_SAT_THRESHOLD
    }
    /// `x -> (rho, p, saturated)` at a fixed time.
    fn slice(&self, t: f64) -> Box<dyn Fn(f64) -> (f64, f64, bool) + '_> {
        Box::new(move |x| (self.density(t, x), self.pressure(t, x), self.saturated(t, x)))
    }
}

/// Gauss panels across a test-function support, in each of x and t.
const PANELS: usize = 64;

/// Pairing of the limit Kruzhkov inequality with `phi`:
///
///   - int |rho - c| phi_t - int (|rho - c| - sgn(rho - c) p) U phi_x
///   + int c sgn(rho - c) U' phi,
///
/// nonpositive for an admissible pair.
pub fn limit_entropy_pairing(state: &dyn LimitState, u: &VelocityField1D, c: f64, phi: &TestFunction) -> f64 {
    limit_entropy_pairings(state, u, &[c], phi)[0]
}

/// [`limit_entropy_pairing`] for several constants in one pass.
pub fn limit_entropy_pairings(
    state: &dyn LimitState,
    u: &VelocityField1D,
    constants: &[f64],
    phi: &TestFunction,
) -> Vec<f64> {
    let mut acc = vec![0.0; constants.len()];
    let (t0, t1) = state.time_span();
    let (ta, tb) = phi.t_support();
    let (lo, hi) = (ta.max(t0), tb.min(t1));
    let (xa, xb) = phi.x_support();
    for (t, wt) in nodes_piecewise(lo, hi, &state.time_breaks(), PANELS) {
        let at = state.slice(t);
        for (x, wx) in nodes_piecewise(xa, xb, &state.space_breaks(t), PANELS) {
            let (r, p, _) = at(x);
            let (v, vx, vt) = phi.parts(t, x);
            let w = wt * wx;
            let ux = u.eval(x);
            let dux = u.derivative(x);
            for (a, &c) in acc.iter_mut().zip(constants) {
                let s = sgn(r - c);
                let d = (r - c).abs();
                *a += w * (-d * vt - (d - s * p) * ux * vx + c * s * dux * v);
            }
        }
    }
    acc
}

/// Largest pairing over a family of test functions and Kruzhkov constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingReport {
    pub max_pairing: f64,
    pub worst_c: f64,
    pub worst_index: usize,
}

pub fn limit_entropy_residual(
    state: &dyn LimitState,
    u: &VelocityField1D,
    constants: &[f64],
    tests: &[TestFunction],
) -> PairingReport {
    let values: Vec<Vec<f64>> = tests
        .par_iter()
        .map(|phi| limit_entropy_pairings(state, u, constants, phi))
        .collect();
    let mut best = PairingReport {
        max_pairing: f64::NEG_INFINITY,
        worst_c: f64::NAN,
        worst_index: 0,
    };
    for (ci, &c) in constants.iter().enumerate() {
        for (idx, v) in values.iter().enumerate() {
            if v[ci] > best.max_pairing {
                best = PairingReport {
                    max_pairing: v[ci],
                    worst_c: c,
                    worst_index: idx,
                };
            }
        }
    }
    best
}

/// Pairing of -U p_x + (1_sat - p) U' <= 0 with a spatial test function at
/// time `t`, after moving the derivative onto phi:
///
///   int p U phi_x + 1_sat U' phi.
pub fn limit_pressure_pairing(state: &dyn LimitState, u: &VelocityField1D, t: f64, phi: &TestFunction) -> f64 {
    let (xa, xb) = phi.x_support();
    let at = state.slice(t);
    integrate_piecewise(
        |x| {
            let (_, p, sat) = at(x);
            let sat = if sat { 1.0 } else { 0.0 };
            p * u.eval(x) * phi.dx(t, x) + sat * u.derivative(x) * phi.value(t, x)
        },
        xa,
        xb,
        &state.space_breaks(t),
        PANELS,
    )
}

pub fn limit_pressure_inequality(
    state: &dyn LimitState,
    u: &VelocityField1D,
    t: f64,
    tests: &[TestFunction],
) -> PairingReport {
    let mut best = PairingReport {
        max_pairing: f64::NEG_INFINITY,
        worst_c: f64::NAN,
        worst_index: 0,
    };
    for (idx, phi) in tests.iter().enumerate() {
        let v = limit_pressure_pairing(state, u, t, phi);
        if v > best.max_pairing {
            best = PairingReport {
                max_pairing: v,
                worst_c: f64::NAN,
                worst_index: idx,
            };
        }
    }
    best
}

/// Piecewise-constant (rho, p) on a grid, frozen in time; used to pair
/// finite-volume snapshots or hand-built fields.
#[derive(Debug, Clone)]
pub struct CellState<'a> {
    pub grid: &'a Grid1D,
    pub rho: &'a [f64],
    pub p: &'a [f64],
    pub threshold: f64,
    pub t_span: (f64, f64),
}

impl CellState<'_> {
    fn cell(&self, x: f64) -> Option<usize> {
        let g = self.grid;
        if x < g.x_min() || x >= g.x_max() {
            return None;
        }
        Some((((x - g.x_min()) / g.dx()) as usize).min(g.n_cells() - 1))
    }
}

impl LimitState for CellState<'_> {
    fn time_span(&self) -> (f64, f64) {
        self.t_span
    }

    fn time_breaks(&self) -> Vec<f64> {
        Vec::new()
    }

    fn space_breaks(&self, _t: f64) -> Vec<f64> {
        (0..=self.grid.n_cells()).map(|i| self.grid.face(i)).collect()
    }

    fn density(&self, _t: f64, x: f64) -> f64 {
        self.cell(x).map_or(0.0, |i| self.rho[i])
    }

    fn pressure(&self, _t: f64, x: f64) -> f64 {
        self.cell(x).map_or(0.0, |i| self.p[i])
    }

    fn saturated(&self, t: f64, x: f64) -> bool {
        self.density(t, x) >= self.threshold
    }
}

/// Finite-volume trajectory seen as a space-time state: piecewise constant
/// in space, linear in time between snapshots.
#[derive(Debug, Clone)]
pub struct SnapshotState<'a> {
    pub snapshots: &'a [Snapshot1D],
    pub threshold: f64,
}

impl SnapshotState<'_> {
    fn locate(&self, t: f64) -> (usize, f64) {
        let s = self.snapshots;
        let j = s.partition_point(|q| q.t <= t).clamp(1, s.len() - 1);
        let (a, b) = (&s[j - 1], &s[j]);
        (j - 1, ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0))
    }

    fn sample(&self, t: f64, x: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        if self.snapshots.len() == 1 {
            let s = &self.snapshots[0];
            return cell_value(s.field.grid(), s.field.values(), x).map_or(0.0, |r| f(r, s.k));
        }
        let (j, w) = self.locate(t);
        let (a, b) = (&self.snapshots[j], &self.snapshots[j + 1]);
        let va = cell_value(a.field.grid(), a.field.values(), x).map_or(0.0, |r| f(r, a.k));
        let vb = cell_value(b.field.grid(), b.field.values(), x).map_or(0.0, |r| f(r, b.k));
        (1.0 - w) * va + w * vb
    }
}

fn cell_value(g: &Grid1D, v: &[f64], x: f64) -> Option<f64> {
    if x < g.x_min() || x >= g.x_max() {
        return None;
    }
    Some(v[(((x - g.x_min()) / g.dx()) as usize).min(g.n_cells() - 1)])
}

impl LimitState for SnapshotState<'_> {
    fn time_span(&self) -> (f64, f64) {
        (self.snapshots[0].t, self.snapshots[self.snapshots.len() - 1].t)
    }

    fn time_breaks(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    fn space_breaks(&self, _t: f64) -> Vec<f64> {
        let g = self.snapshots[0].field.grid();
        (0..=g.n_cells()).map(|i| g.face(i)).collect()
    }

    fn density(&self, t: f64, x: f64) -> f64 {
        self.sample(t, x, |r, _| r)
    }

    fn pressure(&self, t: f64, x: f64) -> f64 {
        self.sample(t, x, pow_k)
    }

    fn saturated(&self, t: f64, x: f64) -> bool {
        self.density(t, x) >= self.threshold
    }
}

/// Crossing direction of a level in the direction of increasing x.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Up,
    Down,
}

/// First crossing of `level` inside `[x_lo, x_hi]`, linearly interpolated
/// between cell centres.
pub fn level_crossing(field: &DensityField, level: f64, window: (f64, f64), dir: Crossing) -> Result<f64> {
    let g = field.grid();
    let v = field.values();
    for i in 0..v.len() - 1 {
        let (xa, xb) = (g.center(i), g.center(i + 1));
        if xb < window.0 || xa > window.1 {
            continue;
        }
        let (a, b) = (v[i], v[i + 1]);
        let hit = match dir {
            Crossing::Up => a < level && b >= level,
            Crossing::Down => a >= level && b < level,
        };
        if hit {
            return Ok(xa + (level - a) / (b - a) * (xb - xa));
        }
    }
    Err(Error::LevelNotBracketed { level })
}

/// Maximal runs of cells with rho > `level`, as interpolated `(rear, front)`
/// crossing positions between cell centres.
pub fn level_components(field: &DensityField, level: f64) -> Vec<(f64, f64)> {
    let g = field.grid();
    let v = field.values();
    let cross = |i: usize| {
        let (a, b) = (v[i], v[i + 1]);
        g.center(i) + (level - a) / (b - a) * g.dx()
    };
    let mut out = Vec::new();
    let mut rear = None;
    for i in 0..v.len() {
        let inside = v[i] > level;
        match (inside, rear) {
            (true, None) => rear = Some(if i == 0 { g.x_min() } else { cross(i - 1) }),
            (false, Some(r)) => {
                out.push((r, cross(i - 1)));
                rear = None;
            }
            _ => {}
        }
    }
    if let Some(r) = rear {
        out.push((r, g.x_max()));
    }
    out
}

/// Least-squares slope of `x` against `t`.
pub fn fit_speed(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (st, sx) = points.iter().fold((0.0, 0.0), |(a, b), &(t, x)| (a + t, b + x));
    let (mt, mx) = (st / n, sx / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(t, x)| {
        (a + (t - mt) * (x - mx), b + (t - mt) * (t - mt))
    });
    num / den
}

/// Level-crossing positions over a trajectory and the fitted speed.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockTrack {
    pub points: Vec<(f64, f64)>,
    /// Least-squares speed over each sliding window of `window_len` points.
    pub local_speeds: Vec<(f64, f64)>,
    pub speed: f64,
}

/// Track the `dir` crossing of `level` inside `window` on every snapshot.
pub fn shock_tracker(
    snapshots: &[Snapshot1D],
    level: f64,
    window: (f64, f64),
    dir: Crossing,
    window_len: usize,
) -> Result<ShockTrack> {
    let points = snapshots
        .iter()
        .map(|s| level_crossing(&s.field, level, window, dir).map(|x| (s.t, x)))
        .collect::<Result<Vec<_>>>()?;
    let w = window_len.clamp(2, points.len().max(2));
    let local_speeds = points
        .windows(w)
        .map(|p| (0.5 * (p[0].0 + p[w - 1].0), fit_speed(p)))
        .collect();
    Ok(ShockTrack {
        speed: fit_speed(&points),
        local_speeds,
        points,
    })
}

/// One row of a diagnostic series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub mass: f64,
    pub total_variation: f64,
    pub max_density: f64,
    pub law_of_state: f64,
    pub components: usize,
    pub complementarity: Option<f64>,
    pub frontal_trace: Option<f64>,
    /// Max over Kruzhkov constants of the positive residual of one probe step.
    pub entropy_residual: Option<f64>,
    /// Positive residual of the rho^k evolution inequality over one probe step.
    pub pressure_residual: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticSeries {
    pub records: Vec<DiagnosticRecord>,
}

impl DiagnosticSeries {
    /// Append a record; timestamps must increase strictly.
    pub fn push(&mut self, r: DiagnosticRecord) {
        if let Some(last) = self.records.last() {
            assert!(r.t > last.t, "diagnostic times must increase ({} after {})", r.t, last.t);
        }
        self.records.push(r);
    }

    pub const HEADER: &'static str = "t mass tv max_rho law_of_state components complementarity frontal_trace entropy_residual pressure_residual";

    /// Plain-text table; missing values are written as `nan`.
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.12e}"));
        let mut s = format!("# {}\n", Self::HEADER);
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:.12e} {:.15e} {:.12e} {:.12e} {:.12e} {} {} {} {} {}",
                r.t,
                r.mass,
                r.total_variation,
                r.max_density,
                r.law_of_state,
                r.components,
                opt(r.complementarity),
                opt(r.frontal_trace),
                opt(r.entropy_residual),
                opt(r.pressure_residual)
            );
        }
        s
    }
}

/// Snapshot-level diagnostics for a 1D state.
pub fn record_1d(snap: &Snapshot1D, u: &VelocityField1D, threshold: f64) -> DiagnosticRecord {
    let v = snap.field.values();
    let p = PressureField::from_density(v, snap.k);
    let set = saturated_set(&snap.field, u, threshold);
    DiagnosticRecord {
        t: snap.t,
        mass: mass(&snap.field),
        total_variation: total_variation(&snap.field),
        max_density: v.iter().copied().fold(0.0, f64::max),
        law_of_state: law_of_state_residual(v, snap.k),
        components: set.components.len(),
        complementarity: complementarity_residual(&snap.field, &p.values, u, threshold).ok(),
        frontal_trace: frontal_pressure_trace(&snap.field, &p.values, u, threshold).ok(),
        entropy_residual: None,
        pressure_residual: None,
    }
}

/// Snapshot-level diagnostics for a 2D state.
pub fn record_2d(t: f64, field: &DensityField2D, k: f64, u: &VelocityField2D, threshold: f64) -> DiagnosticRecord {
    let v = field.values();
    let p = PressureField::from_density(v, k);
    let set = saturated_set_2d(field, u, threshold);
    DiagnosticRecord {
        t,
        mass: mass_2d(field),
        total_variation: total_variation_2d(field),
        max_density: v.iter().copied().fold(0.0, f64::max),
        law_of_state: law_of_state_residual(v, k),
        components: set.components.len(),
        complementarity: complementarity_residual_2d(field, &p.values, u, threshold).ok(),
        frontal_trace: if set.frontal.is_empty() {
            None
        } else {
            Some(set.frontal.iter().map(|&i| p.values[i]).fold(0.0, f64::max))
        },
        entropy_residual: None,
        pressure_residual: None,
    }
}
