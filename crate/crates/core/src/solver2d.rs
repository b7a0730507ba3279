//! Two-dimensional integrator by Strang dimensional splitting.
//!
//! A step is X(dt/2) Y(dt) X(dt/2), each sweep running the 1D line kernel on
//! every row (or column) with the face-normal component of U. Columns are
//! gathered into a transposed buffer so that both sweeps work on contiguous
//! lines. Lines are independent within a sweep and run on the rayon pool when
//! there are enough of them; the result does not depend on the schedule.

use rayon::prelude::*;

use crate::diagnostics::{self, DiagnosticSeries};
use crate::error::{Error, Result};
use crate::flux::Flux;
use crate::grid::{DensityField2D, Grid2D, GUARD_CELLS};
use crate::scenario::{build_initial_2d, Scenario, Setup};
use crate::solver1d::{
    active_window, line_step, output_times, prepare, violation, window_speed, DiffusionMode, StepControl, Workspace,
    GUARD_TOL,
};
use crate::velocity::VelocityField2D;

/// Below this many lines a sweep runs sequentially.
const PAR_MIN_LINES: usize = 64;

/// Lines of equal length stored back to back, with `len + 1` face
/// velocities per line.
#[derive(Debug, Clone)]
struct Lines {
    len: usize,
    u_face: Vec<f64>,
}

impl Lines {
    fn faces(&self, line: usize) -> &[f64] {
        &self.u_face[line * (self.len + 1)..(line + 1) * (self.len + 1)]
    }
}

#[derive(Debug, Clone)]
pub struct Solver2D {
    field: DensityField2D,
    velocity: VelocityField2D,
    rows: Lines,
    cols: Lines,
    transposed: Vec<f64>,
    flux: Flux,
    eps: f64,
    control: StepControl,
    parallel: bool,
    t: f64,
    steps: u64,
}

impl Solver2D {
    pub fn new(
        field: DensityField2D,
        velocity: VelocityField2D,
        k: f64,
        eps: f64,
        control: StepControl,
    ) -> Result<Self> {
        control.validate()?;
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidScenario(format!("eps = {eps}")));
        }
        if let Some((cell, value)) = field.invariant_violation() {
            return Err(Error::InvariantRegion { cell, value, t: 0.0 });
        }
        if guard_violated_2d(field.values(), field.grid()) {
            return Err(Error::DomainOverflow { t: 0.0 });
        }
        let g = *field.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let mut ux = Vec::with_capacity((nx + 1) * ny);
        for j in 0..ny {
            let y = g.y.center(j);
            ux.extend((0..=nx).map(|i| velocity.eval([g.x.face(i), y])[0]));
        }
        let mut uy = Vec::with_capacity((ny + 1) * nx);
        for i in 0..nx {
            let x = g.x.center(i);
            uy.extend((0..=ny).map(|j| velocity.eval([x, g.y.face(j)])[1]));
        }
        if ux.iter().chain(&uy).any(|u| !u.is_finite()) {
            return Err(Error::InvalidVelocity("non-finite on a face".into()));
        }
        Ok(Self {
            field,
            velocity,
            rows: Lines { len: nx, u_face: ux },
            cols: Lines { len: ny, u_face: uy },
            transposed: vec![0.0; nx * ny],
            flux: Flux::new(k)?,
            eps,
            control,
            parallel: true,
            t: 0.0,
            steps: 0,
        })
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        match &scenario.setup {
            Setup::TwoD {
                grid,
                velocity,
                blocks,
            } => Self::new(
                build_initial_2d(blocks, grid)?,
                *velocity,
                scenario.k,
                scenario.eps,
                scenario.control,
            ),
            Setup::OneD { .. } => Err(Error::InvalidScenario("1D scenario given to the 2D solver".into())),
        }
    }

    /// Allow or forbid row parallelism.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn field(&self) -> &DensityField2D {
        &self.field
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn flux(&self) -> &Flux {
        &self.flux
    }

    pub fn velocity(&self) -> &VelocityField2D {
        &self.velocity
    }

    fn axis_dt(&self, speed: f64, h: f64) -> f64 {
        let rate = match self.control.diffusion {
            DiffusionMode::Explicit => speed / h + 2.0 * self.eps / (h * h),
            DiffusionMode::SplittingImplicit => speed / h,
        };
        if rate > 0.0 {
            self.control.cfl / rate
        } else {
            f64::INFINITY
        }
    }

    /// Smaller of the two 1D stable steps, capped by `dt_max`.
    pub fn stable_dt(&mut self) -> f64 {
        let g = *self.field.grid();
        let sx = lines_speed(self.field.values(), &self.rows, &self.flux, self.parallel);
        transpose(self.field.values(), &mut self.transposed, g.nx(), g.ny());
        let sy = lines_speed(&self.transposed, &self.cols, &self.flux, self.parallel);
        self.axis_dt(sx, g.x.dx())
            .min(self.axis_dt(sy, g.y.dx()))
            .min(self.control.dt_max)
    }

    /// One step that does not overshoot `t_limit`. Returns the step taken.
    pub fn step(&mut self, t_limit: f64) -> Result<f64> {
        let remaining = t_limit - self.t;
        if remaining <= 0.0 {
            return Ok(0.0);
        }
        let mut dt = self.stable_dt().min(remaining);
        if !dt.is_finite() || remaining - dt < 1e-12 * remaining.max(1.0) {
            dt = remaining;
        }
        self.advance(dt)?;
        if t_limit - self.t < 1e-14 * t_limit.abs().max(1.0) {
            self.t = t_limit;
        }
        Ok(dt)
    }

    /// Advance by exactly `dt` with the Strang sequence.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        let t_new = self.t + dt;
        self.sweep_x(0.5 * dt, t_new)?;
        self.sweep_y(dt, t_new)?;
        self.sweep_x(0.5 * dt, t_new)?;
        self.t = t_new;
        self.steps += 1;
        if guard_violated_2d(self.field.values(), self.field.grid()) {
            return Err(Error::DomainOverflow { t: self.t });
        }
        Ok(())
    }

    fn sweep_x(&mut self, tau: f64, t: f64) -> Result<()> {
        let dx = self.field.grid().x.dx();
        let (lambda, mu) = (tau / dx, self.eps * tau / (dx * dx));
        let mode = self.control.diffusion;
        let (flux, rows, parallel) = (&self.flux, &self.rows, self.parallel);
        sweep_lines(self.field.values_mut(), rows, flux, lambda, mu, mode, parallel)
            .map_or(Ok(()), |(line, cell, v)| Err(violation(line * rows.len + cell, v, t)))
    }

    fn sweep_y(&mut self, tau: f64, t: f64) -> Result<()> {
        let g = *self.field.grid();
        let dy = g.y.dx();
        let (lambda, mu) = (tau / dy, self.eps * tau / (dy * dy));
        transpose(self.field.values(), &mut self.transposed, g.nx(), g.ny());
        let bad = sweep_lines(
            &mut self.transposed,
            &self.cols,
            &self.flux,
            lambda,
            mu,
            self.control.diffusion,
            self.parallel,
        );
        transpose(&self.transposed, self.field.values_mut(), g.ny(), g.nx());
        match bad {
            Some((i, j, v)) => Err(violation(g.index(i, j), v, t)),
            None => Ok(()),
        }
    }

    /// Step until `t_target`, exactly.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.t < t_target {
            self.step(t_target)?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot2D {
        Snapshot2D {
            t: self.t,
            k: self.flux.k(),
            eps: self.eps,
            field: self.field.clone(),
        }
    }
}

/// `dst[c * rows + r] = src[r * cols + c]` for a `rows x cols` block.
fn transpose(src: &[f64], dst: &mut [f64], cols: usize, rows: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

fn lines_speed(data: &[f64], lines: &Lines, flux: &Flux, parallel: bool) -> f64 {
    let one = |(line, rho): (usize, &[f64]), ws: &mut Workspace| match active_window(rho) {
        None => 0.0,
        Some((a, b)) => {
            ws.invalidate();
            prepare(rho, flux, a, b, ws);
            window_speed(lines.faces(line), flux.k(), a, b, ws)
        }
    };
    let n_lines = data.len() / lines.len;
    if parallel && n_lines >= PAR_MIN_LINES {
        data.par_chunks(lines.len)
            .enumerate()
            .map_init(Workspace::default, |ws, item| one(item, ws))
            .reduce(|| 0.0, f64::max)
    } else {
        let mut ws = Workspace::default();
        data.chunks(lines.len)
            .enumerate()
            .map(|item| one(item, &mut ws))
            .fold(0.0, f64::max)
    }
}

/// Run the line kernel on every line. Returns the first violation in line
/// order as `(line, cell, value)`.
fn sweep_lines(
    data: &mut [f64],
    lines: &Lines,
    flux: &Flux,
    lambda: f64,
    mu: f64,
    mode: DiffusionMode,
    parallel: bool,
) -> Option<(usize, usize, f64)> {
    let one = |(line, rho): (usize, &mut [f64]), ws: &mut Workspace| {
        line_step(rho, lines.faces(line), flux, lambda, mu, mode, ws).map(|(c, v)| (line, c, v))
    };
    let n_lines = data.len() / lines.len;
    if parallel && n_lines >= PAR_MIN_LINES {
        data.par_chunks_mut(lines.len)
            .enumerate()
            .map_init(Workspace::default, |ws, item| one(item, ws))
            .reduce(|| None, |a, b| match (a, b) {
                (Some(x), Some(y)) => Some(if x.0 <= y.0 { x } else { y }),
                (a, b) => a.or(b),
            })
    } else {
        let mut ws = Workspace::default();
        data.chunks_mut(lines.len)
            .enumerate()
            .map(|item| one(item, &mut ws))
            .fold(None, |acc, r| acc.or(r))
    }
}

fn guard_violated_2d(values: &[f64], grid: &Grid2D) -> bool {
    let (nx, ny) = (grid.nx(), grid.ny());
    let g = GUARD_CELLS;
    (0..ny).any(|j| {
        (0..nx).any(|i| {
            let border = i < g || i + g >= nx || j < g || j + g >= ny;
            border && values[j * nx + i].abs() > GUARD_TOL
        })
    })
}

/// Immutable copy of a 2D state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot2D {
    pub t: f64,
    pub k: f64,
    pub eps: f64,
    pub field: DensityField2D,
}

#[derive(Debug, Clone)]
pub struct Trajectory2D {
    pub snapshots: Vec<Snapshot2D>,
    pub series: DiagnosticSeries,
    pub steps: u64,
}

/// Integrate a 2D scenario to its horizon.
pub fn run2d(scenario: &Scenario) -> Result<Trajectory2D> {
    let mut solver = Solver2D::from_scenario(scenario)?;
    let times = output_times(scenario.t_end, scenario.output_interval);
    let mut snapshots = Vec::with_capacity(times.len());
    let mut series = DiagnosticSeries::default();
    for &t in &times {
        solver.advance_to(t).map_err(|e| e.at_time(solver.time()))?;
        let snap = solver.snapshot();
        series.push(diagnostics::record_2d(
            snap.t,
            &snap.field,
            snap.k,
            solver.velocity(),
            scenario.sat_threshold,
        ));
        snapshots.push(snap);
    }
    Ok(Trajectory2D {
        snapshots,
        series,
        steps: solver.steps(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DensityField, Grid1D};
    use crate::scenario::Rect;
    use crate::solver1d::Solver1D;
    use crate::velocity::VelocityField1D;

    fn grid(n: usize) -> Grid2D {
        Grid2D::new(Grid1D::new(-2.0, 2.0, n).unwrap(), Grid1D::new(-2.0, 2.0, n).unwrap())
    }

    fn total(f: &DensityField2D) -> f64 {
        f.values().iter().sum::<f64>() * f.grid().cell_area()
    }

    #[test]
    fn plateau_interior_is_frozen() {
        let g = grid(40);
        let u = VelocityField2D::radial([0.0, 0.0], 1.0, [-2.0, 2.0, -2.0, 2.0]).unwrap();
        let f = build_initial_2d(&[Rect::new(-1.0, 1.0, -1.0, 1.0, 1.0)], &g).unwrap();
        let mut s = Solver2D::new(f, u, 4.0, 0.0, StepControl::default()).unwrap();
        let dt = s.stable_dt();
        s.advance(dt).unwrap();
        // cells 10..30 are the plateau; one layer next to its edge may feel the
        // outside only through the edge cells, which stay full since U points
        // inwards there
        for j in 11..29 {
            for i in 11..29 {
                assert_eq!(s.field().get(i, j), 1.0, "({i}, {j})");
            }
        }
    }

    #[test]
    fn radial_contraction_conserves_mass() {
        let g = grid(60);
        let u = VelocityField2D::radial([0.0, 0.0], 1.0, [-2.0, 2.0, -2.0, 2.0]).unwrap();
        let f = build_initial_2d(&[Rect::new(-1.0, 1.0, -1.0, 1.0, 0.5)], &g).unwrap();
        let mut s = Solver2D::new(f, u, 1.0, 0.0, StepControl::default()).unwrap();
        let m0 = total(s.field());
        for _ in 0..20 {
            let before = total(s.field());
            s.step(1.0).unwrap();
            assert!((total(s.field()) - before).abs() <= 1e-10 * m0);
        }
    }

    #[test]
    fn rows_match_1d_for_x_aligned_velocity() {
        let n = 48;
        let g = grid(n);
        let u = VelocityField2D::constant([1.0, 0.0], [-2.0, 2.0, -2.0, 2.0]).unwrap();
        let blocks = [Rect::new(-1.2, -0.3, -1.0, 0.5, 0.8), Rect::new(-0.3, 0.2, -0.5, 1.2, 0.3)];
        let f = build_initial_2d(&blocks, &g).unwrap();
        // eps = 0: the Y sweep then leaves every row untouched
        let mut s2 = Solver2D::new(f.clone(), u, 3.0, 0.0, StepControl::default()).unwrap();
        let u1 = VelocityField1D::constant(1.0, -2.0, 2.0).unwrap();
        let mut rows: Vec<Solver1D> = (0..n)
            .map(|j| {
                let line = DensityField::from_values(g.x, f.row(j).to_vec()).unwrap();
                Solver1D::new(line, u1.clone(), 3.0, 0.0, StepControl::default()).unwrap()
            })
            .collect();
        for _ in 0..8 {
            let dt = s2.stable_dt();
            s2.advance(dt).unwrap();
            for r in &mut rows {
                r.advance(0.5 * dt).unwrap();
                r.advance(0.5 * dt).unwrap();
            }
        }
        for (j, r) in rows.iter().enumerate() {
            for (a, b) in s2.field().row(j).iter().zip(r.field().values()) {
                assert!((a - b).abs() <= 1e-12, "row {j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn parallel_and_serial_agree() {
        let g = grid(80);
        let u = VelocityField2D::radial([0.2, -0.1], 1.0, [-2.0, 2.0, -2.0, 2.0]).unwrap();
        let f = build_initial_2d(&[Rect::new(-1.0, 0.0, -1.0, 1.0, 0.7), Rect::new(0.4, 1.2, -0.6, 0.2, 0.9)], &g)
            .unwrap();
        let mut a = Solver2D::new(f.clone(), u, 16.0, 0.0, StepControl::default()).unwrap();
        let mut b = Solver2D::new(f, u, 16.0, 0.0, StepControl::default())
            .unwrap()
            .with_parallel(false);
        a.advance_to(0.2).unwrap();
        b.advance_to(0.2).unwrap();
        assert_eq!(a.field(), b.field());
        assert_eq!(a.steps(), b.steps());
    }

    #[test]
    fn guard_band_is_enforced() {
        let g = grid(20);
        let u = VelocityField2D::constant([0.0, 1.0], [-2.0, 2.0, -2.0, 2.0]).unwrap();
        let f = build_initial_2d(&[Rect::new(-0.5, 0.5, 0.8, 1.2, 1.0)], &g).unwrap();
        let mut s = Solver2D::new(f, u, 1.0, 0.0, StepControl::default()).unwrap();
        assert!(matches!(s.advance_to(2.0), Err(Error::DomainOverflow { .. })));
    }

    #[test]
    fn zero_data_run() {
        let g = grid(20);
        let u = VelocityField2D::radial([0.0, 0.0], 1.0, [-2.0, 2.0, -2.0, 2.0]).unwrap();
        let sc = Scenario::two_d(g, u, vec![]).with_t_end(0.3);
        let tr = run2d(&sc).unwrap();
        assert!(tr.snapshots.iter().all(|s| s.field.values().iter().all(|&v| v == 0.0)));
    }
}
