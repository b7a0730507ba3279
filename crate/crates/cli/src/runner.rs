//! `run`, `sweep` and `compare`: dispatch to the solvers and write artifacts.
//!
//! Every file written here depends only on the configuration, so reruns give
//! byte-identical trees.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use stifflwr_core::diagnostics::{self, level_components, DiagnosticRecord, DiagnosticSeries};
use stifflwr_core::fronttrack::{self, limit_density, pressure_profile};
use stifflwr_core::ftl::{self, AgentChain};
use stifflwr_core::io::{snapshot_1d_table, snapshot_2d_table};
use stifflwr_core::solver1d::{self, output_times};
use stifflwr_core::{
    Block, BlockSystem, DensityField, Grid1D, Grid2D, Interval, Scenario, Setup, Solver2D,
};
use thiserror::Error;

use crate::config::{Config, SolverKind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Setup(String),
    #[error(transparent)]
    Solver(#[from] stifflwr_core::Error),
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| RunError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `dir` itself if it is absent or empty, otherwise the first absent or
/// empty `dir.vN`, N = 2, 3, ...
pub fn versioned_dir(dir: &Path) -> Result<PathBuf, RunError> {
    let usable = |p: &Path| match fs::read_dir(p) {
        Ok(mut it) => it.next().is_none(),
        Err(_) => !p.exists(),
    };
    if usable(dir) {
        return Ok(dir.to_path_buf());
    }
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    for v in 2.. {
        let cand = dir.with_file_name(format!("{name}.v{v}"));
        if usable(&cand) {
            return Ok(cand);
        }
    }
    unreachable!()
}

/// Result of one run: the summary rows and the failed checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub summary: Vec<(String, String)>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures.push(format!("{name}: {detail}"));
        }
    }

    /// `key = value` lines ending with the status and the failures.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.summary {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "status = {}", if self.ok() { "ok" } else { "fail" });
        for f in &self.failures {
            let _ = writeln!(s, "failure = {f}");
        }
        s
    }
}

fn e12(x: f64) -> String {
    format!("{x:.12e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), e12)
}

/// Invariant checks shared by the finite-volume runs.
fn check_series(out: &mut Outcome, series: &DiagnosticSeries, k: f64, m0: f64) {
    let bound = 1.0 / (k + 1.0);
    let mut drift: f64 = 0.0;
    let mut law: f64 = 0.0;
    let mut hi = f64::NEG_INFINITY;
    for r in &series.records {
        drift = drift.max((r.mass - m0).abs() / m0);
        law = law.max(r.law_of_state);
        hi = hi.max(r.max_density);
    }
    out.put("mass_drift", e12(drift));
    out.put("law_of_state_max", e12(law));
    out.put("law_of_state_bound", e12(bound));
    out.check("mass", drift <= 1e-10, format!("relative drift {drift:.3e} > 1e-10"));
    out.check(
        "law_of_state",
        law <= bound + 1e-14,
        format!("{law:.17e} > 1/(k+1) = {bound:.17e}"),
    );
    out.check("invariant_region", hi <= 1.0 + 1e-12, format!("max density {hi:.17e}"));
}

fn final_record(out: &mut Outcome, r: &DiagnosticRecord) {
    out.put("t_final", e12(r.t));
    out.put("tv_final", e12(r.total_variation));
    out.put("max_density_final", e12(r.max_density));
    out.put("components_final", r.components);
    out.put("complementarity_final", opt(r.complementarity));
    out.put("frontal_trace_final", opt(r.frontal_trace));
}

fn run_fv1d(sc: &Scenario, dir: &Path, out: &mut Outcome) -> Result<(), RunError> {
    let tr = match solver1d::run(sc) {
        Ok(tr) => tr,
        Err(e) => {
            out.failures.push(format!("solver: {e}"));
            return Ok(());
        }
    };
    for (i, s) in tr.snapshots.iter().enumerate() {
        write(&dir.join(format!("snapshots/snap_{i:04}.txt")), &snapshot_1d_table(s))?;
    }
    write(&dir.join("diagnostics.txt"), &tr.series.to_table())?;
    out.put("steps", tr.steps);
    check_series(out, &tr.series, sc.k, sc.initial_mass());
    if let Some(r) = tr.series.records.last() {
        final_record(out, r);
    }
    Ok(())
}

fn run_fv2d(sc: &Scenario, dir: &Path, out: &mut Outcome, parallel: bool) -> Result<(), RunError> {
    let mut solver = match Solver2D::from_scenario(sc) {
        Ok(s) => s.with_parallel(parallel),
        Err(e) => {
            out.failures.push(format!("solver: {e}"));
            return Ok(());
        }
    };
    let mut series = DiagnosticSeries::default();
    for (i, &t) in output_times(sc.t_end, sc.output_interval).iter().enumerate() {
        if let Err(e) = solver.advance_to(t) {
            out.failures.push(format!("solver: {e} (t = {})", solver.time()));
            break;
        }
        let snap = solver.snapshot();
        series.push(diagnostics::record_2d(
            snap.t,
            &snap.field,
            snap.k,
            solver.velocity(),
            sc.sat_threshold,
        ));
        write(&dir.join(format!("snapshots/snap_{i:04}.txt")), &snapshot_2d_table(&snap))?;
    }
    write(&dir.join("diagnostics.txt"), &series.to_table())?;
    out.put("steps", solver.steps());
    check_series(out, &series, sc.k, sc.initial_mass());
    if let Some(r) = series.records.last() {
        final_record(out, r);
    }
    Ok(())
}

fn one_d(sc: &Scenario) -> Result<(&Grid1D, &stifflwr_core::VelocityField1D, &[Interval]), RunError> {
    match &sc.setup {
        Setup::OneD {
            grid,
            velocity,
            blocks,
        } => Ok((grid, velocity, blocks)),
        Setup::TwoD { .. } => Err(RunError::Setup("this solver is one-dimensional".into())),
    }
}

/// Block system for the saturated intervals of a 1D scenario.
pub fn block_system(cfg: &Config) -> Result<BlockSystem, RunError> {
    let (_, u, blocks) = one_d(&cfg.scenario)?;
    if blocks.iter().any(|b| b.value != 1.0) {
        return Err(RunError::Setup("front tracking needs saturated blocks".into()));
    }
    let mut sorted: Vec<Block> = blocks
        .iter()
        .map(|b| Block::new(b.lo, b.hi, cfg.options.ambient))
        .collect();
    sorted.sort_by(|a, b| a.x_minus.total_cmp(&b.x_minus));
    Ok(BlockSystem::new(sorted, u.clone())?)
}

fn limit_table(t: f64, blocks: &[Block], grid: &Grid1D, u: &stifflwr_core::VelocityField1D) -> Result<String, RunError> {
    let profiles = blocks
        .iter()
        .map(|b| pressure_profile(*b, u))
        .collect::<Result<Vec<_>, _>>()?;
    let mut s = format!("# t={t:.12e} k=inf eps=0\n# x rho p\n");
    for x in grid.centers() {
        let p: f64 = profiles.iter().map(|pp| pp.eval(x)).sum();
        let _ = writeln!(s, "{x:.12e} {:.17e} {p:.17e}", limit_density(blocks, x));
    }
    Ok(s)
}

fn run_fronttrack(cfg: &Config, dir: &Path, out: &mut Outcome) -> Result<(), RunError> {
    let sc = &cfg.scenario;
    let (grid, u, _) = one_d(sc)?;
    let system = block_system(cfg)?;
    let tr = match fronttrack::evolve(&system, sc.t_end, cfg.options.front_dt) {
        Ok(tr) => tr,
        Err(e) => {
            out.failures.push(format!("solver: {e}"));
            return Ok(());
        }
    };
    write(&dir.join("fronts.txt"), &tr.to_table())?;
    write(&dir.join("events.txt"), &tr.events_table())?;
    for (i, &t) in output_times(sc.t_end, sc.output_interval).iter().enumerate() {
        let blocks = tr.state_at(t);
        write(&dir.join(format!("snapshots/snap_{i:04}.txt")), &limit_table(t, &blocks, grid, u)?)?;
    }
    out.put("samples", tr.times.len());
    out.put("merges", tr.events.len());
    for e in &tr.events {
        out.put("merge_time", e12(e.t));
    }
    if cfg.options.ambient == 0.0 {
        let length = |bs: &[Block]| bs.iter().map(Block::length).sum::<f64>();
        let l0 = length(&tr.states[0]);
        let drift = tr
            .states
            .iter()
            .map(|s| (length(s) - l0).abs())
            .fold(0.0, f64::max);
        out.put("saturated_length_drift", e12(drift));
        out.check("saturated_length", drift <= 1e-9, format!("drift {drift:.3e} > 1e-9"));
    }
    Ok(())
}

fn run_ftl(cfg: &Config, dir: &Path, out: &mut Outcome) -> Result<(), RunError> {
    let sc = &cfg.scenario;
    let (grid, u, blocks) = one_d(sc)?;
    let b = blocks[0];
    let chain = AgentChain::from_block(b.lo, b.hi, b.value, cfg.options.agents, sc.k, u.clone())?;
    let dt = cfg.options.ftl_dt.unwrap_or_else(|| chain.suggested_dt());
    let every = ((sc.output_interval / dt).round() as usize).max(1);
    let (end, tr) = match ftl::integrate(&chain, sc.t_end, dt, every) {
        Ok(r) => r,
        Err(e) => {
            out.failures.push(format!("solver: {e}"));
            return Ok(());
        }
    };
    let stride = (chain.len() / 200).max(1);
    write(&dir.join("agents.txt"), &tr.to_table(stride))?;
    let field = ftl::empirical_density(end.positions(), end.delta(), grid);
    write(&dir.join("density.txt"), &density_table(&field))?;
    let mass = diagnostics::mass(&field);
    let expected = (chain.len() - 1) as f64 * chain.delta();
    out.put("agents", chain.len());
    out.put("delta", e12(chain.delta()));
    out.put("dt", e12(dt));
    out.put("empirical_mass", e12(mass));
    out.check(
        "mass",
        (mass - expected).abs() <= 1e-3 * expected,
        format!("painted mass {mass} vs {expected}"),
    );
    Ok(())
}

fn density_table(field: &DensityField) -> String {
    let g = field.grid();
    let mut s = String::from("# x rho\n");
    for (i, r) in field.values().iter().enumerate() {
        let _ = writeln!(s, "{:.12e} {r:.17e}", g.center(i));
    }
    s
}

fn manifest_text(cfg: &Config, dir: &Path) -> String {
    let m = &cfg.manifest;
    let list = |v: Vec<String>| v.join(" ");
    format!(
        "scenario_hash = {}\nsolver = {}\nout_dir = {}\nsweep_k = {}\nsweep_eps = {}\nsweep_n = {}\n",
        m.scenario_hash,
        m.solver,
        dir.display(),
        list(m.sweep.k.iter().map(|x| x.to_string()).collect()),
        list(m.sweep.eps.iter().map(|x| x.to_string()).collect()),
        list(m.sweep.n_cells.iter().map(|x| x.to_string()).collect()),
    )
}

fn run_point(cfg: &Config, dir: &Path, parallel: bool) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    out.put("scenario_hash", &cfg.manifest.scenario_hash);
    out.put("solver", cfg.manifest.solver);
    out.put("k", cfg.scenario.k);
    out.put("eps", cfg.scenario.eps);
    write(&dir.join("config.txt"), &cfg.to_text())?;
    match cfg.manifest.solver {
        SolverKind::Fv1d => run_fv1d(&cfg.scenario, dir, &mut out)?,
        SolverKind::Fv2d => run_fv2d(&cfg.scenario, dir, &mut out, parallel)?,
        SolverKind::FrontTrack => run_fronttrack(cfg, dir, &mut out)?,
        SolverKind::Ftl => run_ftl(cfg, dir, &mut out)?,
    }
    write(&dir.join("summary.txt"), &out.to_text())?;
    Ok(out)
}

/// Run one configuration into `dir`.
pub fn run(cfg: &Config, dir: &Path) -> Result<Outcome, RunError> {
    write(&dir.join("manifest.txt"), &manifest_text(cfg, dir))?;
    run_point(cfg, dir, true)
}

/// One point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub name: String,
    pub k: f64,
    pub eps: f64,
    pub n_cells: usize,
    pub config: Config,
}

fn regrid(sc: &mut Scenario, n: usize) -> Result<(), RunError> {
    match &mut sc.setup {
        Setup::OneD { grid, .. } => *grid = Grid1D::new(grid.x_min(), grid.x_max(), n)?,
        Setup::TwoD { grid, .. } => {
            *grid = Grid2D::new(
                Grid1D::new(grid.x.x_min(), grid.x.x_max(), n)?,
                Grid1D::new(grid.y.x_min(), grid.y.x_max(), n)?,
            )
        }
    }
    Ok(())
}

fn base_cells(sc: &Scenario) -> usize {
    match &sc.setup {
        Setup::OneD { grid, .. } => grid.n_cells(),
        Setup::TwoD { grid, .. } => grid.nx(),
    }
}

/// Cartesian product of the sweep axes, k slowest. In 2D `sweep_n` sets both
/// axes.
pub fn sweep_points(cfg: &Config) -> Result<Vec<SweepPoint>, RunError> {
    let s = &cfg.manifest.sweep;
    let ks = if s.k.is_empty() { vec![cfg.scenario.k] } else { s.k.clone() };
    let es = if s.eps.is_empty() { vec![cfg.scenario.eps] } else { s.eps.clone() };
    let ns = if s.n_cells.is_empty() { vec![base_cells(&cfg.scenario)] } else { s.n_cells.clone() };
    let two_d = cfg.manifest.solver == SolverKind::Fv2d;
    let mut points = Vec::new();
    for &k in &ks {
        for &eps in &es {
            for &n in &ns {
                let mut overrides = vec![("k", k.to_string()), ("eps", eps.to_string()), ("n_cells", n.to_string())];
                if two_d {
                    overrides.push(("ny_cells", n.to_string()));
                }
                let mut c = cfg.with_overrides(&overrides);
                c.scenario.k = k;
                c.scenario.eps = eps;
                if c.options.congested_threshold {
                    c.scenario.sat_threshold = diagnostics::congested_threshold(k);
                }
                regrid(&mut c.scenario, n)?;
                points.push(SweepPoint {
                    name: format!("p{:03}_k{k}_eps{eps}_n{n}", points.len()),
                    k,
                    eps,
                    n_cells: n,
                    config: c,
                });
            }
        }
    }
    Ok(points)
}

/// Summary of a sweep; `trend.txt` holds one row per point.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub points: Vec<(SweepPoint, Result<Outcome, String>)>,
}

impl SweepReport {
    pub fn ok(&self) -> bool {
        self.points.iter().all(|(_, r)| matches!(r, Ok(o) if o.ok()))
    }
}

fn summary_value(o: &Outcome, key: &str) -> f64 {
    o.summary
        .iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(f64::NAN)
}

fn decreasing(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[1] < w[0])
}

/// Run every sweep point on a pool of `jobs` threads.
pub fn sweep(cfg: &Config, dir: &Path, jobs: usize) -> Result<SweepReport, RunError> {
    let jobs = jobs.max(1);
    let points = sweep_points(cfg)?;
    write(&dir.join("manifest.txt"), &manifest_text(cfg, dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| RunError::Setup(e.to_string()))?;
    // row parallelism only pays when some threads would otherwise idle
    let inner = points.len() < jobs;
    let results: Vec<Result<Outcome, String>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| run_point(&p.config, &dir.join(&p.name), inner).map_err(|e| e.to_string()))
            .collect()
    });

    let mut trend = String::from("# point k eps n_cells status tv complementarity frontal_trace mass_drift\n");
    let mut comp = Vec::new();
    let mut front = Vec::new();
    for (p, r) in points.iter().zip(&results) {
        let (status, o) = match r {
            Ok(o) => (if o.ok() { "ok" } else { "fail" }, Some(o)),
            Err(_) => ("error", None),
        };
        let get = |key| o.map_or(f64::NAN, |o| summary_value(o, key));
        comp.push(get("complementarity_final"));
        front.push(get("frontal_trace_final"));
        let _ = writeln!(
            trend,
            "{} {} {} {} {status} {} {} {} {}",
            p.name,
            p.k,
            p.eps,
            p.n_cells,
            e12(get("tv_final")),
            e12(get("complementarity_final")),
            e12(get("frontal_trace_final")),
            e12(get("mass_drift")),
        );
    }
    write(&dir.join("trend.txt"), &trend)?;
    let s = &cfg.manifest.sweep;
    if s.k.len() > 1 && s.eps.len() <= 1 && s.n_cells.len() <= 1 {
        let mut sorted: Vec<usize> = (0..points.len()).collect();
        sorted.sort_by(|&a, &b| points[a].k.total_cmp(&points[b].k));
        let pick = |v: &[f64]| sorted.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let text = format!(
            "complementarity_decreasing_in_k = {}\nfrontal_trace_decreasing_in_k = {}\n",
            decreasing(&pick(&comp)),
            decreasing(&pick(&front))
        );
        write(&dir.join("trend_summary.txt"), &text)?;
    }
    Ok(SweepReport {
        points: points.into_iter().zip(results).collect(),
    })
}

/// Front tracking against a stiff finite-volume run on the same data.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub k: f64,
    /// Largest |front_fv - front_ft| over ticks where both have the same
    /// number of blocks.
    pub front_max_error: f64,
    pub merge_time_fronttrack: Option<f64>,
    /// First output tick at which the finite-volume block count dropped.
    pub merge_time_fv: Option<f64>,
}

impl CompareReport {
    pub fn merge_discrepancy(&self) -> Option<f64> {
        Some((self.merge_time_fronttrack? - self.merge_time_fv?).abs())
    }

    pub fn to_text(&self) -> String {
        format!(
            "k = {}\nfront_max_error = {}\nmerge_time_fronttrack = {}\nmerge_time_fv = {}\nmerge_time_discrepancy = {}\n",
            self.k,
            e12(self.front_max_error),
            opt(self.merge_time_fronttrack),
            opt(self.merge_time_fv),
            opt(self.merge_discrepancy()),
        )
    }
}

pub fn compare(cfg: &Config, dir: &Path) -> Result<CompareReport, RunError> {
    let system = block_system(cfg)?;
    let sc = cfg.scenario.clone().with_k(cfg.options.compare_k);
    let ft = fronttrack::evolve(&system, sc.t_end, cfg.options.front_dt)?;
    let fv = solver1d::run(&sc)?;
    write(&dir.join("manifest.txt"), &manifest_text(cfg, dir))?;
    write(&dir.join("fronttrack/fronts.txt"), &ft.to_table())?;
    write(&dir.join("fronttrack/events.txt"), &ft.events_table())?;
    write(&dir.join("fv/diagnostics.txt"), &fv.series.to_table())?;

    let mut table = String::from("# t blocks_fv blocks_ft front_error\n");
    let mut err: f64 = 0.0;
    let mut merge_fv = None;
    let n0 = level_components(&fv.snapshots[0].field, 0.5).len();
    for (i, s) in fv.snapshots.iter().enumerate() {
        write(&dir.join(format!("fv/snapshots/snap_{i:04}.txt")), &snapshot_1d_table(s))?;
        let comps = level_components(&s.field, 0.5);
        let blocks = ft.state_at(s.t);
        let e = if comps.len() == blocks.len() {
            comps
                .iter()
                .zip(&blocks)
                .map(|(c, b)| (c.1 - b.x_plus).abs())
                .fold(0.0, f64::max)
        } else {
            f64::NAN
        };
        if e.is_finite() {
            err = err.max(e);
        }
        if merge_fv.is_none() && comps.len() < n0 {
            merge_fv = Some(s.t);
        }
        let _ = writeln!(table, "{} {} {} {}", e12(s.t), comps.len(), blocks.len(), e12(e));
    }
    write(&dir.join("fronts_compared.txt"), &table)?;
    let report = CompareReport {
        k: sc.k,
        front_max_error: err,
        merge_time_fronttrack: ft.events.first().map(|e| e.t),
        merge_time_fv: merge_fv,
    };
    write(&dir.join("report.txt"), &report.to_text())?;
    Ok(report)
}
