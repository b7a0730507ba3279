//! Flat `key = value` scenario files.
//!
//! ```text
//! # two blocks under a decreasing field
//! solver = fv1d
//! x_min = -2
//! x_max = 3
//! n_cells = 1000
//! velocity = affine 2 -1
//! block = -1 -0.5 1
//! block = 0.5 1 1
//! k = 256
//! t_end = 1.5
//! ```
//!
//! `block` may repeat; every other key appears at most once.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use stifflwr_core::diagnostics::congested_threshold;
use stifflwr_core::{
    DiffusionMode, Grid1D, Grid2D, Interval, Rect, Scenario, VelocityField1D, VelocityField2D,
};
use thiserror::Error;

/// Largest sweep product accepted unless `sweep_cap` says otherwise.
pub const DEFAULT_SWEEP_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid value for `{key}`: {msg}")]
    Validation { key: String, msg: String },
}

impl ConfigError {
    /// The offending key of a validation error.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { key, .. } => Some(key),
            ConfigError::Parse { .. } => None,
        }
    }
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Fv1d,
    Fv2d,
    FrontTrack,
    Ftl,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Fv1d => "fv1d",
            SolverKind::Fv2d => "fv2d",
            SolverKind::FrontTrack => "fronttrack",
            SolverKind::Ftl => "ftl",
        }
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fv1d" => Ok(SolverKind::Fv1d),
            "fv2d" => Ok(SolverKind::Fv2d),
            "fronttrack" => Ok(SolverKind::FrontTrack),
            "ftl" => Ok(SolverKind::Ftl),
            other => Err(format!("unknown solver `{other}`")),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Lists of values to sweep; an empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepAxes {
    pub k: Vec<f64>,
    pub eps: Vec<f64>,
    pub n_cells: Vec<usize>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.k.is_empty() && self.eps.is_empty() && self.n_cells.is_empty()
    }

    pub fn product_len(&self) -> usize {
        self.k.len().max(1) * self.eps.len().max(1) * self.n_cells.len().max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    /// SHA-256 of the canonical key-value listing, hex encoded.
    pub scenario_hash: String,
    pub solver: SolverKind,
    pub out_dir: Option<std::path::PathBuf>,
    pub sweep: SweepAxes,
    pub sweep_cap: usize,
    pub jobs: usize,
}

/// Options that only some solvers read.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Ambient density behind every block (front tracking).
    pub ambient: f64,
    /// RK4 step bound for front tracking.
    pub front_dt: f64,
    pub agents: usize,
    /// Fixed FTL step; the chain's suggested step when absent.
    pub ftl_dt: Option<f64>,
    /// Stiffness of the finite-volume side of `compare`.
    pub compare_k: f64,
    /// `sat_threshold = congested`: use the per-k congested threshold.
    pub congested_threshold: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            ambient: 0.0,
            front_dt: 1e-3,
            agents: 1000,
            ftl_dt: None,
            compare_k: 256.0,
            congested_threshold: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub scenario: Scenario,
    pub manifest: RunManifest,
    pub options: SolverOptions,
    /// Canonical `key = value` lines, in file order.
    pub canonical: Vec<(String, String)>,
}

const KEYS: &[&str] = &[
    "solver",
    "x_min",
    "x_max",
    "n_cells",
    "y_min",
    "y_max",
    "ny_cells",
    "velocity",
    "block",
    "k",
    "eps",
    "cfl",
    "dt_max",
    "diffusion",
    "t_end",
    "output_interval",
    "sat_threshold",
    "ambient",
    "front_dt",
    "agents",
    "ftl_dt",
    "compare_k",
    "sweep_k",
    "sweep_eps",
    "sweep_n",
    "sweep_cap",
    "jobs",
];

/// Keys that change results; `jobs` does not.
fn hashed(key: &str) -> bool {
    key != "jobs"
}

struct Entries {
    single: HashMap<String, (usize, String)>,
    blocks: Vec<(usize, String)>,
    canonical: Vec<(String, String)>,
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut e = Entries {
        single: HashMap::new(),
        blocks: Vec::new(),
        canonical: Vec::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                msg: format!("expected `key = value`, found `{body}`"),
            });
        };
        let key = key.trim();
        let value = value.split_whitespace().collect::<Vec<_>>().join(" ");
        if !KEYS.contains(&key) {
            return Err(ConfigError::Parse {
                line,
                msg: format!("unknown key `{key}`"),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                msg: format!("`{key}` has no value"),
            });
        }
        e.canonical.push((key.to_string(), value.clone()));
        if key == "block" {
            e.blocks.push((line, value));
        } else if let Some((first, _)) = e.single.insert(key.to_string(), (line, value)) {
            return Err(ConfigError::Parse {
                line,
                msg: format!("`{key}` already set on line {first}"),
            });
        }
    }
    Ok(e)
}

fn numbers(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split_whitespace()
        .map(|w| {
            w.parse::<f64>().map_err(|_| ConfigError::Parse {
                line,
                msg: format!("`{key}`: `{w}` is not a number"),
            })
        })
        .collect()
}

impl Entries {
    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.single.get(key) {
            None => Ok(None),
            Some((line, v)) => {
                let xs = numbers(*line, key, v)?;
                if xs.len() != 1 {
                    return Err(ConfigError::Parse {
                        line: *line,
                        msg: format!("`{key}` takes one number"),
                    });
                }
                Ok(Some(xs[0]))
            }
        }
    }

    fn required(&self, key: &str) -> Result<f64, ConfigError> {
        self.number(key)?.ok_or_else(|| invalid(key, "missing"))
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.number(key)? {
            None => Ok(None),
            Some(x) if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 => Ok(Some(x as usize)),
            Some(x) => Err(invalid(key, format!("{x} is not a count"))),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self.single.get(key) {
            None => Ok(Vec::new()),
            Some((line, v)) => numbers(*line, key, v),
        }
    }

    fn word(&self, key: &str) -> Option<(usize, &str)> {
        self.single.get(key).map(|(l, v)| (*l, v.as_str()))
    }
}

fn grid_axis(e: &Entries, lo: &str, hi: &str, n: &str) -> Result<Grid1D, ConfigError> {
    let a = e.required(lo)?;
    let b = e.required(hi)?;
    let cells = e.count(n)?.ok_or_else(|| invalid(n, "missing"))?;
    if !(b > a) {
        return Err(invalid(hi, format!("{hi} = {b} must exceed {lo} = {a}")));
    }
    Grid1D::new(a, b, cells).map_err(|err| invalid(n, err.to_string()))
}

fn velocity_1d(e: &Entries, grid: &Grid1D) -> Result<VelocityField1D, ConfigError> {
    let (line, v) = e.word("velocity").ok_or_else(|| invalid("velocity", "missing"))?;
    let (family, rest) = v.split_once(' ').unwrap_or((v, ""));
    let p = numbers(line, "velocity", rest)?;
    let (lo, hi) = (grid.x_min(), grid.x_max());
    let field = match (family, p.as_slice()) {
        ("constant", [c]) => VelocityField1D::constant(*c, lo, hi),
        ("affine", [a, b]) => VelocityField1D::affine(*a, *b, lo, hi),
        _ => {
            return Err(invalid(
                "velocity",
                format!("expected `constant c` or `affine a b` in 1D, found `{v}`"),
            ))
        }
    };
    field.map_err(|err| invalid("velocity", err.to_string()))
}

fn velocity_2d(e: &Entries, grid: &Grid2D) -> Result<VelocityField2D, ConfigError> {
    let (line, v) = e.word("velocity").ok_or_else(|| invalid("velocity", "missing"))?;
    let (family, rest) = v.split_once(' ').unwrap_or((v, ""));
    let p = numbers(line, "velocity", rest)?;
    let bbox = [grid.x.x_min(), grid.x.x_max(), grid.y.x_min(), grid.y.x_max()];
    let field = match (family, p.as_slice()) {
        ("constant", [ux, uy]) => VelocityField2D::constant([*ux, *uy], bbox),
        ("radial", [cx, cy, lambda]) => VelocityField2D::radial([*cx, *cy], *lambda, bbox),
        _ => {
            return Err(invalid(
                "velocity",
                format!("expected `constant ux uy` or `radial cx cy lambda` in 2D, found `{v}`"),
            ))
        }
    };
    field.map_err(|err| invalid("velocity", err.to_string()))
}

fn hash_of(canonical: &[(String, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in canonical.iter().filter(|(k, _)| hashed(k)) {
        h.update(k.as_bytes());
        h.update(b" = ");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse and validate a scenario file. Defaults: `cfl = 0.45`,
/// `sat_threshold = 0.99`, `eps = 0`, `output_interval = t_end / 10`.
/// `sat_threshold = congested` picks the midpoint between the sonic density
/// and 1 for the run's k.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let e = tokenize(text)?;
    let solver = match e.word("solver") {
        None => SolverKind::Fv1d,
        Some((line, v)) => v
            .parse()
            .map_err(|msg| ConfigError::Parse { line, msg })?,
    };

    let gx = grid_axis(&e, "x_min", "x_max", "n_cells")?;
    let two_d = solver == SolverKind::Fv2d;
    for key in ["y_min", "y_max", "ny_cells"] {
        if !two_d && e.single.contains_key(key) {
            return Err(invalid(key, "only meaningful for solver = fv2d"));
        }
    }

    let mut scenario = if two_d {
        let grid = Grid2D::new(gx, grid_axis(&e, "y_min", "y_max", "ny_cells")?);
        let u = velocity_2d(&e, &grid)?;
        let mut blocks = Vec::new();
        for (line, v) in &e.blocks {
            match numbers(*line, "block", v)?.as_slice() {
                [a, b, c, d, val] => blocks.push(Rect::new(*a, *b, *c, *d, *val)),
                _ => {
                    return Err(ConfigError::Parse {
                        line: *line,
                        msg: "a 2D block is `x_lo x_hi y_lo y_hi value`".into(),
                    })
                }
            }
        }
        Scenario::two_d(grid, u, blocks)
    } else {
        let u = velocity_1d(&e, &gx)?;
        let mut blocks = Vec::new();
        for (line, v) in &e.blocks {
            match numbers(*line, "block", v)?.as_slice() {
                [lo, hi, val] => blocks.push(Interval::new(*lo, *hi, *val)),
                _ => {
                    return Err(ConfigError::Parse {
                        line: *line,
                        msg: "a block is `lo hi value`".into(),
                    })
                }
            }
        }
        Scenario::one_d(gx, u, blocks)
    };

    let k = e.required("k")?;
    if !(k.is_finite() && k >= 1.0) {
        return Err(invalid("k", format!("{k} is not a finite number >= 1")));
    }
    scenario.k = k;
    if let Some(eps) = e.number("eps")? {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(invalid("eps", format!("{eps} is not a finite number >= 0")));
        }
        scenario.eps = eps;
    }
    let t_end = e.required("t_end")?;
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(invalid("t_end", format!("{t_end} is not a positive number")));
    }
    scenario.t_end = t_end;
    scenario.output_interval = t_end / 10.0;
    if let Some(dt) = e.number("output_interval")? {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("output_interval", format!("{dt} is not positive")));
        }
        scenario.output_interval = dt;
    }
    scenario.control.cfl = 0.45;
    if let Some(cfl) = e.number("cfl")? {
        if !(cfl > 0.0 && cfl < 1.0) {
            return Err(invalid("cfl", format!("{cfl} is outside (0, 1)")));
        }
        scenario.control.cfl = cfl;
    }
    if let Some(dt) = e.number("dt_max")? {
        if !(dt > 0.0) {
            return Err(invalid("dt_max", format!("{dt} is not positive")));
        }
        scenario.control.dt_max = dt;
    }
    if let Some((_, mode)) = e.word("diffusion") {
        scenario.control.diffusion = match mode {
            "explicit" => DiffusionMode::Explicit,
            "splitting" => DiffusionMode::SplittingImplicit,
            other => return Err(invalid("diffusion", format!("`{other}` is not explicit|splitting"))),
        };
    }
    scenario.sat_threshold = 0.99;
    let congested = e.word("sat_threshold").is_some_and(|(_, w)| w == "congested");
    if congested {
        scenario.sat_threshold = congested_threshold(k);
    } else if let Some(s) = e.number("sat_threshold")? {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid("sat_threshold", format!("{s} is outside (0, 1)")));
        }
        scenario.sat_threshold = s;
    }

    if e.blocks.is_empty() {
        return Err(invalid("block", "at least one block is required"));
    }
    scenario
        .validate()
        .map_err(|err| invalid("block", err.to_string()))?;
    if !(scenario.initial_mass() > 0.0) {
        return Err(invalid("block", "total initial mass must be positive"));
    }

    let mut options = SolverOptions {
        congested_threshold: congested,
        ..SolverOptions::default()
    };
    if let Some(a) = e.number("ambient")? {
        if !(0.0..1.0).contains(&a) {
            return Err(invalid("ambient", format!("{a} is outside [0, 1)")));
        }
        options.ambient = a;
    }
    if let Some(dt) = e.number("front_dt")? {
        if !(dt > 0.0) {
            return Err(invalid("front_dt", format!("{dt} is not positive")));
        }
        options.front_dt = dt;
    }
    if let Some(n) = e.count("agents")? {
        if n < 2 {
            return Err(invalid("agents", "at least two agents are required"));
        }
        options.agents = n;
    }
    if let Some(dt) = e.number("ftl_dt")? {
        if !(dt > 0.0) {
            return Err(invalid("ftl_dt", format!("{dt} is not positive")));
        }
        options.ftl_dt = Some(dt);
    }
    if let Some(ck) = e.number("compare_k")? {
        if !(ck.is_finite() && ck >= 1.0) {
            return Err(invalid("compare_k", format!("{ck} is not a finite number >= 1")));
        }
        options.compare_k = ck;
    }
    if matches!(solver, SolverKind::FrontTrack | SolverKind::Ftl) {
        if let stifflwr_core::Setup::OneD { blocks, .. } = &scenario.setup {
            if solver == SolverKind::FrontTrack && blocks.iter().any(|b| b.value != 1.0) {
                return Err(invalid("block", "front tracking needs saturated blocks (value 1)"));
            }
            if solver == SolverKind::Ftl && blocks.len() != 1 {
                return Err(invalid("block", "the agent model starts from a single block"));
            }
        }
    }

    let sweep = SweepAxes {
        k: e.list("sweep_k")?,
        eps: e.list("sweep_eps")?,
        n_cells: e
            .list("sweep_n")?
            .into_iter()
            .map(|x| {
                if x >= 4.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(invalid("sweep_n", format!("{x} is not a cell count")))
                }
            })
            .collect::<Result<_, _>>()?,
    };
    if sweep.k.iter().any(|&k| !(k.is_finite() && k >= 1.0)) {
        return Err(invalid("sweep_k", "every k must be finite and >= 1"));
    }
    if sweep.eps.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(invalid("sweep_eps", "every eps must be finite and >= 0"));
    }
    let sweep_cap = e.count("sweep_cap")?.unwrap_or(DEFAULT_SWEEP_CAP);
    if sweep.product_len() > sweep_cap {
        return Err(invalid(
            "sweep_cap",
            format!("{} sweep points exceed the cap of {sweep_cap}", sweep.product_len()),
        ));
    }
    let jobs = e.count("jobs")?.unwrap_or(1).max(1);

    Ok(Config {
        manifest: RunManifest {
            scenario_hash: hash_of(&e.canonical),
            solver,
            out_dir: None,
            sweep,
            sweep_cap,
            jobs,
        },
        scenario,
        options,
        canonical: e.canonical,
    })
}

impl Config {
    /// Canonical listing with the given keys replaced, for one sweep point.
    pub fn with_overrides(&self, overrides: &[(&str, String)]) -> Config {
        let mut out = self.clone();
        let mut canonical: Vec<(String, String)> = self
            .canonical
            .iter()
            .filter(|(k, _)| !k.starts_with("sweep_") && !overrides.iter().any(|(o, _)| o == k))
            .cloned()
            .collect();
        for (k, v) in overrides {
            canonical.push((k.to_string(), v.clone()));
        }
        out.manifest.scenario_hash = hash_of(&canonical);
        out.manifest.sweep = SweepAxes::default();
        out.canonical = canonical;
        out
    }

    /// Text form that [`parse_config`] reads back to the same scenario.
    pub fn to_text(&self) -> String {
        self.canonical
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
        # moving block
        x_min = -1
        x_max = 3
        n_cells = 400
        velocity = affine 2 -1
        block = 0 0.5 1
        k = 8
        t_end = 1
    ";

    #[test]
    fn minimal_config_applies_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.scenario.k, 8.0);
        assert_eq!(c.scenario.eps, 0.0);
        assert_eq!(c.scenario.control.cfl, 0.45);
        assert_eq!(c.scenario.sat_threshold, 0.99);
        assert_eq!(c.manifest.solver, SolverKind::Fv1d);
        assert!(c.manifest.sweep.is_empty());
        assert_eq!(c.manifest.scenario_hash.len(), 64);
    }

    #[test]
    fn negative_k_names_the_key() {
        let text = MINIMAL.replace("k = 8", "k = -1");
        assert_eq!(parse_config(&text).unwrap_err().key(), Some("k"));
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = format!("{MINIMAL}\nspeed = 3\n");
        match parse_config(&text) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_ignores_comments_spacing_and_jobs() {
        let a = parse_config(MINIMAL).unwrap();
        let text = MINIMAL.replace("k = 8", "k   =   8  # stiff").replace("t_end = 1", "t_end = 1\njobs = 4");
        let b = parse_config(&text).unwrap();
        assert_eq!(a.manifest.scenario_hash, b.manifest.scenario_hash);
        assert_eq!(b.manifest.jobs, 4);
        let c = parse_config(&MINIMAL.replace("k = 8", "k = 9")).unwrap();
        assert_ne!(a.manifest.scenario_hash, c.manifest.scenario_hash);
    }
}
