//! Finite-volume, front-tracking and follow-the-leader solvers for the
//! congestion law d_t rho + div(F_k(rho) U) = eps lap rho with
//! F_k(rho) = rho (1 - rho^k), and diagnostics for its stiff limit k -> inf.

pub mod diagnostics;
pub mod error;
pub mod flux;
pub mod fronttrack;
pub mod ftl;
pub mod grid;
pub mod io;
pub mod quadrature;
pub mod scenario;
pub mod solver1d;
pub mod solver2d;
pub mod velocity;

pub use error::{Error, Result};
pub use flux::{Flux, RiemannFan, WaveKind};
pub use fronttrack::{Block, BlockSystem, FrontTrajectory, MergeEvent};
pub use ftl::{AgentChain, FtlTrajectory};
pub use grid::{DensityField, DensityField2D, Grid1D, Grid2D};
pub use scenario::{Interval, Rect, Scenario, Setup};
pub use solver1d::{DiffusionMode, Snapshot1D, Solver1D, StepControl, Trajectory1D};
pub use solver2d::{Snapshot2D, Solver2D, Trajectory2D};
pub use velocity::{VelocityBounds, VelocityField1D, VelocityField2D};
