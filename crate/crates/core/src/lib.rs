//! Simulation and control synthesis for 1D quasilinear parabolic equations
//! under multiplicative (bilinear) controls with mobile support.
//!
//! The crate is organized around five concerns:
//!
//! - [`grid`], [`state`], [`law`]: uniform meshes on subintervals of (0,1),
//!   discrete states/trajectories, and diffusion coefficients (quasilinear
//!   `a(y)` or frozen `b(x,t)` with certified sampled bounds);
//! - [`solver`]: backward-Euler method-of-lines integration with conservative
//!   midpoint fluxes, damped Newton, and closed-form sine-expansion oracles;
//! - [`control`]: moving control windows, stage schedules, and their
//!   evaluation on grids, plus a JSON document format;
//! - [`synthesis`]: constructive steering — the damping sweep over a moving
//!   window, nonnegative additive steering via NNLS, the additive-to-
//!   multiplicative lift, the two-phase pipeline, and the quasilinear
//!   Picard loop;
//! - [`certificates`]: numerical verification of the sign, comparison,
//!   decay, energy, and boundary-gradient estimates on computed
//!   trajectories, with measured margins and pass/fail verdicts.
//!
//! Everything is deterministic: no operation draws randomness, and repeated
//! runs with identical inputs produce bit-identical numbers.

pub mod certificates;
pub mod control;
pub mod error;
pub mod expr;
pub mod field;
pub mod grid;
pub mod law;
pub mod solver;
pub mod state;
pub mod synthesis;

pub use error::{Error, Result};
pub use grid::SpatialGrid;
pub use law::{DiffusionLaw, FrozenLaw, QuasilinearLaw};
pub use state::{State, Trajectory};
