//! Discrete states and time-stamped trajectories.

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::law::DiffusionLaw;

/// State `y` at the interior nodes of a grid, at a given time. Boundary
/// values are implicitly zero unless the producing solve says otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub values: Vec<f64>,
    pub time: f64,
}

impl State {
    pub fn new(values: Vec<f64>, time: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) || !time.is_finite() {
            return Err(Error::invalid("state entries must be finite"));
        }
        Ok(State { values, time })
    }

    pub fn zeros(n: usize, time: f64) -> Self {
        State { values: vec![0.0; n], time }
    }

    /// Sample `f(x_i)` over the grid's interior nodes.
    pub fn from_fn(grid: &SpatialGrid, time: f64, f: impl Fn(f64) -> f64) -> Self {
        State {
            values: (0..grid.n).map(|i| f(grid.x(i))).collect(),
            time,
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= -tol)
    }

    /// Piecewise-linear evaluation at physical position `x`, with the
    /// boundary values pinned to `bc`.
    pub fn sample_at(&self, grid: &SpatialGrid, x: f64, bc: (f64, f64)) -> f64 {
        let (lo, hi) = grid.span();
        if x <= lo {
            return bc.0;
        }
        if x >= hi {
            return bc.1;
        }
        // cell index: x between node (i-1) and node i, with virtual
        // boundary nodes at lo and hi.
        let s = (x - lo) / grid.h;
        let k = s.floor() as usize; // 0..=n
        let w = s - k as f64;
        let left = if k == 0 { bc.0 } else { self.values[k - 1] };
        let right = if k >= grid.n { bc.1 } else { self.values[k] };
        left + w * (right - left)
    }
}

/// Per-solve bookkeeping recorded while stepping. `min_value` and
/// `max_abs` scan every computed step, including ones not stored when the
/// trajectory is decimated.
#[derive(Debug, Clone, Default)]
pub struct SolveMeta {
    pub steps_total: usize,
    pub stored_stride: usize,
    pub min_value: f64,
    pub max_abs: f64,
    pub newton_iters_max: usize,
    /// Solver step size per stage (after any stiffness-driven refinement),
    /// as (stage_start, stage_end, dt).
    pub stage_dts: Vec<(f64, f64, f64)>,
}

/// Time-stamped sequence of states with solve metadata.
///
/// States are strictly increasing in time and uniformly spaced by the
/// recorded stage step within each stage (long solves may be stored with
/// a uniform stride; stage-boundary states are always kept).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub dt: f64,
    pub grid: SpatialGrid,
    pub law: DiffusionLaw,
    pub schedule_id: String,
    pub meta: SolveMeta,
}

impl Trajectory {
    pub fn initial_state(&self) -> &State {
        &self.states[0]
    }

    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn start_time(&self) -> f64 {
        self.states[0].time
    }

    pub fn end_time(&self) -> f64 {
        self.final_state().time
    }

    /// Bilinear sample of the space-time field: linear in `t` between
    /// stored states, linear in `x` between nodes, zero Dirichlet walls.
    pub fn sample(&self, x: f64, t: f64) -> f64 {
        let states = &self.states;
        if t <= states[0].time {
            return states[0].sample_at(&self.grid, x, (0.0, 0.0));
        }
        let last = states.len() - 1;
        if t >= states[last].time {
            return states[last].sample_at(&self.grid, x, (0.0, 0.0));
        }
        let k = states.partition_point(|s| s.time < t);
        let (s0, s1) = (&states[k - 1], &states[k]);
        let w = (t - s0.time) / (s1.time - s0.time);
        let v0 = s0.sample_at(&self.grid, x, (0.0, 0.0));
        let v1 = s1.sample_at(&self.grid, x, (0.0, 0.0));
        v0 + w * (v1 - v0)
    }

    /// Largest |y| over the stored states.
    pub fn sup_abs(&self) -> f64 {
        self.meta.max_abs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn rejects_non_finite() {
        assert!(State::new(vec![1.0, f64::NAN], 0.0).is_err());
        assert!(State::new(vec![1.0], f64::INFINITY).is_err());
    }

    #[test]
    fn sampling_interpolates_with_zero_walls() {
        let g = build_grid(3).unwrap();
        let s = State::new(vec![1.0, 2.0, 1.0], 0.0).unwrap();
        assert_eq!(s.sample_at(&g, 0.5, (0.0, 0.0)), 2.0);
        assert!((s.sample_at(&g, 0.375, (0.0, 0.0)) - 1.5).abs() < 1e-15);
        assert!((s.sample_at(&g, 0.125, (0.0, 0.0)) - 0.5).abs() < 1e-15);
        assert_eq!(s.sample_at(&g, 0.0, (0.0, 0.0)), 0.0);
        assert_eq!(s.sample_at(&g, 1.0, (0.0, 0.0)), 0.0);
    }
}
