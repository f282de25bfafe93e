//! Quasilinear fixed point by frozen-coefficient iteration.
//!
//! Iterate: freeze `b(x,t) = a(z⁽ᵏ⁾(x,t))` along the current iterate, run
//! the linear pipeline for that frozen law, then resolve the controlled
//! quasilinear equation with the obtained schedule to get `z⁽ᵏ⁺¹⁾`. Stop
//! when successive iterates are `fix_tol`-close in `L²(Q_T)`. Iterates are
//! carried as space-time sample lattices; their sup-norms must stay inside
//! the ball of radius `R` (leaving the ball aborts the iteration), and the
//! sup-norm of each synthesized control is recorded as the bounded-cost
//! diagnostic.

use super::pipeline::{synthesize_pipeline, PipelineReport};
use super::SynthesisConfig;
use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::grid::{sup_norm, SpatialGrid};
use crate::law::{DiffusionLaw, FrozenLaw, QuasilinearLaw};
use crate::solver::{solve_forward, SolverConfig};
use crate::state::{State, Trajectory};
use std::sync::Arc;

/// Fixed-point iteration parameters.
#[derive(Debug, Clone)]
pub struct PicardConfig {
    /// Sup-norm ball radius the iterates must stay inside.
    pub radius: f64,
    /// Small-data scale applied to the base initial datum.
    pub gamma: f64,
    pub max_iters: usize,
    /// `L²(Q_T)` distance between successive iterates declaring convergence.
    pub fix_tol: f64,
    /// Time samples of the iterate lattice.
    pub time_samples: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            radius: 10.0,
            gamma: 1.0,
            max_iters: 10,
            fix_tol: 1e-4,
            time_samples: 128,
        }
    }
}

/// Converged fixed point: the final controlled quasilinear run.
#[derive(Debug)]
pub struct PicardOutcome {
    pub schedule: ControlSchedule,
    pub trajectory: Trajectory,
    pub pipeline_report: PipelineReport,
    /// `‖z⁽ᵏ⁺¹⁾ - z⁽ᵏ⁾‖_{L²(Q_T)}` per iteration.
    pub iterate_distances: Vec<f64>,
    /// Sup-norm of the synthesized control per iteration.
    pub u_sup_history: Vec<f64>,
    pub iterations: usize,
}

/// Space-time sample lattice of an iterate.
#[derive(Clone)]
struct Lattice {
    times: Vec<f64>,
    grid: SpatialGrid,
    /// `values[k][i]` at `(x_i, times[k])`.
    values: Vec<Vec<f64>>,
}

impl Lattice {
    fn from_trajectory(traj: &Trajectory, times: &[f64]) -> Self {
        let grid = traj.grid.clone();
        let values = times
            .iter()
            .map(|&t| (0..grid.n).map(|i| traj.sample(grid.x(i), t)).collect())
            .collect();
        Lattice { times: times.to_vec(), grid, values }
    }

    fn sup(&self) -> f64 {
        self.values.iter().map(|row| sup_norm(row)).fold(0.0, f64::max)
    }

    /// Trapezoid-in-time, nodal-in-space `L²(Q_T)` distance.
    fn distance(&self, other: &Lattice) -> f64 {
        let nt = self.times.len();
        let mut acc = 0.0;
        for k in 0..nt {
            let w = if k == 0 || k == nt - 1 { 0.5 } else { 1.0 };
            let mut slice = 0.0;
            for (a, b) in self.values[k].iter().zip(&other.values[k]) {
                let d = a - b;
                slice += d * d;
            }
            acc += w * slice;
        }
        let dt = (self.times[nt - 1] - self.times[0]) / (nt - 1) as f64;
        (acc * dt * self.grid.h).sqrt()
    }

    fn blend(&self, newer: &Lattice, theta: f64) -> Lattice {
        let values = self
            .values
            .iter()
            .zip(&newer.values)
            .map(|(old, new)| {
                old.iter()
                    .zip(new)
                    .map(|(o, n)| (1.0 - theta) * o + theta * n)
                    .collect()
            })
            .collect();
        Lattice { times: self.times.clone(), grid: self.grid.clone(), values }
    }

    /// Bilinear sample with zero Dirichlet walls.
    fn sample(&self, x: f64, t: f64) -> f64 {
        let nt = self.times.len();
        let k = if t <= self.times[0] {
            0
        } else if t >= self.times[nt - 1] {
            nt - 1
        } else {
            self.times.partition_point(|&s| s < t)
        };
        let row_val = |row: &[f64], x: f64| -> f64 {
            let (lo, hi) = self.grid.span();
            if x <= lo || x >= hi {
                return 0.0;
            }
            let s = (x - lo) / self.grid.h;
            let c = (s.floor() as usize).min(self.grid.n);
            let w = s - c as f64;
            let left = if c == 0 { 0.0 } else { row[c - 1] };
            let right = if c >= self.grid.n { 0.0 } else { row[c] };
            left + w * (right - left)
        };
        if k == 0 || k == nt - 1 {
            let edge = if k == 0 { 0 } else { nt - 1 };
            return row_val(&self.values[edge], x);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        let v0 = row_val(&self.values[k - 1], x);
        let v1 = row_val(&self.values[k], x);
        v0 + w * (v1 - v0)
    }
}

/// Local approximate steering of the quasilinear problem: Picard iteration
/// over frozen-coefficient pipelines. The initial datum is `gamma·y0_base`.
#[allow(clippy::too_many_arguments)]
pub fn picard_quasilinear(
    grid: &SpatialGrid,
    y0_base: &State,
    y_d: &State,
    eps: f64,
    t_final: f64,
    l: f64,
    law: &QuasilinearLaw,
    pcfg: &PicardConfig,
    scfg: &SynthesisConfig,
    cfg: &SolverConfig,
) -> Result<PicardOutcome> {
    if !(pcfg.gamma > 0.0 && pcfg.fix_tol > 0.0 && pcfg.max_iters >= 1) {
        return Err(Error::invalid("bad picard configuration"));
    }
    let y0 = State::new(
        y0_base.values.iter().map(|v| pcfg.gamma * v).collect(),
        y0_base.time,
    )?;
    let t0 = y0.time;
    let t_end = t0 + t_final;
    let times: Vec<f64> = (0..=pcfg.time_samples)
        .map(|k| t0 + t_final * k as f64 / pcfg.time_samples as f64)
        .collect();
    let qlaw = DiffusionLaw::Quasilinear(law.clone());

    let ball_check = |lattice: &Lattice| -> Result<()> {
        let sup = lattice.sup();
        if sup > pcfg.radius {
            return Err(Error::BallViolation { sup, radius: pcfg.radius });
        }
        Ok(())
    };

    // z⁰: free quasilinear flow
    let idle = ControlSchedule::idle((t0, t_end))?;
    let free = solve_forward(grid, &y0, (t0, t_end), &qlaw, &idle, cfg)?;
    let mut z = Lattice::from_trajectory(&free, &times);
    ball_check(&z)?;

    let mut history: Vec<f64> = Vec::new();
    let mut u_sup_history: Vec<f64> = Vec::new();
    let mut theta = 1.0_f64;
    let mut last_dist = f64::INFINITY;

    for iter in 1..=pcfg.max_iters {
        // freeze b = a(z) along the lattice
        let lattice = Arc::new(z.clone());
        let a_fn = law.clone();
        let frozen = FrozenLaw::new(
            move |x, t| a_fn.coeff(lattice.sample(x, t)),
            (t0, t_end),
            4 * (grid.n + 1),
            128,
        )?;

        let pipeline = synthesize_pipeline(grid, &y0, y_d, eps, t_final, l, &frozen, scfg, cfg)?;
        u_sup_history.push(pipeline.schedule.u_sup()?);

        // resolve the true quasilinear dynamics under the synthesized control
        let traj = solve_forward(grid, &y0, (t0, t_end), &qlaw, &pipeline.schedule, cfg)?;
        let z_new = Lattice::from_trajectory(&traj, &times);
        ball_check(&z_new)?;

        let dist = z_new.distance(&z);
        history.push(dist);
        if dist <= pcfg.fix_tol {
            let terminal = {
                let diff: Vec<f64> = traj
                    .final_state()
                    .values
                    .iter()
                    .zip(&y_d.values)
                    .map(|(a, b)| a - b)
                    .collect();
                grid.l2_norm(&diff)
            };
            if terminal >= eps {
                return Err(Error::PipelineDefect { achieved: terminal, epsilon: eps });
            }
            return Ok(PicardOutcome {
                schedule: pipeline.schedule,
                trajectory: traj,
                pipeline_report: pipeline.report,
                iterate_distances: history,
                u_sup_history,
                iterations: iter,
            });
        }
        // damping: halve θ when the iterate distance grows
        if dist > last_dist {
            theta *= 0.5;
        }
        z = z.blend(&z_new, theta);
        last_dist = dist;
    }
    let last = history.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::PicardNonconvergence {
        max_iters: pcfg.max_iters,
        last,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    fn arctan_law() -> QuasilinearLaw {
        QuasilinearLaw::new(|y| 1.0 + 0.1 * y.atan(), (-150.0, 150.0)).unwrap()
    }

    #[test]
    fn near_constant_coefficient_converges_immediately() {
        // a ≡ 2: the frozen law is exact, one iteration reproduces the
        // linear pipeline
        let grid = build_grid(80).unwrap();
        let law = QuasilinearLaw::new(|_| 2.0, (-10.0, 10.0)).unwrap();
        let pcfg = PicardConfig {
            gamma: 0.01,
            radius: 5.0,
            max_iters: 5,
            fix_tol: 1e-6,
            time_samples: 64,
        };
        let scfg = SynthesisConfig::default();
        let cfg = SolverConfig::with_dt(1e-3).unwrap();
        let y0 = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
        let y_d = State::zeros(grid.n, 0.0);
        let out = picard_quasilinear(&grid, &y0, &y_d, 0.05, 1.0, 0.5, &law, &pcfg, &scfg, &cfg)
            .unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.iterate_distances[0] <= 1e-6);
    }

    #[test]
    fn small_data_arctan_flow_converges() {
        let grid = build_grid(100).unwrap();
        let law = arctan_law();
        let pcfg = PicardConfig {
            gamma: 0.01,
            radius: 10.0,
            max_iters: 5,
            fix_tol: 1e-4,
            time_samples: 64,
        };
        let scfg = SynthesisConfig::default();
        let cfg = SolverConfig::with_dt(1e-3).unwrap();
        let y0 = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
        let y_d = State::zeros(grid.n, 0.0);
        let out = picard_quasilinear(&grid, &y0, &y_d, 0.05, 1.0, 0.5, &law, &pcfg, &scfg, &cfg)
            .unwrap();
        assert!(out.iterations <= 5);
        let diff: Vec<f64> = out.trajectory.final_state().values.clone();
        assert!(grid.l2_norm(&diff) < 0.05);
    }

    #[test]
    fn large_gamma_violates_the_ball() {
        let grid = build_grid(60).unwrap();
        let law = arctan_law();
        let pcfg = PicardConfig {
            gamma: 100.0,
            radius: 10.0,
            max_iters: 3,
            fix_tol: 1e-4,
            time_samples: 32,
        };
        let scfg = SynthesisConfig::default();
        let cfg = SolverConfig::with_dt(1e-3).unwrap();
        let y0 = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
        let y_d = State::zeros(grid.n, 0.0);
        let r = picard_quasilinear(&grid, &y0, &y_d, 0.05, 1.0, 0.5, &law, &pcfg, &scfg, &cfg);
        match r {
            Err(Error::BallViolation { sup, radius }) => {
                assert!(sup > radius);
            }
            Err(Error::PicardNonconvergence { .. }) => {}
            other => panic!("expected ball violation or nonconvergence, got {other:?}"),
        }
    }
}
