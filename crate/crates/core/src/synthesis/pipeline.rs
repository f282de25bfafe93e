//! The two-phase steering pipeline.
//!
//! Phase 1 sweeps the damping window across (0,1) on `[0, T/2]` until
//! `‖y(T_M)‖ ≤ ε/2`. Phase 2 works on `(T_M, T)`: the state would freely
//! decay to `ŷ₁(·,T)` with `‖ŷ₁(·,T)‖ ≤ ‖y(T_M)‖`, so steering the
//! nonnegative increment `y_d` on top of the free flow reaches the phase-2
//! target `y_d + ŷ₁(·,T)`; by linearity the increment is steered from rest
//! by the additive sequence, and the additive run is lifted to a
//! multiplicative control along its own trajectory. The triangle
//! inequality then certifies `‖y(T) - y_d‖ < ε`, and the pipeline
//! re-measures that guarantee on the actual returned trajectory — runs
//! that cannot certify it error out rather than silently return.

use super::additive::{additive_sequence, AdditivePlan};
use super::lift::additive_to_multiplicative;
use super::sweep::{run_sweep, SweepPlan};
use super::target::{decompose_target, TargetDecomposition};
use super::SynthesisConfig;
use crate::control::{compose_schedules, ControlSchedule};
use crate::error::{Error, Result};
use crate::grid::{sup_norm, SpatialGrid};
use crate::law::{DiffusionLaw, FrozenLaw};
use crate::solver::{solve_forward, SolverConfig};
use crate::state::{State, Trajectory};

/// Measured sub-budgets of a pipeline run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PipelineReport {
    pub eps: f64,
    pub t_final: f64,
    /// Sweep end time (0 when the run exits early).
    pub t_m: f64,
    /// `‖y(T_M)‖` after the sweep.
    pub sweep_norm: f64,
    /// `‖ŷ₁(·,T)‖`: the free-decay sub-budget, ≤ ε/2.
    pub free_decay_norm: f64,
    /// `‖ŷ₂(·,T) - (y_d + ŷ₁(·,T))‖` for the lifted phase-2 run, < ε/2.
    pub phase2_defect: f64,
    /// Same quantity for the additive run before lifting.
    pub additive_defect: f64,
    /// Lift re-simulation defect.
    pub lift_defect: f64,
    /// `‖y(T) - y_d‖` on the returned trajectory, < ε.
    pub terminal_error: f64,
    /// True when `‖y0‖ + ‖y_d‖ < ε` already certifies the idle schedule.
    pub early_exit: bool,
}

/// Everything a pipeline run produces.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub schedule: ControlSchedule,
    pub trajectory: Trajectory,
    pub sweep: Option<SweepPlan>,
    pub decomposition: Option<TargetDecomposition>,
    pub additive: Option<AdditivePlan>,
    pub report: PipelineReport,
}

fn l2_diff(grid: &SpatialGrid, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    grid.l2_norm(&d)
}

/// Synthesize a mobile multiplicative control steering `y0` to within ε of
/// `y_d` at time `T` under the frozen law.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_pipeline(
    grid: &SpatialGrid,
    y0: &State,
    y_d: &State,
    eps: f64,
    t_final: f64,
    l: f64,
    law: &FrozenLaw,
    scfg: &SynthesisConfig,
    cfg: &SolverConfig,
) -> Result<PipelineOutcome> {
    if !(eps > 0.0 && t_final > 0.0) {
        return Err(Error::invalid("pipeline needs eps > 0 and T > 0"));
    }
    let scale0 = sup_norm(&y0.values);
    if !y0.is_nonnegative(1e-12 * (1.0 + scale0)) || scale0 == 0.0 {
        return Err(Error::invalid("pipeline needs nonnegative, nonzero initial data"));
    }
    if !y_d.is_nonnegative(1e-12 * (1.0 + sup_norm(&y_d.values))) {
        return Err(Error::invalid("pipeline target must be nonnegative"));
    }
    let t0 = y0.time;
    let t_end = t0 + t_final;
    let dlaw = DiffusionLaw::Frozen(law.clone());

    // trivial budget: the idle schedule already certifies by the triangle
    // inequality and the L² decay of the free flow
    if grid.l2_norm(&y0.values) + grid.l2_norm(&y_d.values) < eps {
        let schedule = ControlSchedule::idle((t0, t_end))?;
        let trajectory = solve_forward(grid, y0, (t0, t_end), &dlaw, &schedule, cfg)?;
        let terminal_error = l2_diff(grid, &trajectory.final_state().values, &y_d.values);
        if terminal_error >= eps {
            return Err(Error::PipelineDefect { achieved: terminal_error, epsilon: eps });
        }
        let report = PipelineReport {
            eps,
            t_final,
            t_m: t0,
            sweep_norm: grid.l2_norm(&y0.values),
            free_decay_norm: grid.l2_norm(&trajectory.final_state().values),
            phase2_defect: 0.0,
            additive_defect: 0.0,
            lift_defect: 0.0,
            terminal_error,
            early_exit: true,
        };
        return Ok(PipelineOutcome {
            schedule,
            trajectory,
            sweep: None,
            decomposition: None,
            additive: None,
            report,
        });
    }

    // phase 1: sweep on [t0, t0 + T/2]
    let budget_end = t0 + t_final / 2.0;
    let (sweep_plan, y_tm) = run_sweep(grid, y0, eps, l, law, budget_end, scfg, cfg)?;
    let t_m = sweep_plan.t_m();
    let sweep_schedule = sweep_plan.schedule()?;

    // free decay ŷ₁ on (T_M, T)
    let idle_tail = ControlSchedule::idle((t_m, t_end))?;
    let free_traj = solve_forward(grid, &y_tm, (t_m, t_end), &dlaw, &idle_tail, cfg)?;
    let y_hat1 = free_traj.final_state().clone();
    let free_decay_norm = grid.l2_norm(&y_hat1.values);
    if free_decay_norm > sweep_plan.final_norm + 1e-12 {
        return Err(Error::PipelineDefect { achieved: free_decay_norm, epsilon: sweep_plan.final_norm });
    }

    // phase 2: steer the increment y_d from rest on (T_M, T), leaving the
    // remaining share of ε/2 for the lifting defect
    let eps2 = scfg.phase2_budget_factor * (eps / 2.0);
    let decomposition = decompose_target(grid, y_d, l, eps2, scfg)?;
    let (additive_plan, v_schedule) =
        additive_sequence(grid, &decomposition, (t_m, t_end), eps2, law, scfg, cfg)?;

    // the combined additive run from y(T_M), at the additive phase's step
    let mut cfg_fine = cfg.clone();
    cfg_fine.dt = additive_plan.solver_dt;
    let additive_traj = solve_forward(grid, &y_tm, (t_m, t_end), &dlaw, &v_schedule, &cfg_fine)?;
    let phase2_target: Vec<f64> = y_d
        .values
        .iter()
        .zip(&y_hat1.values)
        .map(|(d, f)| d + f)
        .collect();
    let additive_defect = l2_diff(grid, &additive_traj.final_state().values, &phase2_target);

    // lift to a multiplicative control along the additive run
    let floor = scfg.lift_floor_rel * scale0;
    let lift =
        additive_to_multiplicative(&additive_traj, &v_schedule, floor, scfg.lift_u_max, &cfg_fine)?;
    let phase2_defect = l2_diff(grid, &lift.resimulated.final_state().values, &phase2_target);
    if phase2_defect >= eps / 2.0 {
        return Err(Error::PipelineDefect { achieved: phase2_defect, epsilon: eps / 2.0 });
    }

    // compose and certify the returned trajectory; stage-wise stepping
    // makes the concatenation identical to one continuous run
    let schedule = compose_schedules(&sweep_schedule, &lift.schedule)?;
    let sweep_traj = solve_forward(grid, y0, (t0, t_m), &dlaw, &sweep_schedule, cfg)?;
    let mut states = sweep_traj.states.clone();
    states.extend(lift.resimulated.states.iter().skip(1).cloned());
    let mut meta = sweep_traj.meta.clone();
    meta.steps_total += lift.resimulated.meta.steps_total;
    meta.min_value = meta.min_value.min(lift.resimulated.meta.min_value);
    meta.max_abs = meta.max_abs.max(lift.resimulated.meta.max_abs);
    meta.newton_iters_max = meta.newton_iters_max.max(lift.resimulated.meta.newton_iters_max);
    meta.stage_dts.extend(lift.resimulated.meta.stage_dts.iter().cloned());
    let trajectory = Trajectory {
        states,
        dt: cfg.dt,
        grid: grid.clone(),
        law: dlaw,
        schedule_id: format!("pipeline-eps{eps}-l{l}"),
        meta,
    };
    let terminal_error = l2_diff(grid, &trajectory.final_state().values, &y_d.values);
    if terminal_error >= eps {
        return Err(Error::PipelineDefect { achieved: terminal_error, epsilon: eps });
    }

    let report = PipelineReport {
        eps,
        t_final,
        t_m,
        sweep_norm: sweep_plan.final_norm,
        free_decay_norm,
        phase2_defect,
        additive_defect,
        lift_defect: lift.defect,
        terminal_error,
        early_exit: false,
    };
    Ok(PipelineOutcome {
        schedule,
        trajectory,
        sweep: Some(sweep_plan),
        decomposition: Some(decomposition),
        additive: Some(additive_plan),
        report,
    })
}
