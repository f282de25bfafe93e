//! Experiment dispatch: build the problem from the config, run the library
//! operation, write artifacts, and fold certificate verdicts into the exit
//! status.

use crate::artifact::RunArtifact;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::plot::{Chart, Series};
use crate::witness::control_batch;
use anyhow::{anyhow, bail, Result};
use mobctrl_core::certificates::{
    self, discretization_tol, CertificateReport, Measurement, Verdict,
};
use mobctrl_core::control::{ControlSchedule, ControlStage, StagePayload, Window};
use mobctrl_core::error::Error as CoreError;
use mobctrl_core::grid::SpatialGrid;
use mobctrl_core::law::DiffusionLaw;
use mobctrl_core::solver::{eigen_oracle, solve_forward};
use mobctrl_core::state::{State, Trajectory};
use mobctrl_core::synthesis::{picard_quasilinear, run_sweep, synthesize_pipeline};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Pass,
    CertFailure,
    Infeasible,
}

/// A core error that means "the synthesis could not certify", as opposed
/// to a harness bug or an I/O problem.
fn is_infeasible(err: &CoreError) -> bool {
    matches!(
        err,
        CoreError::StageInfeasible { .. }
            | CoreError::ControlInfeasible { .. }
            | CoreError::InfeasibleDecomposition { .. }
            | CoreError::LiftingInfeasible { .. }
            | CoreError::PipelineDefect { .. }
            | CoreError::BallViolation { .. }
            | CoreError::PicardNonconvergence { .. }
            | CoreError::Nonconvergence { .. }
    )
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    effective_toml: &str,
    out: &Path,
) -> Result<RunStatus> {
    let artifact = RunArtifact::create(out)?;
    artifact.write_config(effective_toml)?;
    let result = match cfg.kind {
        ExperimentKind::Solve => run_solve(cfg, &artifact),
        ExperimentKind::Sweep => run_sweep_kind(cfg, &artifact),
        ExperimentKind::Pipeline => run_pipeline(cfg, &artifact),
        ExperimentKind::Picard => run_picard(cfg, &artifact),
        ExperimentKind::Certify => run_certify(cfg, &artifact),
        ExperimentKind::Witness => run_witness(cfg, &artifact),
    };
    match result {
        Ok(status) => Ok(status),
        Err(e) => {
            artifact.write_failure(kind_name(cfg.kind), &format!("{e:#}"))?;
            if e.chain()
                .filter_map(|c| c.downcast_ref::<CoreError>())
                .any(is_infeasible)
            {
                Ok(RunStatus::Infeasible)
            } else {
                Err(e)
            }
        }
    }
}

fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Solve => "solve",
        ExperimentKind::Sweep => "sweep",
        ExperimentKind::Pipeline => "pipeline",
        ExperimentKind::Picard => "picard",
        ExperimentKind::Certify => "certify",
        ExperimentKind::Witness => "witness",
    }
}

fn status_of(reports: &[CertificateReport]) -> RunStatus {
    if reports.iter().any(|r| r.verdict == Verdict::Fail) {
        RunStatus::CertFailure
    } else {
        RunStatus::Pass
    }
}

fn status_name(status: RunStatus) -> &'static str {
    match status {
        RunStatus::Pass => "pass",
        RunStatus::CertFailure => "certificate_failure",
        RunStatus::Infeasible => "infeasible",
    }
}

/// Synthetic report for a synthesis bookkeeping inequality.
fn bound_report(name: &str, measured: f64, bound: f64, tolerance: f64) -> CertificateReport {
    let margin = bound + tolerance - measured;
    CertificateReport {
        name: name.to_string(),
        inputs_digest: certificates::digest(&[name.to_string(), format!("{measured:.17e}")]),
        measured: vec![Measurement { quantity: "measured".into(), value: measured }],
        bound,
        tolerance,
        margin,
        verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
        note: String::new(),
    }
}

fn l2_diff(grid: &SpatialGrid, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    grid.l2_norm(&d)
}

fn norm_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    let stride = traj.states.len().div_ceil(1024).max(1);
    let last = traj.states.len() - 1;
    traj.states
        .iter()
        .enumerate()
        .filter(|(k, _)| k % stride == 0 || *k == last)
        .map(|(_, s)| (s.time, traj.grid.l2_norm(&s.values)))
        .collect()
}

fn log10_series(series: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    series
        .into_iter()
        .map(|(t, v)| (t, v.max(1e-16).log10()))
        .collect()
}

fn state_series(grid: &SpatialGrid, values: &[f64]) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(grid.n + 2);
    let (lo, hi) = grid.span();
    pts.push((lo, 0.0));
    for (i, v) in values.iter().enumerate() {
        pts.push((grid.x(i), *v));
    }
    pts.push((hi, 0.0));
    pts
}

fn staircase_series(schedule: &ControlSchedule) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for stage in schedule.stages() {
        pts.push((stage.t_start, stage.window.r));
        pts.push((stage.t_end, stage.window.r));
    }
    pts
}

fn plot_norm_history(
    artifact: &RunArtifact,
    traj: &Trajectory,
    v_lines: Vec<f64>,
    h_lines: Vec<(f64, String)>,
) -> Result<()> {
    let chart = Chart {
        title: "L2 norm vs time".into(),
        x_label: "t".into(),
        y_label: "log10 ||y||".into(),
        series: vec![Series {
            label: "||y(t)||".into(),
            points: log10_series(norm_series(traj)),
            steps: false,
        }],
        h_lines: h_lines
            .into_iter()
            .map(|(v, s)| (v.max(1e-16).log10(), s))
            .collect(),
        v_lines,
    };
    artifact.write_plot("norm", &chart.render())
}

fn plot_window_staircase(artifact: &RunArtifact, schedule: &ControlSchedule) -> Result<()> {
    let chart = Chart {
        title: "window origin r(t)".into(),
        x_label: "t".into(),
        y_label: "r".into(),
        series: vec![Series {
            label: "r(t)".into(),
            points: staircase_series(schedule),
            steps: false,
        }],
        h_lines: vec![],
        v_lines: vec![],
    };
    artifact.write_plot("window", &chart.render())
}

fn plot_snapshots(
    artifact: &RunArtifact,
    grid: &SpatialGrid,
    snaps: Vec<(String, Vec<f64>)>,
) -> Result<()> {
    let series = snaps
        .into_iter()
        .map(|(label, values)| Series {
            label,
            points: state_series(grid, &values),
            steps: false,
        })
        .collect();
    let chart = Chart {
        title: "state snapshots".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        series,
        h_lines: vec![],
        v_lines: vec![],
    };
    artifact.write_plot("state", &chart.render())
}

/// Snapshots at stage boundaries (and the end), at most eight.
fn stage_boundary_snapshots(traj: &Trajectory, schedule: &ControlSchedule) -> Vec<(String, Vec<f64>)> {
    let mut wanted: Vec<f64> = vec![traj.start_time()];
    for stage in schedule.stages() {
        wanted.push(stage.t_end);
    }
    let stride = wanted.len().div_ceil(8).max(1);
    let mut snaps = Vec::new();
    for (k, t) in wanted.iter().enumerate() {
        if k % stride != 0 && k != wanted.len() - 1 {
            continue;
        }
        if let Some(s) = traj
            .states
            .iter()
            .min_by(|a, b| (a.time - t).abs().partial_cmp(&(b.time - t).abs()).unwrap())
        {
            snaps.push((format!("t = {:.4}", s.time), s.values.clone()));
        }
    }
    snaps
}

/// The schedule a `solve`/`certify` run applies: constant damping on a
/// window, or idle.
fn solve_schedule(cfg: &ExperimentConfig, span: (f64, f64)) -> Result<ControlSchedule> {
    let (r, l) = cfg.control.window;
    let window = Window::new(r, l).map_err(|e| anyhow!("{e}"))?;
    let payload = if cfg.control.m > 0.0 {
        StagePayload::ConstMultiplicative { m: cfg.control.m }
    } else {
        StagePayload::Idle
    };
    let stage = ControlStage::new(span.0, span.1, window, payload).map_err(|e| anyhow!("{e}"))?;
    ControlSchedule::new(vec![stage]).map_err(|e| anyhow!("{e}"))
}

fn run_solve(cfg: &ExperimentConfig, artifact: &RunArtifact) -> Result<RunStatus> {
    let grid = cfg.build_grid()?;
    let law = cfg.build_law()?;
    let solver = cfg.solver_config(&grid)?;
    let y0 = cfg.build_data(&cfg.initial, &grid)?;
    let t_final = cfg.time.t_final;
    let schedule = solve_schedule(cfg, (0.0, t_final))?;
    let traj = solve_forward(&grid, &y0, (0.0, t_final), &law, &schedule, &solver)
        .map_err(|e| anyhow!(e).context("forward solve"))?;

    let mut reports = vec![certificates::check_nonnegativity(&traj, &schedule)
        .map_err(|e| anyhow!("{e}"))?];

    // oracle table for constant coefficients
    let mut oracle_rows: Vec<(f64, f64)> = Vec::new();
    let mut oracle_final = None;
    if cfg.control.oracle_compare {
        let frozen = law
            .as_frozen()
            .ok_or_else(|| anyhow!("oracle comparison needs a frozen law"))?;
        if frozen.bt_sup > 1e-12 || frozen.bx_sup > 1e-12 {
            bail!("oracle comparison needs a constant coefficient");
        }
        let (r, l) = cfg.control.window;
        if cfg.control.m > 0.0 && !(r <= 0.0 && r + l >= 1.0) {
            bail!("oracle comparison with damping needs the whole-domain window");
        }
        let b_const = frozen.coeff(0.5, 0.0);
        let stride = traj.states.len().div_ceil(64).max(1);
        let last = traj.states.len() - 1;
        for (k, s) in traj.states.iter().enumerate() {
            if k % stride != 0 && k != last {
                continue;
            }
            let reference = eigen_oracle(&y0, b_const, cfg.control.m, s.time - y0.time)
                .map_err(|e| anyhow!("{e}"))?;
            oracle_rows.push((s.time, l2_diff(&grid, &s.values, &reference.values)));
        }
        oracle_final = oracle_rows.last().map(|&(_, e)| e);
        let tol = discretization_tol(grid.h, solver.dt, 1.0);
        reports.push(bound_report("oracle_error", oracle_final.unwrap_or(0.0), 0.0, tol));
    }

    artifact.write_trajectory(&traj)?;
    artifact.write_schedule(&schedule, None)?;
    artifact.write_certificates(&reports)?;
    plot_norm_history(artifact, &traj, vec![], vec![])?;
    plot_window_staircase(artifact, &schedule)?;
    plot_snapshots(artifact, &grid, stage_boundary_snapshots(&traj, &schedule))?;

    let status = status_of(&reports);
    let summary = serde_json::json!({
        "kind": "solve",
        "status": status_name(status),
        "n": grid.n,
        "dt": solver.dt,
        "t_final": t_final,
        "final_norm": grid.l2_norm(&traj.final_state().values),
        "sup_norm": traj.meta.max_abs,
        "min_value": traj.meta.min_value,
        "steps_total": traj.meta.steps_total,
        "oracle_final_error": oracle_final,
        "oracle_error_table": oracle_rows,
        "certificates": reports.iter().map(|r| (r.name.clone(), format!("{:?}", r.verdict))).collect::<Vec<_>>(),
    });
    artifact.write_summary(&summary)?;
    Ok(status)
}

/// Reports certifying a sweep plan's inequality chain.
fn sweep_reports(
    plan: &mobctrl_core::synthesis::SweepPlan,
    grid: &SpatialGrid,
    dt: f64,
) -> Vec<CertificateReport> {
    let tol = discretization_tol(grid.h, dt, 1.0);
    let mut reports = Vec::new();
    for st in &plan.stages {
        reports.push(bound_report(
            &format!("sweep_stage_{}_window_norm_sq", st.index),
            st.window_norm_sq,
            st.threshold_sq,
            0.0,
        ));
        reports.push(bound_report(
            &format!("sweep_stage_{}_chain_sq", st.index),
            st.cum_norm_sq,
            st.cum_bound_sq,
            tol,
        ));
        if let Some(gap) = st.gap_limit {
            reports.push(bound_report(
                &format!("sweep_stage_{}_gap", st.index),
                st.t_end - st.t_start,
                gap,
                0.0,
            ));
        }
    }
    reports.push(bound_report("sweep_final_norm", plan.final_norm, plan.eps / 2.0, tol.sqrt()));
    reports
}

fn run_sweep_kind(cfg: &ExperimentConfig, artifact: &RunArtifact) -> Result<RunStatus> {
    let grid = cfg.build_grid()?;
    let law = cfg.build_law()?;
    let frozen = law
        .as_frozen()
        .ok_or_else(|| anyhow!("the sweep needs a frozen law"))?;
    let solver = cfg.solver_config(&grid)?;
    let y0 = cfg.build_data(&cfg.initial, &grid)?;
    let scfg = cfg.synthesis_config();
    let (plan, _y_end) = run_sweep(
        &grid,
        &y0,
        cfg.control.eps,
        cfg.control.l,
        frozen,
        cfg.time.t_final,
        &scfg,
        &solver,
    )
    .map_err(|e| anyhow!(e).context("sweep synthesis"))?;
    let schedule = plan.schedule().map_err(|e| anyhow!("{e}"))?;
    let traj = solve_forward(&grid, &y0, (y0.time, plan.t_m()), &law, &schedule, &solver)
        .map_err(|e| anyhow!(e).context("sweep replay"))?;

    let mut reports = sweep_reports(&plan, &grid, solver.dt);
    reports.push(certificates::check_nonnegativity(&traj, &schedule).map_err(|e| anyhow!("{e}"))?);
    reports.push(certificates::check_sup_bound(&traj, &schedule).map_err(|e| anyhow!("{e}"))?);

    artifact.write_trajectory(&traj)?;
    artifact.write_schedule(&schedule, Some(serde_json::to_value(&plan)?))?;
    artifact.write_certificates(&reports)?;
    let thr = (plan.eps * plan.eps / (4.0 * (2 * plan.m_windows - 1) as f64)).sqrt();
    plot_norm_history(
        artifact,
        &traj,
        plan.stages.iter().map(|s| s.t_end).collect(),
        vec![
            (plan.eps / 2.0, "eps/2".into()),
            (thr, "window threshold".into()),
        ],
    )?;
    plot_window_staircase(artifact, &schedule)?;
    plot_snapshots(artifact, &grid, stage_boundary_snapshots(&traj, &schedule))?;

    let status = status_of(&reports);
    let summary = serde_json::json!({
        "kind": "sweep",
        "status": status_name(status),
        "eps": plan.eps,
        "l": plan.l,
        "m_windows": plan.m_windows,
        "t_m": plan.t_m(),
        "final_norm": plan.final_norm,
        "stages": plan.stages.iter().map(|s| serde_json::json!({
            "index": s.index,
            "m": s.m,
            "t_end": s.t_end,
            "window_norm_sq": s.window_norm_sq,
            "threshold_sq": s.threshold_sq,
            "cum_norm_sq": s.cum_norm_sq,
            "cum_bound_sq": s.cum_bound_sq,
            "gap_limit": s.gap_limit,
            "c1": s.c1,
            "boundary_term": s.boundary_term,
        })).collect::<Vec<_>>(),
    });
    artifact.write_summary(&summary)?;
    Ok(status)
}

fn run_pipeline(cfg: &ExperimentConfig, artifact: &RunArtifact) -> Result<RunStatus> {
    let grid = cfg.build_grid()?;
    let law = cfg.build_law()?;
    let frozen = law
        .as_frozen()
        .ok_or_else(|| anyhow!("the pipeline needs a frozen law; use kind = \"picard\" for quasilinear"))?;
    let solver = cfg.solver_config(&grid)?;
    let y0 = cfg.build_data(&cfg.initial, &grid)?;
    let target_section = cfg
        .target
        .as_ref()
        .ok_or_else(|| anyhow!("pipeline runs need a [target] section"))?;
    let y_d = cfg.build_data(target_section, &grid)?;
    let scfg = cfg.synthesis_config();
    let outcome = synthesize_pipeline(
        &grid,
        &y0,
        &y_d,
        cfg.control.eps,
        cfg.time.t_final,
        cfg.control.l,
        frozen,
        &scfg,
        &solver,
    )
    .map_err(|e| anyhow!(e).context("pipeline synthesis"))?;

    let report = &outcome.report;
    let eps = cfg.control.eps;
    let mut reports = Vec::new();
    if let Some(plan) = &outcome.sweep {
        reports.extend(sweep_reports(plan, &grid, solver.dt));
    }
    reports.push(bound_report("free_decay_budget", report.free_decay_norm, eps / 2.0, 0.0));
    reports.push(bound_report("phase2_budget", report.phase2_defect, eps / 2.0, 0.0));
    reports.push(bound_report("terminal_error", report.terminal_error, eps, 0.0));
    reports.push(
        certificates::check_nonnegativity(&outcome.trajectory, &outcome.schedule)
            .map_err(|e| anyhow!("{e}"))?,
    );

    artifact.write_trajectory(&outcome.trajectory)?;
    let cert_block = serde_json::json!({
        "report": report,
        "sweep": outcome.sweep,
        "additive": outcome.additive,
    });
    artifact.write_schedule(&outcome.schedule, Some(cert_block))?;
    artifact.write_certificates(&reports)?;
    let m_windows = outcome.sweep.as_ref().map(|p| p.m_windows).unwrap_or(1);
    let thr = (eps * eps / (4.0 * (2 * m_windows - 1) as f64)).sqrt();
    plot_norm_history(
        artifact,
        &outcome.trajectory,
        vec![report.t_m],
        vec![
            (eps / 2.0, "eps/2".into()),
            (thr, "window threshold".into()),
        ],
    )?;
    plot_window_staircase(artifact, &outcome.schedule)?;
    let mut snaps = stage_boundary_snapshots(&outcome.trajectory, &outcome.schedule);
    snaps.push(("target".into(), y_d.values.clone()));
    plot_snapshots(artifact, &grid, snaps)?;

    let status = status_of(&reports);
    let summary = serde_json::json!({
        "kind": "pipeline",
        "status": status_name(status),
        "eps": eps,
        "report": report,
        "achieved_errors": outcome.additive.as_ref().map(|a| a.achieved_errors.clone()),
        "nnls_residuals": outcome.additive.as_ref().map(|a| a.nnls_residuals.clone()),
        "delta": outcome.additive.as_ref().map(|a| a.delta.clone()),
        "decomposition_error": outcome.decomposition.as_ref().map(|d| d.decomposition_error),
    });
    artifact.write_summary(&summary)?;
    Ok(status)
}

fn run_picard(cfg: &ExperimentConfig, artifact: &RunArtifact) -> Result<RunStatus> {
    let grid = cfg.build_grid()?;
    let law = cfg.build_law()?;
    let qlaw = match &law {
        DiffusionLaw::Quasilinear(q) => q.clone(),
        DiffusionLaw::Frozen(_) => bail!("the picard loop needs a quasilinear law"),
    };
    let solver = cfg.solver_config(&grid)?;
    let y0_base = cfg.build_data(&cfg.initial, &grid)?;
    let y_d = match &cfg.target {
        Some(t) => cfg.build_data(t, &grid)?,
        None => State::zeros(grid.n, 0.0),
    };
    let pcfg = cfg.picard_config();
    let scfg = cfg.synthesis_config();
    let outcome = picard_quasilinear(
        &grid,
        &y0_base,
        &y_d,
        cfg.control.eps,
        cfg.time.t_final,
        cfg.control.l,
        &qlaw,
        &pcfg,
        &scfg,
        &solver,
    )
    .map_err(|e| anyhow!(e).context("picard iteration"))?;

    let terminal = l2_diff(&grid, &outcome.trajectory.final_state().values, &y_d.values);
    let mut reports = vec![bound_report("terminal_error", terminal, cfg.control.eps, 0.0)];
    reports.push(
        certificates::check_nonnegativity(&outcome.trajectory, &outcome.schedule)
            .map_err(|e| anyhow!("{e}"))?,
    );

    artifact.write_trajectory(&outcome.trajectory)?;
    artifact.write_schedule(&outcome.schedule, None)?;
    artifact.write_certificates(&reports)?;
    plot_norm_history(artifact, &outcome.trajectory, vec![], vec![])?;
    plot_window_staircase(artifact, &outcome.schedule)?;
    let distances: Vec<(f64, f64)> = outcome
        .iterate_distances
        .iter()
        .enumerate()
        .map(|(k, d)| (k as f64 + 1.0, d.max(1e-16).log10()))
        .collect();
    let chart = Chart {
        title: "picard iterate distances".into(),
        x_label: "iteration".into(),
        y_label: "log10 distance".into(),
        series: vec![Series { label: "L2(Q_T) distance".into(), points: distances, steps: false }],
        h_lines: vec![(pcfg.fix_tol.log10(), "fix_tol".into())],
        v_lines: vec![],
    };
    artifact.write_plot("picard", &chart.render())?;

    let status = status_of(&reports);
    let summary = serde_json::json!({
        "kind": "picard",
        "status": status_name(status),
        "iterations": outcome.iterations,
        "iterate_distances": outcome.iterate_distances,
        "u_sup_history": outcome.u_sup_history,
        "terminal_error": terminal,
        "pipeline_report": outcome.pipeline_report,
        "gamma": pcfg.gamma,
        "radius": pcfg.radius,
    });
    artifact.write_summary(&summary)?;
    Ok(status)
}

fn run_certify(cfg: &ExperimentConfig, artifact: &RunArtifact) -> Result<RunStatus> {
    let grid = cfg.build_grid()?;
    let law = cfg.build_law()?;
    let solver = cfg.solver_config(&grid)?;
    let y0 = cfg.build_data(&cfg.initial, &grid)?;
    let t_final = cfg.time.t_final;
    let schedule = solve_schedule(cfg, (0.0, t_final))?;
    let traj = solve_forward(&grid, &y0, (0.0, t_final), &law, &schedule, &solver)
        .map_err(|e| anyhow!(e).context("forward solve"))?;

    let mut reports = Vec::new();
    reports.push(certificates::check_nonnegativity(&traj, &schedule).map_err(|e| anyhow!("{e}"))?);
    reports.push(certificates::check_sup_bound(&traj, &schedule).map_err(|e| anyhow!("{e}"))?);
    reports.push(
        certificates::check_strict_positivity(&traj, &schedule, t_final)
            .map_err(|e| anyhow!("{e}"))?,
    );
    // ordered pair: half the data under the same schedule
    let y0_half = State::new(y0.values.iter().map(|v| 0.5 * v).collect(), y0.time)
        .map_err(|e| anyhow!("{e}"))?;
    let traj_half = solve_forward(&grid, &y0_half, (0.0, t_final), &law, &schedule, &solver)
        .map_err(|e| anyhow!(e).context("comparison solve"))?;
    reports.push(certificates::check_comparison(&traj_half, &traj).map_err(|e| anyhow!("{e}"))?);

    if let Some(frozen) = law.as_frozen() {
        reports.push(
            certificates::check_decay(&grid, &y0, frozen, t_final, &solver)
                .map_err(|e| anyhow!("{e}"))?,
        );
        let constants = certificates::compute_energy_constants(
            &grid,
            &y0,
            frozen,
            cfg.control.m,
            0.0,
            t_final,
        )
        .map_err(|e| anyhow!("{e}"))?;
        reports.push(
            certificates::check_time_derivative_bound(&traj, &schedule, &constants)
                .map_err(|e| anyhow!("{e}"))?,
        );
        reports.push(
            certificates::check_bernstein_boundary(&traj, &schedule, frozen)
                .map_err(|e| anyhow!("{e}"))?,
        );
        let base = mobctrl_core::field::Field::parse_expr("1").map_err(|e| anyhow!("{e}"))?;
        let perts = vec![
            mobctrl_core::field::Field::parse_expr("1 + x").map_err(|e| anyhow!("{e}"))?,
            mobctrl_core::field::Field::parse_expr("2").map_err(|e| anyhow!("{e}"))?,
        ];
        reports.push(
            certificates::check_control_to_state_lipschitz(
                (0.0, 0.5),
                &law,
                t_final.min(0.1),
                &base,
                &perts,
                &solver,
            )
            .map_err(|e| anyhow!("{e}"))?,
        );
    }

    artifact.write_trajectory(&traj)?;
    artifact.write_schedule(&schedule, None)?;
    artifact.write_certificates(&reports)?;
    plot_norm_history(artifact, &traj, vec![], vec![])?;
    plot_snapshots(artifact, &grid, stage_boundary_snapshots(&traj, &schedule))?;

    let status = status_of(&reports);
    let summary = serde_json::json!({
        "kind": "certify",
        "status": status_name(status),
        "certificates": reports.iter().map(|r| serde_json::json!({
            "name": r.name,
            "verdict": r.verdict,
            "margin": r.margin,
            "bound": r.bound,
        })).collect::<Vec<_>>(),
    });
    artifact.write_summary(&summary)?;
    Ok(status)
}

fn run_witness(cfg: &ExperimentConfig, artifact: &RunArtifact) -> Result<RunStatus> {
    let grid = cfg.build_grid()?;
    let law = cfg.build_law()?;
    let solver = cfg.solver_config(&grid)?;
    let y0 = cfg.build_data(&cfg.initial, &grid)?;
    let w = &cfg.witness;
    let omega = Window::new(w.omega.0, w.omega.1).map_err(|e| anyhow!("{e}"))?;
    let controls = control_batch(&grid, cfg.time.t_final, w.amplitude, w.count, w.pieces, w.seed);
    let report = certificates::noncontrollability_witness(
        &grid,
        &y0,
        omega,
        w.probe,
        &controls,
        cfg.time.t_final,
        &law,
        &solver,
    )
    .map_err(|e| anyhow!(e).context("witness experiment"))?;

    let dominance_passes = report
        .measured
        .iter()
        .filter(|m| m.quantity.starts_with("control ") && m.value + report.tolerance >= 0.0)
        .count();
    let obstruction = report
        .measured
        .iter()
        .find(|m| m.quantity.starts_with("obstruction"))
        .map(|m| m.value)
        .unwrap_or(0.0);

    // envelope trajectory for the record
    let n_sub = (((w.probe.1 - w.probe.0) / grid.h).round() as usize).saturating_sub(1).max(8);
    let sub = SpatialGrid::on_interval(w.probe.0, w.probe.1, n_sub).map_err(|e| anyhow!("{e}"))?;
    let y0_sub = State::from_fn(&sub, 0.0, |x| y0.sample_at(&grid, x, (0.0, 0.0)));
    let envelope = mobctrl_core::solver::subdomain_solve(
        &y0_sub,
        w.probe,
        &law,
        &mobctrl_core::solver::BoundaryTraces::zero(),
        (0.0, cfg.time.t_final),
        &solver,
    )
    .map_err(|e| anyhow!("{e}"))?;

    let reports = vec![report];
    artifact.write_trajectory(&envelope)?;
    artifact.write_certificates(&reports)?;
    plot_snapshots(
        artifact,
        &grid,
        vec![("y0".into(), y0.values.clone())],
    )?;
    let chart = Chart {
        title: "lower envelope on the probe".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        series: vec![
            Series {
                label: "envelope(0)".into(),
                points: state_series(&sub, &envelope.initial_state().values),
                steps: false,
            },
            Series {
                label: "envelope(T)".into(),
                points: state_series(&sub, &envelope.final_state().values),
                steps: false,
            },
        ],
        h_lines: vec![],
        v_lines: vec![],
    };
    artifact.write_plot("envelope", &chart.render())?;

    let status = status_of(&reports);
    let summary = serde_json::json!({
        "kind": "witness",
        "status": status_name(status),
        "omega": w.omega,
        "probe": w.probe,
        "amplitude": w.amplitude,
        "seed": w.seed,
        "controls": w.count,
        "dominance_passes": dominance_passes,
        "obstruction_norm": obstruction,
        "min_margin": reports[0].measured[0].value,
        "tolerance": reports[0].tolerance,
    });
    artifact.write_summary(&summary)?;
    Ok(status)
}
