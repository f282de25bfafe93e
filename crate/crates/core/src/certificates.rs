//! Numerical verification of the quantitative estimates on computed
//! trajectories.
//!
//! Every check measures the quantities a lemma constrains, compares them
//! against the lemma's bound plus an explicit discretization tolerance, and
//! reports pass / fail / inapplicable. Hypothesis checks are part of each
//! operation: when a lemma's preconditions fail the verdict is
//! `Inapplicable`, never `Pass`. Verdicts are reproducible bit-for-bit
//! from the inputs; nothing here draws randomness.

use crate::control::{ControlSchedule, StagePayload, Window};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{sup_norm, SpatialGrid};
use crate::law::{DiffusionLaw, FrozenLaw};
use crate::solver::{solve_on_grid, subdomain_solve, BoundaryTraces, SolverConfig};
use crate::state::{State, Trajectory};
use serde::{Deserialize, Serialize};

/// Observed oracle-error constant: the solver's L² error against the
/// sine-expansion oracle behaves like `C·(dt + h²)` with `C ≈ 1.2` in the
/// convergence suite. Discretization tolerances use ten times this.
pub const DISCRETIZATION_ERROR_CONST: f64 = 1.2;

/// Sign-certificate slack relative to the trajectory scale.
pub const SIGN_TOL_REL: f64 = 1e-10;

/// Relative threshold for "strictly positive" verdicts: discrete schemes
/// cannot certify > 0 exactly, so the minimum must clear this share of the
/// domain maximum.
pub const POSITIVITY_THRESHOLD_REL: f64 = 1e-12;

/// `10·C·(h² + dt)·scale` — the standing discretization tolerance model.
pub fn discretization_tol(h: f64, dt: f64, scale: f64) -> f64 {
    10.0 * DISCRETIZATION_ERROR_CONST * (h * h + dt) * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inapplicable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Measurement {
    pub quantity: String,
    pub value: f64,
}

/// A named invariant check: measured values, the theoretical bound, the
/// tolerance in force, and the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub name: String,
    pub inputs_digest: String,
    pub measured: Vec<Measurement>,
    pub bound: f64,
    pub tolerance: f64,
    /// `bound + tolerance - worst measured`; pass iff nonnegative.
    pub margin: f64,
    pub verdict: Verdict,
    pub note: String,
}

impl CertificateReport {
    fn inapplicable(name: &str, digest: String, note: String) -> Self {
        CertificateReport {
            name: name.to_string(),
            inputs_digest: digest,
            measured: Vec::new(),
            bound: 0.0,
            tolerance: 0.0,
            margin: 0.0,
            verdict: Verdict::Inapplicable,
            note,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Flat CSV row: `name,margin,bound,verdict`.
    pub fn csv_row(&self) -> String {
        let v = match self.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inapplicable => "inapplicable",
        };
        format!("{},{},{},{}", self.name, self.margin, self.bound, v)
    }
}

/// FNV-1a over a canonical description of the inputs.
pub fn digest(parts: &[String]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for p in parts {
        for b in p.as_bytes() {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash ^= 0x1f;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

fn traj_digest(name: &str, traj: &Trajectory, extra: &[String]) -> String {
    let mut parts = vec![
        name.to_string(),
        format!("n={}", traj.grid.n),
        format!("dt={}", traj.dt),
        format!("t0={}", traj.start_time()),
        format!("t1={}", traj.end_time()),
        format!("sched={}", traj.schedule_id),
        format!("y0={:.17e}", traj.grid.l2_norm(&traj.states[0].values)),
    ];
    parts.extend_from_slice(extra);
    digest(&parts)
}

/// Does the schedule keep `u ≤ 0` everywhere it acts?
fn u_nonpositive(schedule: &ControlSchedule) -> Result<bool> {
    for stage in schedule.stages() {
        match &stage.payload {
            StagePayload::Idle | StagePayload::FieldAdditive { .. } => {}
            StagePayload::ConstMultiplicative { .. } => {} // applied as -m, m >= 0
            StagePayload::FieldMultiplicative { u } => {
                let max = u.sampled_max(
                    (stage.window.r, stage.window.end()),
                    (stage.t_start, stage.t_end),
                )?;
                if max > 1e-12 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn has_additive(schedule: &ControlSchedule) -> bool {
    schedule
        .stages()
        .iter()
        .any(|s| matches!(s.payload, StagePayload::FieldAdditive { .. }))
}

/// Lemma-type sign preservation: nonnegative data and nonnegative additive
/// forcing keep the state nonnegative for any bounded `u`.
pub fn check_nonnegativity(traj: &Trajectory, schedule: &ControlSchedule) -> Result<CertificateReport> {
    let name = "nonnegativity";
    let dg = traj_digest(name, traj, &[]);
    let y0 = &traj.states[0];
    if !y0.is_nonnegative(1e-14 * (1.0 + sup_norm(&y0.values))) {
        return Ok(CertificateReport::inapplicable(
            name,
            dg,
            "initial data has a negative part".into(),
        ));
    }
    // additive payloads are nonnegative by construction; re-certify here
    for stage in schedule.stages() {
        if let StagePayload::FieldAdditive { v } = &stage.payload {
            let min = v.sampled_min((stage.window.r, stage.window.end()), (stage.t_start, stage.t_end))?;
            if min < -1e-12 {
                return Ok(CertificateReport::inapplicable(
                    name,
                    dg,
                    "additive payload has a negative part".into(),
                ));
            }
        }
    }
    let scale = traj.meta.max_abs.max(f64::MIN_POSITIVE);
    let tolerance = SIGN_TOL_REL * scale;
    let min = traj.meta.min_value;
    let margin = min + tolerance;
    Ok(CertificateReport {
        name: name.to_string(),
        inputs_digest: dg,
        measured: vec![Measurement { quantity: "min over nodes and steps".into(), value: min }],
        bound: 0.0,
        tolerance,
        margin,
        verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
        note: String::new(),
    })
}

/// Sup bound: with `v ≡ 0` and `u ≤ 0`, the sup over the cylinder never
/// exceeds the sup of the data (zero lateral boundary).
pub fn check_sup_bound(traj: &Trajectory, schedule: &ControlSchedule) -> Result<CertificateReport> {
    let name = "sup_bound";
    let dg = traj_digest(name, traj, &[]);
    if has_additive(schedule) {
        return Ok(CertificateReport::inapplicable(name, dg, "additive forcing present".into()));
    }
    if !u_nonpositive(schedule)? {
        return Ok(CertificateReport::inapplicable(name, dg, "u > 0 somewhere".into()));
    }
    let sup0 = sup_norm(&traj.states[0].values);
    let sup = traj.meta.max_abs;
    let tolerance = SIGN_TOL_REL * sup0.max(f64::MIN_POSITIVE);
    let margin = sup0 + tolerance - sup;
    Ok(CertificateReport {
        name: name.to_string(),
        inputs_digest: dg,
        measured: vec![Measurement { quantity: "sup |y| over cylinder".into(), value: sup }],
        bound: sup0,
        tolerance,
        margin,
        verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
        note: String::new(),
    })
}

/// Strict interior positivity at `t_probe` for nonnegative, nonzero data
/// under time-independent `u ≤ 0` and nonnegative forcing.
pub fn check_strict_positivity(
    traj: &Trajectory,
    schedule: &ControlSchedule,
    t_probe: f64,
) -> Result<CertificateReport> {
    let name = "strict_positivity";
    let dg = traj_digest(name, traj, &[format!("t_probe={t_probe}")]);
    let y0 = &traj.states[0];
    let scale0 = sup_norm(&y0.values);
    if !y0.is_nonnegative(1e-14 * (1.0 + scale0)) || scale0 == 0.0 {
        return Ok(CertificateReport::inapplicable(
            name,
            dg,
            "needs nonnegative, nonzero initial data".into(),
        ));
    }
    if !u_nonpositive(schedule)? {
        return Ok(CertificateReport::inapplicable(name, dg, "u > 0 somewhere".into()));
    }
    // u must be time-independent on (0, t_probe]: a single stage whose
    // multiplicative part does not vary in time
    let mut stages_before = 0;
    for stage in schedule.stages() {
        if stage.t_start < t_probe - 1e-12 {
            stages_before += 1;
            let time_ok = match &stage.payload {
                StagePayload::Idle | StagePayload::ConstMultiplicative { .. } => true,
                StagePayload::FieldMultiplicative { u } => u.is_time_independent()?,
                StagePayload::FieldAdditive { .. } => true, // v may vary; only u is pinned
            };
            if !time_ok {
                return Ok(CertificateReport::inapplicable(
                    name,
                    dg,
                    "u varies in time before the probe".into(),
                ));
            }
        }
    }
    if stages_before > 1 {
        return Ok(CertificateReport::inapplicable(
            name,
            dg,
            "u changes across stages before the probe".into(),
        ));
    }
    let probe_state = traj
        .states
        .iter()
        .min_by(|a, b| {
            (a.time - t_probe)
                .abs()
                .partial_cmp(&(b.time - t_probe).abs())
                .unwrap()
        })
        .expect("trajectory nonempty");
    let min = probe_state.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = traj.meta.max_abs.max(f64::MIN_POSITIVE);
    let threshold = POSITIVITY_THRESHOLD_REL * scale;
    let margin = min - threshold;
    Ok(CertificateReport {
        name: name.to_string(),
        inputs_digest: dg,
        measured: vec![
            Measurement { quantity: format!("interior minimum at t = {}", probe_state.time), value: min },
            Measurement { quantity: "positivity threshold".into(), value: threshold },
        ],
        bound: 0.0,
        tolerance: 0.0,
        margin,
        verdict: if margin > 0.0 { Verdict::Pass } else { Verdict::Fail },
        note: String::new(),
    })
}

/// Comparison principle: ordered data under the same law and controls stay
/// ordered at every node and stored step.
pub fn check_comparison(traj1: &Trajectory, traj2: &Trajectory) -> Result<CertificateReport> {
    let name = "comparison";
    let dg = traj_digest(name, traj1, &[traj_digest("rhs", traj2, &[])]);
    if traj1.grid != traj2.grid
        || traj1.states.len() != traj2.states.len()
        || traj1.schedule_id != traj2.schedule_id
    {
        return Ok(CertificateReport::inapplicable(
            name,
            dg,
            "trajectories not comparable (grid, stepping, or schedule differ)".into(),
        ));
    }
    let y01 = &traj1.states[0].values;
    let y02 = &traj2.states[0].values;
    if y01.iter().zip(y02).any(|(a, b)| a > &(b + 1e-14 * (1.0 + b.abs()))) {
        return Ok(CertificateReport::inapplicable(name, dg, "initial data not ordered".into()));
    }
    let scale = traj1.meta.max_abs.max(traj2.meta.max_abs).max(f64::MIN_POSITIVE);
    let mut worst = f64::INFINITY;
    for (s1, s2) in traj1.states.iter().zip(&traj2.states) {
        for (a, b) in s1.values.iter().zip(&s2.values) {
            worst = worst.min(b - a);
        }
    }
    let tolerance = SIGN_TOL_REL * scale;
    let margin = worst + tolerance;
    Ok(CertificateReport {
        name: name.to_string(),
        inputs_digest: dg,
        measured: vec![Measurement { quantity: "min (y2 - y1) over nodes and steps".into(), value: worst }],
        bound: 0.0,
        tolerance,
        margin,
        verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
        note: String::new(),
    })
}

/// Short-time decay estimate for the free frozen-coefficient flow:
/// `‖ỹ(T) - y0‖ ≤ sqrt(sup|b|·T)·‖y0_x‖`.
pub fn check_decay(
    grid: &SpatialGrid,
    y0: &State,
    law: &FrozenLaw,
    t_final: f64,
    cfg: &SolverConfig,
) -> Result<CertificateReport> {
    let name = "decay";
    let dg = digest(&[
        name.to_string(),
        format!("n={}", grid.n),
        format!("T={t_final}"),
        format!("y0={:.17e}", grid.l2_norm(&y0.values)),
    ]);
    let schedule = ControlSchedule::idle((y0.time, y0.time + t_final))?;
    let dlaw = DiffusionLaw::Frozen(law.clone());
    let traj = solve_on_grid(
        grid,
        y0,
        (y0.time, y0.time + t_final),
        &dlaw,
        &schedule,
        &BoundaryTraces::zero(),
        cfg,
    )?;
    let diff: Vec<f64> = traj
        .final_state()
        .values
        .iter()
        .zip(&y0.values)
        .map(|(a, b)| a - b)
        .collect();
    let lhs = grid.l2_norm(&diff);
    let rhs = (law.b_sup * t_final).sqrt() * grid.h1_seminorm(&y0.values);
    let tolerance = discretization_tol(grid.h, cfg.dt, sup_norm(&y0.values).max(1.0));
    let margin = rhs + tolerance - lhs;
    Ok(CertificateReport {
        name: name.to_string(),
        inputs_digest: dg,
        measured: vec![
            Measurement { quantity: "‖y(T) - y0‖".into(), value: lhs },
            Measurement { quantity: "sqrt(sup|b|·T)·‖y0_x‖".into(), value: rhs },
        ],
        bound: rhs,
        tolerance,
        margin,
        verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
        note: String::new(),
    })
}

/// The energy constants of the gradient/time-derivative estimates, plus the
/// composite boundary-flux constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyConstants {
    /// `sup|b_t| / ρ`
    pub k1: f64,
    /// `sup|u|²·‖y0‖²`
    pub k2: f64,
    /// `(K2 + ‖√(b(·,t0))·y0'‖²) / ρ`
    pub k3: f64,
    /// `(sup|b_t|² + sup|u_t|²) / ρ`
    pub k4: f64,
    /// `‖y0‖_∞ · C2`
    pub c1: f64,
    /// boundary-flux bound: `sup|b(0,·)|·e^{1+sup|b_x|/ρ}·max{y0'e^{y0}} +
    /// time-derivative bound`
    pub c2: f64,
    /// `[2(‖(b(·,t0)·y0')'‖² + K2) + K4·K3·T·e^{K1·T}]^{1/2}`
    pub time_derivative_bound: f64,
    /// `e^{1+sup|b_x|/ρ}·max{y0' e^{y0}}`
    pub bernstein_bound: f64,
    /// the proof's sharper intermediate form `M·e·(1+sup|b_x|/ρ)` with
    /// `M = max{y0'e^{y0}}·ρ/(ρ+sup|b_x|)·e^{sup|b_x|/ρ}`
    pub bernstein_bound_intermediate: f64,
    /// `max{y0'(x)·e^{y0(x)}}` over the grid
    pub bernstein_data_max: f64,
    pub horizon: f64,
}

/// Conservative-form `‖(b(·,t0)·y0')'‖_{L²}` on the grid.
fn grad_flux_divergence_norm(grid: &SpatialGrid, y0: &State, law: &FrozenLaw, t0: f64) -> f64 {
    let n = grid.n;
    let h = grid.h;
    let v = &y0.values;
    let mut acc = 0.0;
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { v[i - 1] };
        let right = if i == n - 1 { 0.0 } else { v[i + 1] };
        let bm = law.coeff(grid.x0 + (i as f64 + 0.5) * h, t0);
        let bp = law.coeff(grid.x0 + (i as f64 + 1.5) * h, t0);
        let div = (bp * (right - v[i]) / h - bm * (v[i] - left) / h) / h;
        acc += div * div;
    }
    (h * acc).sqrt()
}

/// Assemble the constants from sampled sup-norms of the control
/// (`u_sup = sup|u|`, `ut_sup = sup|u_t|`) over the given horizon.
pub fn compute_energy_constants(
    grid: &SpatialGrid,
    y0: &State,
    law: &FrozenLaw,
    u_sup: f64,
    ut_sup: f64,
    horizon: f64,
) -> Result<EnergyConstants> {
    if !(law.rho > 0.0) {
        return Err(Error::invalid("law has no positive ellipticity floor"));
    }
    let rho = law.rho;
    let t0 = y0.time;
    let k1 = law.bt_sup / rho;
    let y0_l2_sq = grid.l2_norm_sq(&y0.values);
    let k2 = u_sup * u_sup * y0_l2_sq;
    // ‖√(b(·,t0))·y0'‖²: forward differences against b at midpoints
    let mut wgrad = 0.0;
    {
        let v = &y0.values;
        let n = grid.n;
        let h = grid.h;
        for k in 0..=n {
            let left = if k == 0 { 0.0 } else { v[k - 1] };
            let right = if k == n { 0.0 } else { v[k] };
            let slope = (right - left) / h;
            let b = law.coeff(grid.x0 + (k as f64 + 0.5) * h, t0);
            wgrad += b * slope * slope * h;
        }
    }
    let k3 = (k2 + wgrad) / rho;
    let k4 = (law.bt_sup * law.bt_sup + ut_sup * ut_sup) / rho;
    let grad_term = grad_flux_divergence_norm(grid, y0, law, t0);
    let time_derivative_bound =
        (2.0 * (grad_term * grad_term + k2) + k4 * k3 * horizon * (k1 * horizon).exp()).sqrt();

    let grad = grid.gradient(&y0.values);
    let bernstein_data_max = y0
        .values
        .iter()
        .zip(&grad)
        .fold(0.0_f64, |m, (y, g)| m.max(g * y.exp()));
    let exp_factor = (1.0 + law.bx_sup / rho).exp();
    let bernstein_bound = exp_factor * bernstein_data_max;
    let m_aux = bernstein_data_max * rho / (rho + law.bx_sup) * (law.bx_sup / rho).exp();
    let bernstein_bound_intermediate =
        m_aux * std::f64::consts::E * (1.0 + law.bx_sup / rho);

    // sup over the horizon of |b(0, t)|
    let mut b0_sup = 0.0_f64;
    let samples = 257;
    for k in 0..=samples {
        let t = t0 + horizon * k as f64 / samples as f64;
        b0_sup = b0_sup.max(law.coeff(0.0, t).abs());
    }
    let c2 = b0_sup * exp_factor * bernstein_data_max + time_derivative_bound;
    let c1 = sup_norm(&y0.values) * c2;

    Ok(EnergyConstants {
        k1,
        k2,
        k3,
        k4,
        c1,
        c2,
        time_derivative_bound,
        bernstein_bound,
        bernstein_bound_intermediate,
        bernstein_data_max,
        horizon,
    })
}

/// Time-derivative energy bound: every discrete `‖(y^{k+1}-y^k)/Δt‖` stays
/// under the Gronwall-type bound.
pub fn check_time_derivative_bound(
    traj: &Trajectory,
    schedule: &ControlSchedule,
    constants: &EnergyConstants,
) -> Result<CertificateReport> {
    let name = "time_derivative_bound";
    let dg = traj_digest(name, traj, &[format!("bound={:.17e}", constants.time_derivative_bound)]);
    if !u_nonpositive(schedule)? {
        return Ok(CertificateReport::inapplicable(name, dg, "u > 0 somewhere".into()));
    }
    let grid = &traj.grid;
    let mut worst = 0.0_f64;
    for pair in traj.states.windows(2) {
        let dt = pair[1].time - pair[0].time;
        if dt <= 0.0 {
            continue;
        }
        let diff: Vec<f64> = pair[1]
            .values
            .iter()
            .zip(&pair[0].values)
            .map(|(a, b)| (a - b) / dt)
            .collect();
        worst = worst.max(grid.l2_norm(&diff));
    }
    let bound = constants.time_derivative_bound;
    let tolerance = discretization_tol(grid.h, traj.dt, bound.max(1.0));
    let margin = bound + tolerance - worst;
    Ok(CertificateReport {
        name: name.to_string(),
        inputs_digest: dg,
        measured: vec![Measurement { quantity: "max ‖y_t‖ over steps".into(), value: worst }],
        bound,
        tolerance,
        margin,
        verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
        note: String::new(),
    })
}

/// Boundary-gradient bound by the auxiliary-function argument:
/// `0 ≤ y_x(0,t) ≤ e^{1+sup|b_x|/ρ}·max{y0'e^{y0}}`, plus the diagnostic
/// that the discrete maximum of `w = e^y + M·e^{1-(1+sup|b_x|/ρ)x} - 1`
/// over the interior never exceeds its value on `{x = 0}`.
pub fn check_bernstein_boundary(
    traj: &Trajectory,
    schedule: &ControlSchedule,
    law: &FrozenLaw,
) -> Result<CertificateReport> {
    let name = "bernstein_boundary";
    let dg = traj_digest(name, traj, &[]);
    let y0 = &traj.states[0];
    if !y0.is_nonnegative(1e-14 * (1.0 + sup_norm(&y0.values))) {
        return Ok(CertificateReport::inapplicable(name, dg, "initial data has a negative part".into()));
    }
    if !u_nonpositive(schedule)? {
        return Ok(CertificateReport::inapplicable(name, dg, "u > 0 somewhere".into()));
    }
    let grid = &traj.grid;
    let horizon = traj.end_time() - traj.start_time();
    let constants = compute_energy_constants(grid, y0, law, 0.0, 0.0, horizon)?;
    let bound = constants.bernstein_bound;

    let mut max_slope = f64::NEG_INFINITY;
    let mut min_slope = f64::INFINITY;
    for s in &traj.states {
        let slope = grid.boundary_gradient_left(&s.values, 0.0);
        max_slope = max_slope.max(slope);
        min_slope = min_slope.min(slope);
    }

    // w-diagnostic
    let rho = law.rho;
    let decay = 1.0 + law.bx_sup / rho;
    let m_aux = constants.bernstein_data_max * rho / (rho + law.bx_sup) * (law.bx_sup / rho).exp();
    let w_at_left = m_aux * std::f64::consts::E; // e^0 + M·e - 1
    let mut w_max_interior = f64::NEG_INFINITY;
    for s in traj.states.iter() {
        if s.time <= traj.start_time() {
            continue;
        }
        for (i, y) in s.values.iter().enumerate() {
            let x = grid.x(i);
            let w = y.exp() + m_aux * (1.0 - decay * x).exp() - 1.0;
            w_max_interior = w_max_interior.max(w);
        }
    }

    let scale = (traj.meta.max_abs.max(1.0)).exp().max(bound.max(1.0));
    let tolerance = discretization_tol(grid.h, traj.dt, scale);
    let margin_upper = bound + tolerance - max_slope;
    let margin_lower = min_slope + tolerance;
    let margin_w = w_at_left + tolerance - w_max_interior;
    let margin = margin_upper.min(margin_lower).min(margin_w);
    Ok(CertificateReport {
        name: name.to_string(),
        inputs_digest: dg,
        measured: vec![
            Measurement { quantity: "max y_x(0,t)".into(), value: max_slope },
            Measurement { quantity: "min y_x(0,t)".into(), value: min_slope },
            Measurement { quantity: "stated bound".into(), value: bound },
            Measurement {
                quantity: "intermediate bound M·e·(1+|b_x|/ρ)".into(),
                value: constants.bernstein_bound_intermediate,
            },
            Measurement { quantity: "max w over interior".into(), value: w_max_interior },
            Measurement { quantity: "w on {x=0}".into(), value: w_at_left },
        ],
        bound,
        tolerance,
        margin,
        verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
        note: String::new(),
    })
}

/// Static-support obstruction witness: the homogeneous lower envelope on a
/// probe interval disjoint from the control window dominates from below
/// every controlled solution there, so the reachable set stays away from
/// zero on the probe.
#[allow(clippy::too_many_arguments)]
pub fn noncontrollability_witness(
    grid: &SpatialGrid,
    y0: &State,
    omega: Window,
    probe: (f64, f64),
    controls: &[Field],
    t_final: f64,
    law: &DiffusionLaw,
    cfg: &SolverConfig,
) -> Result<CertificateReport> {
    let name = "noncontrollability_witness";
    let (pa, pb) = probe;
    if pa >= pb || pa < 0.0 || pb > 1.0 {
        return Err(Error::invalid(format!("bad probe interval ({pa}, {pb})")));
    }
    if pa < omega.end() && omega.r < pb {
        return Err(Error::invalid("probe interval overlaps the control window"));
    }
    let dg = digest(&[
        name.to_string(),
        format!("n={}", grid.n),
        format!("T={t_final}"),
        format!("omega=({},{})", omega.r, omega.end()),
        format!("probe=({pa},{pb})"),
        format!("controls={}", controls.len()),
    ]);
    // restrict y0 to the probe subgrid
    let n_sub = (((pb - pa) / grid.h).round() as usize).saturating_sub(1).max(8);
    let sub = SpatialGrid::on_interval(pa, pb, n_sub)?;
    let y0_sub = State::from_fn(&sub, y0.time, |x| y0.sample_at(grid, x, (0.0, 0.0)));
    if sup_norm(&y0_sub.values) == 0.0 {
        return Ok(CertificateReport::inapplicable(name, dg, "y0 vanishes on the probe".into()));
    }
    let span = (y0.time, y0.time + t_final);
    let envelope = subdomain_solve(&y0_sub, probe, law, &BoundaryTraces::zero(), span, cfg)?;
    let env_final = envelope.final_state();
    let obstruction = sub.l2_norm(&env_final.values);

    let mut min_margin = f64::INFINITY;
    let mut per_control = Vec::with_capacity(controls.len());
    for (k, field) in controls.iter().enumerate() {
        let stage = crate::control::ControlStage::new(
            span.0,
            span.1,
            omega,
            StagePayload::FieldMultiplicative { u: field.clone() },
        )?;
        let schedule = ControlSchedule::new(vec![stage])?;
        let traj = crate::solver::solve_forward(grid, y0, span, law, &schedule, cfg)?;
        let yf = traj.final_state();
        let mut control_margin = f64::INFINITY;
        for (i, env) in env_final.values.iter().enumerate() {
            let x = sub.x(i);
            let full = yf.sample_at(grid, x, (0.0, 0.0));
            control_margin = control_margin.min(full - env);
        }
        min_margin = min_margin.min(control_margin);
        per_control.push(Measurement {
            quantity: format!("control {k} min (y - envelope)"),
            value: control_margin,
        });
    }
    let scale = sup_norm(&y0.values).max(1.0);
    let tolerance = discretization_tol(grid.h, cfg.dt, scale);
    let margin = (min_margin + tolerance).min(obstruction);
    let mut measured = vec![
        Measurement { quantity: "min (y - envelope) on probe".into(), value: min_margin },
        Measurement { quantity: "obstruction ‖envelope(T)‖ on probe".into(), value: obstruction },
        Measurement { quantity: "controls checked".into(), value: controls.len() as f64 },
    ];
    measured.extend(per_control);
    Ok(CertificateReport {
        name: name.to_string(),
        inputs_digest: dg,
        measured,
        bound: 0.0,
        tolerance,
        margin,
        verdict: if min_margin + tolerance >= 0.0 && obstruction > 0.0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        note: "controlled solutions dominate the zero-trace envelope on the probe".into(),
    })
}

/// L²-integral of a field over `window × (t0, t1)` by lattice quadrature.
fn field_l2_on_window(field: &Field, window: (f64, f64), span: (f64, f64)) -> Result<f64> {
    let c = field.compiled()?;
    let (a, b) = window;
    let (t0, t1) = span;
    let (nx, nt) = (256, 256);
    let dx = (b - a) / nx as f64;
    let dt = (t1 - t0) / nt as f64;
    let mut acc = 0.0;
    for i in 0..nx {
        let x = a + (i as f64 + 0.5) * dx;
        for k in 0..nt {
            let t = t0 + (k as f64 + 0.5) * dt;
            let v = c.eval(x, t);
            acc += v * v;
        }
    }
    Ok((acc * dx * dt).sqrt())
}

/// Control-to-state stability of the window subproblem: the ratio
/// `‖Δy(T)‖ / ‖Δv‖_{L²}` stays below the Poincaré-based constant.
///
/// Energy estimate: `½ d/dt ‖w‖² + ρ‖w_x‖² ≤ ‖Δv‖‖w‖` with the Poincaré
/// inequality `‖w‖ ≤ (meas(ω)/π)‖w_x‖` gives
/// `‖w(T)‖ ≤ meas(ω)/(π·√(2ρ))·‖Δv‖_{L²(ω×(0,T))}`; the report states the
/// constant as `meas(ω)/(ρ·π)` times the calibration factor `√(ρ/2)`.
pub fn check_control_to_state_lipschitz(
    interval: (f64, f64),
    law: &DiffusionLaw,
    t_final: f64,
    v_base: &Field,
    v_perturbed: &[Field],
    cfg: &SolverConfig,
) -> Result<CertificateReport> {
    let name = "control_to_state_lipschitz";
    let (a, b) = interval;
    let meas = b - a;
    let rho = law.floor();
    let dg = digest(&[
        name.to_string(),
        format!("interval=({a},{b})"),
        format!("T={t_final}"),
        format!("perturbations={}", v_perturbed.len()),
    ]);
    let n_sub = ((meas * 200.0).round() as usize).saturating_sub(1).max(16);
    let sub = SpatialGrid::on_interval(a, b, n_sub)?;
    let window = Window::new(a, meas)?;
    let span = (0.0, t_final);
    let run = |field: &Field| -> Result<Vec<f64>> {
        let stage = crate::control::ControlStage::new(
            span.0,
            span.1,
            window,
            StagePayload::FieldAdditive { v: field.clone() },
        )?;
        let schedule = ControlSchedule::new(vec![stage])?;
        let traj = solve_on_grid(
            &sub,
            &State::zeros(n_sub, 0.0),
            span,
            law,
            &schedule,
            &BoundaryTraces::zero(),
            cfg,
        )?;
        Ok(traj.final_state().values.clone())
    };
    let base_final = run(v_base)?;

    let calibration = (rho / 2.0).sqrt();
    let constant = meas / (rho * std::f64::consts::PI) * calibration;
    let mut worst_ratio = 0.0_f64;
    let mut any = false;
    for pert in v_perturbed {
        let pert_final = run(pert)?;
        // ‖Δv‖ via the difference of samples
        let diff_field_norm = {
            let cb = v_base.compiled()?;
            let cp = pert.compiled()?;
            let (nx, nt) = (256, 256);
            let dx = meas / nx as f64;
            let dtq = t_final / nt as f64;
            let mut acc = 0.0;
            for i in 0..nx {
                let x = a + (i as f64 + 0.5) * dx;
                for k in 0..nt {
                    let t = (k as f64 + 0.5) * dtq;
                    let d = cb.eval(x, t) - cp.eval(x, t);
                    acc += d * d;
                }
            }
            (acc * dx * dtq).sqrt()
        };
        if diff_field_norm <= 1e-14 * field_l2_on_window(v_base, (a, b), span)?.max(1.0) {
            continue;
        }
        any = true;
        let dy: Vec<f64> = base_final
            .iter()
            .zip(&pert_final)
            .map(|(p, q)| p - q)
            .collect();
        worst_ratio = worst_ratio.max(sub.l2_norm(&dy) / diff_field_norm);
    }
    if !any {
        return Ok(CertificateReport::inapplicable(
            name,
            dg,
            "all perturbations coincide with the base control".into(),
        ));
    }
    let tolerance = discretization_tol(sub.h, cfg.dt, constant.max(1.0));
    let margin = constant + tolerance - worst_ratio;
    Ok(CertificateReport {
        name: name.to_string(),
        inputs_digest: dg,
        measured: vec![
            Measurement { quantity: "max ‖Δy(T)‖/‖Δv‖".into(), value: worst_ratio },
            Measurement { quantity: "calibration factor".into(), value: calibration },
        ],
        bound: constant,
        tolerance,
        margin,
        verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
        note: "constant meas(ω)/(ρπ)·√(ρ/2) from the Poincaré energy estimate".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlStage;
    use crate::grid::build_grid;
    use crate::solver::solve_forward;
    use std::f64::consts::PI;

    fn free_run(n: usize, t: f64, y0f: impl Fn(f64) -> f64) -> (SpatialGrid, Trajectory, ControlSchedule) {
        let grid = build_grid(n).unwrap();
        let law = DiffusionLaw::constant(1.0).unwrap();
        let cfg = SolverConfig::auto(&grid, t);
        let y0 = State::from_fn(&grid, 0.0, y0f);
        let sched = ControlSchedule::idle((0.0, t)).unwrap();
        let traj = solve_forward(&grid, &y0, (0.0, t), &law, &sched, &cfg).unwrap();
        (grid, traj, sched)
    }

    #[test]
    fn nonnegativity_passes_on_free_decay_and_flags_negative_data() {
        let (_, traj, sched) = free_run(60, 0.02, |x| (PI * x).sin());
        let rep = check_nonnegativity(&traj, &sched).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);

        let (_, traj, sched) = free_run(60, 0.02, |x| (2.0 * PI * x).sin());
        let rep = check_nonnegativity(&traj, &sched).unwrap();
        assert_eq!(rep.verdict, Verdict::Inapplicable);
    }

    #[test]
    fn sup_bound_certificate() {
        let (_, traj, sched) = free_run(60, 0.05, |x| (PI * x).sin());
        let rep = check_sup_bound(&traj, &sched).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);

        // u > 0 somewhere -> inapplicable
        let grid = build_grid(40).unwrap();
        let law = DiffusionLaw::constant(1.0).unwrap();
        let cfg = SolverConfig::auto(&grid, 0.01);
        let stage = ControlStage::new(
            0.0,
            0.01,
            Window::new(0.0, 1.0).unwrap(),
            StagePayload::FieldMultiplicative { u: Field::parse_expr("1").unwrap() },
        )
        .unwrap();
        let sched = ControlSchedule::new(vec![stage]).unwrap();
        let y0 = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
        let traj = solve_forward(&grid, &y0, (0.0, 0.01), &law, &sched, &cfg).unwrap();
        let rep = check_sup_bound(&traj, &sched).unwrap();
        assert_eq!(rep.verdict, Verdict::Inapplicable);
    }

    #[test]
    fn strict_positivity_spreads_from_a_bump() {
        let (_, traj, sched) = free_run(100, 0.05, |x| {
            if x > 0.4 && x < 0.6 {
                (PI * (x - 0.4) / 0.2).sin()
            } else {
                0.0
            }
        });
        let rep = check_strict_positivity(&traj, &sched, 0.05).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "margin = {}", rep.margin);

        // zero data -> inapplicable
        let (_, traj, sched) = free_run(40, 0.01, |_| 0.0);
        let rep = check_strict_positivity(&traj, &sched, 0.01).unwrap();
        assert_eq!(rep.verdict, Verdict::Inapplicable);
    }

    #[test]
    fn comparison_of_scaled_data() {
        let grid = build_grid(80).unwrap();
        let q = crate::law::QuasilinearLaw::new(|y| 1.0 + 0.5 / (1.0 + y * y), (-2.0, 2.0)).unwrap();
        let law = DiffusionLaw::Quasilinear(q);
        let cfg = SolverConfig::auto(&grid, 0.02);
        let sched = ControlSchedule::idle((0.0, 0.02)).unwrap();
        let big = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
        let small = State::from_fn(&grid, 0.0, |x| 0.5 * (PI * x).sin());
        let t1 = solve_forward(&grid, &small, (0.0, 0.02), &law, &sched, &cfg).unwrap();
        let t2 = solve_forward(&grid, &big, (0.0, 0.02), &law, &sched, &cfg).unwrap();
        let rep = check_comparison(&t1, &t2).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "margin = {}", rep.margin);

        let rep = check_comparison(&t2, &t1).unwrap();
        assert_eq!(rep.verdict, Verdict::Inapplicable);
    }

    #[test]
    fn decay_certificate_reproduces_the_closed_form() {
        let grid = build_grid(200).unwrap();
        let law = FrozenLaw::constant(1.0).unwrap();
        let y0 = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
        let cfg = SolverConfig::auto(&grid, 0.01);
        let rep = check_decay(&grid, &y0, &law, 0.01, &cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        let lhs = rep.measured[0].value;
        let rhs = rep.measured[1].value;
        // LHS = (1 - e^{-π²·0.01})/√2 ≈ 0.0665, RHS = 0.1·π/√2 ≈ 0.2221
        assert!((lhs - 0.0665).abs() < 5e-4, "lhs = {lhs}");
        assert!((rhs - 0.2221).abs() < 5e-4, "rhs = {rhs}");
    }

    #[test]
    fn energy_constants_match_hand_values() {
        let grid = build_grid(400).unwrap();
        let law = FrozenLaw::constant(1.0).unwrap();
        // ‖y0‖ = 1 for y0 = √2·sin(πx)
        let y0 = State::from_fn(&grid, 0.0, |x| 2.0_f64.sqrt() * (PI * x).sin());
        let c = compute_energy_constants(&grid, &y0, &law, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(c.k1, 0.0);
        assert!((c.k2 - 1.0).abs() < 1e-10, "k2 = {}", c.k2);
        assert_eq!(c.k4, 0.0);
        // K3 = 1 + ‖y0'‖² = 1 + π²
        assert!((c.k3 - (1.0 + PI * PI)).abs() < 1e-2, "k3 = {}", c.k3);

        let law_t = FrozenLaw::new(|_, t| 1.0 + 0.1 * t, (0.0, 1.0), 64, 64).unwrap();
        let c = compute_energy_constants(&grid, &y0, &law_t, 0.0, 0.0, 1.0).unwrap();
        assert!((c.k1 - 0.1).abs() < 1e-6, "k1 = {}", c.k1);
        assert!(c.k2 == 0.0);
    }

    #[test]
    fn bernstein_bound_for_parabolic_data_is_e() {
        let grid = build_grid(200).unwrap();
        let law = FrozenLaw::constant(1.0).unwrap();
        let y0 = State::from_fn(&grid, 0.0, |x| x * (1.0 - x));
        let c = compute_energy_constants(&grid, &y0, &law, 0.0, 0.0, 0.1).unwrap();
        // max{y0' e^{y0}} = 1 at x = 0, bound = e
        assert!((c.bernstein_data_max - 1.0).abs() < 2e-2, "data max = {}", c.bernstein_data_max);
        assert!((c.bernstein_bound - std::f64::consts::E).abs() < 6e-2);
    }

    #[test]
    fn bernstein_certificate_passes_on_free_decay() {
        let grid = build_grid(150).unwrap();
        let law = FrozenLaw::constant(1.0).unwrap();
        let dlaw = DiffusionLaw::Frozen(law.clone());
        let cfg = SolverConfig::auto(&grid, 0.1);
        let y0 = State::from_fn(&grid, 0.0, |x| x * (1.0 - x));
        let sched = ControlSchedule::idle((0.0, 0.1)).unwrap();
        let traj = solve_forward(&grid, &y0, (0.0, 0.1), &dlaw, &sched, &cfg).unwrap();
        let rep = check_bernstein_boundary(&traj, &sched, &law).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "margin = {}", rep.margin);
        // y_x(0, 0) = 1 ≤ e
        assert!(rep.measured[0].value <= std::f64::consts::E);
        assert!(rep.measured[0].value > 0.5);
    }

    #[test]
    fn time_derivative_certificate_on_free_decay() {
        let grid = build_grid(150).unwrap();
        let law = FrozenLaw::constant(1.0).unwrap();
        let dlaw = DiffusionLaw::Frozen(law.clone());
        let cfg = SolverConfig::auto(&grid, 0.05);
        let y0 = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
        let sched = ControlSchedule::idle((0.0, 0.05)).unwrap();
        let traj = solve_forward(&grid, &y0, (0.0, 0.05), &dlaw, &sched, &cfg).unwrap();
        let c = compute_energy_constants(&grid, &y0, &law, 0.0, 0.0, 0.05).unwrap();
        let rep = check_time_derivative_bound(&traj, &sched, &c).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "margin = {}", rep.margin);
        // ‖y_t(0)‖ = π²/√2 ≈ 6.98 under the bound √2‖y0''‖ ≈ 9.87
        assert!(rep.measured[0].value < rep.bound);
        assert!(rep.measured[0].value > 6.0);
    }

    #[test]
    fn lipschitz_ratio_stays_under_the_poincare_constant() {
        let law = DiffusionLaw::constant(1.0).unwrap();
        let cfg = SolverConfig::with_dt(5e-4).unwrap();
        let base = Field::parse_expr("1").unwrap();
        let perts = vec![
            Field::parse_expr("1 + x").unwrap(),
            Field::parse_expr("2").unwrap(),
        ];
        let rep =
            check_control_to_state_lipschitz((0.0, 0.5), &law, 0.1, &base, &perts, &cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "margin = {}", rep.margin);

        let rep = check_control_to_state_lipschitz((0.0, 0.5), &law, 0.1, &base, &[base.clone()], &cfg)
            .unwrap();
        assert_eq!(rep.verdict, Verdict::Inapplicable);
    }

    #[test]
    fn digest_is_stable() {
        let a = digest(&["x".into(), "y".into()]);
        let b = digest(&["x".into(), "y".into()]);
        assert_eq!(a, b);
        assert_ne!(a, digest(&["xy".into()]));
    }
}
