//! Mobile-support controls: windows, stages, and schedules.
//!
//! A window is the open interval `(r, r + l)`; the position `r` is
//! piecewise constant in time (one value per stage). Stage payloads are
//! either idle, a constant damping `u = -m`, a multiplicative field, or a
//! nonnegative additive field. A node exactly on a window edge is outside
//! the window, and stage boundaries evaluate right-continuously.

use crate::error::{Error, Result};
use crate::field::{CompiledField, Field};
use crate::grid::SpatialGrid;
use serde::{Deserialize, Serialize};

const EDGE_TOL: f64 = 1e-12;

/// Open control window `(r, r + l)` with `0 ≤ r ≤ 1 - l` and `l ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub r: f64,
    pub l: f64,
}

impl Window {
    pub fn new(r: f64, l: f64) -> Result<Self> {
        if !(l > 0.0 && l <= 1.0 + EDGE_TOL) {
            return Err(Error::invalid(format!("window length {l} outside (0, 1]")));
        }
        if !(r >= -EDGE_TOL && r + l <= 1.0 + EDGE_TOL) {
            return Err(Error::invalid(format!("window ({r}, {}) leaves (0, 1)", r + l)));
        }
        Ok(Window { r, l })
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.r + self.l
    }

    /// Strict membership test: open interval.
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x > self.r && x < self.end()
    }
}

/// What a stage applies inside its window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "payload", rename_all = "snake_case")]
pub enum StagePayload {
    Idle,
    /// Constant damping, applied as `u = -m` with `m ≥ 0`.
    ConstMultiplicative { m: f64 },
    FieldMultiplicative { u: Field },
    FieldAdditive { v: Field },
}

/// One stage: a time interval, a fixed window, and a payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlStage {
    pub t_start: f64,
    pub t_end: f64,
    pub window: Window,
    pub payload: StagePayload,
}

impl ControlStage {
    pub fn new(t_start: f64, t_end: f64, window: Window, payload: StagePayload) -> Result<Self> {
        if !(t_end > t_start) {
            return Err(Error::invalid(format!("stage needs t_start < t_end, got [{t_start}, {t_end}]")));
        }
        if let StagePayload::ConstMultiplicative { m } = payload {
            if !(m >= 0.0) {
                return Err(Error::invalid(format!("damping constant m = {m} must be >= 0")));
            }
        }
        if let StagePayload::FieldAdditive { ref v } = payload {
            let min = v.sampled_min((window.r, window.end()), (t_start, t_end))?;
            if min < -1e-12 {
                return Err(Error::invalid(format!(
                    "additive payload dips to {min:.3e} < 0 on its window"
                )));
            }
        }
        Ok(ControlStage { t_start, t_end, window, payload })
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Sampled sup of |u| for stiffness-driven step refinement.
    pub fn u_max_abs(&self) -> Result<f64> {
        match &self.payload {
            StagePayload::Idle | StagePayload::FieldAdditive { .. } => Ok(0.0),
            StagePayload::ConstMultiplicative { m } => Ok(*m),
            StagePayload::FieldMultiplicative { u } => {
                u.sampled_max_abs((self.window.r, self.window.end()), (self.t_start, self.t_end))
            }
        }
    }
}

/// Evaluated control at one time level: nodewise multiplicative `u_i` and
/// additive `v_i` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSlice {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl ControlSlice {
    pub fn zeros(n: usize) -> Self {
        ControlSlice { u: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// Compiled view of a stage, for tight stepping loops.
pub struct CompiledStage<'a> {
    pub stage: &'a ControlStage,
    field: Option<CompiledField>,
}

impl<'a> CompiledStage<'a> {
    pub fn new(stage: &'a ControlStage) -> Result<Self> {
        let field = match &stage.payload {
            StagePayload::FieldMultiplicative { u } => Some(u.compiled()?),
            StagePayload::FieldAdditive { v } => Some(v.compiled()?),
            _ => None,
        };
        Ok(CompiledStage { stage, field })
    }

    /// Fill `(u, v)` for the grid at time `t` (within this stage).
    pub fn eval_into(&self, grid: &SpatialGrid, t: f64, slice: &mut ControlSlice) {
        slice.u.iter_mut().for_each(|u| *u = 0.0);
        slice.v.iter_mut().for_each(|v| *v = 0.0);
        let w = self.stage.window;
        match &self.stage.payload {
            StagePayload::Idle => {}
            StagePayload::ConstMultiplicative { m } => {
                for i in 0..grid.n {
                    if w.contains(grid.x(i)) {
                        slice.u[i] = -m;
                    }
                }
            }
            StagePayload::FieldMultiplicative { .. } => {
                let f = self.field.as_ref().expect("compiled field");
                for i in 0..grid.n {
                    let x = grid.x(i);
                    if w.contains(x) {
                        slice.u[i] = f.eval(x, t);
                    }
                }
            }
            StagePayload::FieldAdditive { .. } => {
                let f = self.field.as_ref().expect("compiled field");
                for i in 0..grid.n {
                    let x = grid.x(i);
                    if w.contains(x) {
                        slice.v[i] = f.eval(x, t);
                    }
                }
            }
        }
    }
}

/// Time-ordered, contiguous, non-overlapping stages covering a span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    stages: Vec<ControlStage>,
}

impl ControlSchedule {
    pub fn new(stages: Vec<ControlStage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::invalid("schedule needs at least one stage"));
        }
        for pair in stages.windows(2) {
            let gap = pair[1].t_start - pair[0].t_end;
            if gap.abs() > EDGE_TOL * pair[1].t_end.abs().max(1.0) {
                return Err(Error::invalid(format!(
                    "stages must be contiguous: [{}, {}] then [{}, {}]",
                    pair[0].t_start, pair[0].t_end, pair[1].t_start, pair[1].t_end
                )));
            }
        }
        Ok(ControlSchedule { stages })
    }

    /// Single idle stage over `span`.
    pub fn idle(span: (f64, f64)) -> Result<Self> {
        let window = Window::new(0.0, 1.0)?;
        ControlSchedule::new(vec![ControlStage::new(span.0, span.1, window, StagePayload::Idle)?])
    }

    pub fn stages(&self) -> &[ControlStage] {
        &self.stages
    }

    pub fn span(&self) -> (f64, f64) {
        (self.stages[0].t_start, self.stages.last().unwrap().t_end)
    }

    /// Stage active at `t`: right-continuous at interior boundaries, and
    /// the final stage owns the endpoint `t = span end`.
    pub fn stage_at(&self, t: f64) -> Result<&ControlStage> {
        let (t0, t1) = self.span();
        let tol = EDGE_TOL * t1.abs().max(1.0);
        if t < t0 - tol || t > t1 + tol {
            return Err(Error::invalid(format!("t = {t} outside schedule span [{t0}, {t1}]")));
        }
        let k = self.stages.partition_point(|s| s.t_end <= t);
        Ok(&self.stages[k.min(self.stages.len() - 1)])
    }

    /// Sup of |u| over all stages (constants and table samples; expression
    /// payloads are densely sampled).
    pub fn u_sup(&self) -> Result<f64> {
        let mut m = 0.0_f64;
        for s in &self.stages {
            m = m.max(s.u_max_abs()?);
        }
        Ok(m)
    }

    /// True if every stage is idle.
    pub fn is_idle(&self) -> bool {
        self.stages.iter().all(|s| matches!(s.payload, StagePayload::Idle))
    }

    /// Serialize to the schedule document format.
    pub fn to_document(&self) -> Result<String> {
        let doc = ScheduleDocument { schema_version: SCHEMA_VERSION, stages: self.stages.clone() };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_document(text: &str) -> Result<Self> {
        let doc: ScheduleDocument =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported schedule schema version {}",
                doc.schema_version
            )));
        }
        ControlSchedule::new(doc.stages)
    }
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ScheduleDocument {
    schema_version: u32,
    stages: Vec<ControlStage>,
}

/// Evaluate the schedule at time `t` on the grid.
pub fn evaluate_control(
    schedule: &ControlSchedule,
    grid: &SpatialGrid,
    t: f64,
) -> Result<ControlSlice> {
    let stage = schedule.stage_at(t)?;
    let compiled = CompiledStage::new(stage)?;
    let mut slice = ControlSlice::zeros(grid.n);
    compiled.eval_into(grid, t, &mut slice);
    Ok(slice)
}

/// Concatenate two schedules; the first must end where the second begins.
pub fn compose_schedules(
    first: &ControlSchedule,
    second: &ControlSchedule,
) -> Result<ControlSchedule> {
    let (_, end) = first.span();
    let (start, _) = second.span();
    if (end - start).abs() > EDGE_TOL * end.abs().max(1.0) {
        return Err(Error::invalid(format!(
            "cannot compose: first ends at {end}, second starts at {start}"
        )));
    }
    let mut stages = first.stages.clone();
    stages.extend(second.stages.iter().cloned());
    ControlSchedule::new(stages)
}

/// The sweep's window sequence: origins `0, l, 2l, …` with the last window
/// snapped to `(1 - l, 1)` so the union covers `(0, 1)`.
///
/// `M` must be the smallest integer with `M·l ≥ 1`.
pub fn sweep_window_sequence(l: f64, m_windows: usize) -> Result<Vec<Window>> {
    if !(l > 0.0 && l <= 1.0 + EDGE_TOL) {
        return Err(Error::invalid(format!("window length {l} outside (0, 1]")));
    }
    let mf = m_windows as f64;
    if m_windows == 0 || mf * l < 1.0 - EDGE_TOL {
        return Err(Error::invalid(format!("M·l = {} < 1: windows cannot cover (0,1)", mf * l)));
    }
    if (mf - 1.0) * l >= 1.0 - EDGE_TOL && m_windows > 1 {
        return Err(Error::invalid(format!(
            "M = {m_windows} is not minimal for l = {l}"
        )));
    }
    let mut windows = Vec::with_capacity(m_windows);
    for j in 1..=m_windows {
        let origin = if j < m_windows { (j - 1) as f64 * l } else { 1.0 - l };
        windows.push(Window::new(origin.max(0.0), l)?);
    }
    Ok(windows)
}

/// Smallest `M` with `M·l ≥ 1`.
pub fn window_count(l: f64) -> Result<usize> {
    if !(l > 0.0 && l <= 1.0 + EDGE_TOL) {
        return Err(Error::invalid(format!("window length {l} outside (0, 1]")));
    }
    let m = ((1.0 - EDGE_TOL) / l).ceil() as usize;
    Ok(m.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldTable;
    use crate::grid::build_grid;

    fn const_stage(t0: f64, t1: f64, r: f64, l: f64, m: f64) -> ControlStage {
        ControlStage::new(t0, t1, Window::new(r, l).unwrap(), StagePayload::ConstMultiplicative { m })
            .unwrap()
    }

    #[test]
    fn window_edges_are_excluded() {
        let g = build_grid(3).unwrap();
        let sched = ControlSchedule::new(vec![const_stage(0.0, 1.0, 0.0, 0.5, 5.0)]).unwrap();
        let slice = evaluate_control(&sched, &g, 0.3).unwrap();
        // nodes (0.25, 0.5, 0.75): the node at 0.5 sits on the open edge
        assert_eq!(slice.u, vec![-5.0, 0.0, 0.0]);
        assert_eq!(slice.v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn additive_field_on_half_domain() {
        let g = build_grid(3).unwrap();
        let stage = ControlStage::new(
            0.0,
            1.0,
            Window::new(0.5, 0.5).unwrap(),
            StagePayload::FieldAdditive { v: Field::parse_expr("x").unwrap() },
        )
        .unwrap();
        let sched = ControlSchedule::new(vec![stage]).unwrap();
        let slice = evaluate_control(&sched, &g, 0.0).unwrap();
        assert_eq!(slice.v, vec![0.0, 0.0, 0.75]);
        assert_eq!(slice.u, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn idle_stage_evaluates_to_zeros() {
        let g = build_grid(5).unwrap();
        let sched = ControlSchedule::idle((0.0, 1.0)).unwrap();
        let slice = evaluate_control(&sched, &g, 0.5).unwrap();
        assert!(slice.u.iter().all(|&u| u == 0.0) && slice.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_additive_payload_is_refused() {
        let r = ControlStage::new(
            0.0,
            1.0,
            Window::new(0.0, 1.0).unwrap(),
            StagePayload::FieldAdditive { v: Field::parse_expr("x - 0.5").unwrap() },
        );
        assert!(r.is_err());
    }

    #[test]
    fn stage_boundaries_are_right_continuous() {
        let sched = ControlSchedule::new(vec![
            const_stage(0.0, 0.5, 0.0, 0.5, 1.0),
            const_stage(0.5, 1.0, 0.5, 0.5, 2.0),
        ])
        .unwrap();
        let s = sched.stage_at(0.5).unwrap();
        assert_eq!(s.t_start, 0.5);
        // final endpoint belongs to the last stage
        let s = sched.stage_at(1.0).unwrap();
        assert_eq!(s.t_end, 1.0);
        assert!(sched.stage_at(1.5).is_err());
    }

    #[test]
    fn compose_checks_contiguity() {
        let a = ControlSchedule::new(vec![const_stage(0.0, 0.4, 0.0, 0.5, 1.0)]).unwrap();
        let b = ControlSchedule::new(vec![const_stage(0.4, 1.0, 0.5, 0.5, 2.0)]).unwrap();
        let c = compose_schedules(&a, &b).unwrap();
        assert_eq!(c.stages().len(), 2);
        assert_eq!(c.span(), (0.0, 1.0));
        let overlapping = ControlSchedule::new(vec![const_stage(0.3, 1.0, 0.5, 0.5, 2.0)]).unwrap();
        assert!(compose_schedules(&a, &overlapping).is_err());
    }

    #[test]
    fn sweep_windows_match_the_construction() {
        let w = sweep_window_sequence(0.5, 2).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!((w[0].r, w[0].end()), (0.0, 0.5));
        assert_eq!((w[1].r, w[1].end()), (0.5, 1.0));

        assert_eq!(window_count(0.3).unwrap(), 4);
        let w = sweep_window_sequence(0.3, 4).unwrap();
        let origins: Vec<f64> = w.iter().map(|w| w.r).collect();
        assert_eq!(origins, vec![0.0, 0.3, 0.6, 0.7]);

        let w = sweep_window_sequence(1.0, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].r, w[0].end()), (0.0, 1.0));

        assert!(sweep_window_sequence(0.3, 3).is_err()); // M·l < 1
        assert!(sweep_window_sequence(0.3, 5).is_err()); // M not minimal
    }

    #[test]
    fn origins_nondecreasing_and_cover() {
        for &l in &[0.13, 0.25, 0.4, 0.61, 0.99] {
            let m = window_count(l).unwrap();
            let w = sweep_window_sequence(l, m).unwrap();
            assert!(w.windows(2).all(|p| p[0].r <= p[1].r));
            // union covers (0,1) except window edges
            let mut covered = 0.0_f64;
            for k in 0..1000 {
                let x = (k as f64 + 0.5) / 1000.0;
                if w.iter().any(|w| w.contains(x)) {
                    covered += 1e-3;
                }
            }
            assert!(covered > 0.99);
        }
    }

    #[test]
    fn schedule_document_round_trip() {
        let table = FieldTable::new(
            vec![0.0, 0.5, 1.0],
            vec![0.25, 0.5, 0.75],
            (0.0, 1.0),
            vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]],
        )
        .unwrap();
        let sched = ControlSchedule::new(vec![
            const_stage(0.0, 0.5, 0.0, 0.5, 3.5),
            ControlStage::new(
                0.5,
                1.0,
                Window::new(0.25, 0.5).unwrap(),
                StagePayload::FieldAdditive { v: Field::table(table) },
            )
            .unwrap(),
        ])
        .unwrap();
        let doc = sched.to_document().unwrap();
        let back = ControlSchedule::from_document(&doc).unwrap();
        assert_eq!(sched, back);
        // constants and table samples round-trip bit-exactly
        let g = build_grid(3).unwrap();
        let a = evaluate_control(&sched, &g, 0.75).unwrap();
        let b = evaluate_control(&back, &g, 0.75).unwrap();
        for i in 0..3 {
            assert_eq!(a.v[i].to_bits(), b.v[i].to_bits());
        }
    }
}
