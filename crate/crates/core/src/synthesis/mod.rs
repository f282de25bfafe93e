//! Constructive control synthesis.
//!
//! The steering machinery, bottom to top:
//!
//! - [`sweep`]: drive the L² norm below ε/2 by damping `u = -m_j` on a
//!   window sweeping left to right, with certified per-stage window norms,
//!   the stage-gap rule, and the cumulative inequality chain;
//! - [`target`]: split a nonnegative target into window-supported pieces
//!   and mollify each piece away from the window edges;
//! - [`nnls`]: steer a window subproblem from rest to a piece with a
//!   nonnegative space-time control found by projected-gradient NNLS;
//! - [`additive`]: schedule the per-window controls on the shrinking
//!   δ-ladder and measure the achieved per-piece errors on the full domain;
//! - [`lift`]: convert the additive run into a multiplicative control via
//!   `u = v/y` with a floor and a cap, re-simulating to measure the defect;
//! - [`pipeline`]: the two-phase construction (sweep, then lifted additive
//!   correction toward `y_d + ŷ₁(·,T)`), certified end to end;
//! - [`picard`]: the quasilinear fixed point — freeze `b = a(z)`, run the
//!   pipeline, resolve the true quasilinear dynamics, repeat.

pub mod additive;
pub mod lift;
pub mod nnls;
pub mod picard;
pub mod pipeline;
pub mod sweep;
pub mod target;

pub use additive::{additive_sequence, AdditivePlan};
pub use lift::{additive_to_multiplicative, LiftOutcome};
pub use nnls::{nonneg_additive_control, AdditiveControlOutcome, WindowBasis};
pub use picard::{picard_quasilinear, PicardConfig, PicardOutcome};
pub use pipeline::{synthesize_pipeline, PipelineOutcome, PipelineReport};
pub use sweep::{run_sweep, sweep_stage, SweepPlan, SweepStageRecord};
pub use target::{decompose_target, TargetDecomposition};

/// Tuning knobs for the synthesis operations. Defaults implement the
/// documented construction; every search below is deterministic in these.
#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    /// Damping ladder `m ∈ {1, 2, 4, …, 2^m_ladder_max_exp}`.
    pub m_ladder_max_exp: u32,
    /// δ_j = δ_{j-1} / delta_ratio, strictly inside the open constraint
    /// δ_j < δ_{j-1}/2.
    pub delta_ratio: f64,
    /// Projected-gradient iteration cap for the NNLS solves.
    pub nnls_max_iters: usize,
    /// Spatial hat functions per window basis.
    pub basis_nx: usize,
    /// Time slabs per window basis.
    pub basis_nt: usize,
    /// Full-domain defect-correction passes on top of the subproblem NNLS.
    pub correction_passes: usize,
    /// Share of ε/2 the additive phase may spend; the rest absorbs the
    /// lifting defect.
    pub phase2_budget_factor: f64,
    /// Lifting floor as a fraction of `max y0`.
    pub lift_floor_rel: f64,
    /// Cap on the lifted multiplicative control.
    pub lift_u_max: f64,
    /// Mollification margin in whole cells at each window edge.
    pub margin_cells: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            m_ladder_max_exp: 20,
            delta_ratio: 2.5,
            nnls_max_iters: 2000,
            basis_nx: 28,
            basis_nt: 10,
            correction_passes: 6,
            phase2_budget_factor: 0.7,
            lift_floor_rel: 1e-6,
            lift_u_max: 1e6,
            margin_cells: 2,
        }
    }
}
