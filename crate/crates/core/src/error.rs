//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by solvers, schedules, and synthesis operations.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Newton (and, if enabled, the Picard fallback) failed to reach the
    /// residual tolerance within the iteration caps.
    #[error("nonlinear solve did not converge at t = {time}: residual {residual:.3e}")]
    Nonconvergence { time: f64, residual: f64 },

    /// Expression parse failure (position is a byte offset into the source).
    #[error("expression parse error at byte {position}: {message} in `{source_text}`")]
    ExprParse {
        position: usize,
        message: String,
        source_text: String,
    },

    /// No mollification margin meets the decomposition error budget.
    #[error(
        "infeasible decomposition: piece {piece} has mollification error {error:.3e} > budget {budget:.3e}"
    )]
    InfeasibleDecomposition { piece: usize, error: f64, budget: f64 },

    /// The damping ladder was exhausted without meeting the stage thresholds.
    /// `partial_stages` lists the stages already certified as
    /// `(index, m, stage end time)`.
    #[error(
        "sweep stage {stage} infeasible: best window norm\u{b2} {best_window_norm_sq:.3e} > threshold {threshold:.3e}"
    )]
    StageInfeasible {
        stage: usize,
        best_window_norm_sq: f64,
        threshold: f64,
        partial_stages: Vec<(usize, f64, f64)>,
    },

    /// Nonnegative steering missed its error budget at the iteration cap.
    #[error("control infeasible for piece {piece}: residual {residual:.3e} > budget {budget:.3e}")]
    ControlInfeasible { piece: usize, residual: f64, budget: f64 },

    /// The state dips below the lifting floor on a region carrying
    /// a non-negligible share of the additive control mass.
    #[error(
        "lifting infeasible: state below floor {floor:.3e} on x in [{region_lo:.4}, {region_hi:.4}] carrying {omitted_fraction:.2e} of the control mass"
    )]
    LiftingInfeasible {
        floor: f64,
        region_lo: f64,
        region_hi: f64,
        omitted_fraction: f64,
    },

    /// A synthesized run could not certify its terminal guarantee.
    #[error("pipeline defect: terminal error {achieved:.3e} >= epsilon {epsilon:.3e}")]
    PipelineDefect { achieved: f64, epsilon: f64 },

    /// A Picard iterate left the sup-norm ball of radius R.
    #[error("iterate sup-norm {sup:.3e} exceeds ball radius {radius:.3e}")]
    BallViolation { sup: f64, radius: f64 },

    /// Picard iteration exhausted its budget; carries the iterate distances.
    #[error("picard iteration did not converge in {max_iters} iterations (last distance {last:.3e})")]
    PicardNonconvergence {
        max_iters: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
