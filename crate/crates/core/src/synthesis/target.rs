//! Target decomposition: split a nonnegative target into pieces supported
//! on the consecutive length-`l` intervals and mollify each piece so its
//! support keeps a margin of whole cells away from the interval edges.

use super::SynthesisConfig;
use crate::control::window_count;
use crate::error::{Error, Result};
use crate::grid::{sup_norm, SpatialGrid};
use crate::state::State;

/// A decomposed target: `pieces` restrict the target to disjoint intervals
/// (summing to the target at every node), `mollified` are the cut-off
/// versions steered by the additive stage.
#[derive(Debug, Clone)]
pub struct TargetDecomposition {
    pub y_d: State,
    pub l: f64,
    pub m_pieces: usize,
    /// Disjoint support intervals: `((j-1)l, jl)` and `((M-1)l, 1)` last.
    pub intervals: Vec<(f64, f64)>,
    pub pieces: Vec<State>,
    pub mollified: Vec<State>,
    pub margin_cells: usize,
    /// `Σ_j ‖ŷ_{d_j} - y_{d_j}‖`.
    pub decomposition_error: f64,
}

/// Cosine ramp: 0 for `s ≤ 1`, 1 for `s ≥ 2`, smooth in between. With
/// `s = distance/margin` the cutoff vanishes identically on the margin.
fn ramp(s: f64) -> f64 {
    if s <= 1.0 {
        0.0
    } else if s >= 2.0 {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * (s - 1.0)).cos())
    }
}

/// Decompose a nonnegative target into `M = ⌈1/l⌉` window pieces with a
/// mollification margin of `margin_cells` whole cells.
pub fn decompose_target(
    grid: &SpatialGrid,
    y_d: &State,
    l: f64,
    eps: f64,
    scfg: &SynthesisConfig,
) -> Result<TargetDecomposition> {
    if !(eps > 0.0) {
        return Err(Error::invalid("decomposition needs eps > 0"));
    }
    if !y_d.is_nonnegative(1e-14 * (1.0 + sup_norm(&y_d.values))) {
        return Err(Error::invalid("target must be nonnegative"));
    }
    if y_d.n() != grid.n {
        return Err(Error::invalid("target length must match the grid"));
    }
    let m_pieces = window_count(l)?;
    let mut intervals = Vec::with_capacity(m_pieces);
    for j in 1..=m_pieces {
        let a = (j - 1) as f64 * l;
        let b = if j == m_pieces { 1.0 } else { (j as f64 * l).min(1.0) };
        intervals.push((a, b));
    }

    // restriction pieces: each node goes to exactly one piece (half-open
    // cells [(j-1)l, jl) so the pieces sum to the target at every node)
    let mut pieces = vec![vec![0.0; grid.n]; m_pieces];
    for i in 0..grid.n {
        let x = grid.x(i);
        let j = ((x / l).floor() as usize + 1).min(m_pieces);
        pieces[j - 1][i] = y_d.values[i];
    }

    let margin_cells = scfg.margin_cells.max(2);
    let w = margin_cells as f64 * grid.h;
    let mut mollified = Vec::with_capacity(m_pieces);
    let mut errors = Vec::with_capacity(m_pieces);
    for (j, (a, b)) in intervals.iter().enumerate() {
        let mut cut = vec![0.0; grid.n];
        for i in 0..grid.n {
            let x = grid.x(i);
            let c = ramp((x - a) / w) * ramp((b - x) / w);
            cut[i] = pieces[j][i] * c;
        }
        let diff: Vec<f64> = cut.iter().zip(&pieces[j]).map(|(c, p)| c - p).collect();
        errors.push(grid.l2_norm(&diff));
        mollified.push(cut);
    }
    let decomposition_error: f64 = errors.iter().sum();
    if decomposition_error > eps / 2.0 {
        let worst = errors
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i + 1)
            .unwrap_or(1);
        return Err(Error::InfeasibleDecomposition {
            piece: worst,
            error: decomposition_error,
            budget: eps / 2.0,
        });
    }

    let time = y_d.time;
    Ok(TargetDecomposition {
        y_d: y_d.clone(),
        l,
        m_pieces,
        intervals,
        pieces: pieces
            .into_iter()
            .map(|v| State { values: v, time })
            .collect(),
        mollified: mollified
            .into_iter()
            .map(|v| State { values: v, time })
            .collect(),
        margin_cells,
        decomposition_error,
    })
}
