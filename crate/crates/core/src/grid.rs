//! Uniform 1D meshes and discrete norms.
//!
//! The discrete L² norm is the composite trapezoid rule with zero boundary
//! values, i.e. `h·Σ y_i²`, which is consistent with homogeneous Dirichlet
//! data. Gradient norms use forward differences with the boundary values
//! pinned to zero, the discrete analogue of H¹₀.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform mesh of `n` interior nodes on `[x0, x0 + (n+1)·h]`.
///
/// [`build_grid`] produces the unit-interval mesh with `h = 1/(n+1)`;
/// subinterval meshes (used for window subproblems and probe regions)
/// come from [`SpatialGrid::on_interval`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    /// Interior node count.
    pub n: usize,
    /// Node spacing.
    pub h: f64,
    /// Left endpoint of the meshed interval.
    pub x0: f64,
}

/// Build the unit-interval grid with `h = 1/(n+1)` and nodes `x_i = i·h`.
pub fn build_grid(n: usize) -> Result<SpatialGrid> {
    if n < 2 {
        return Err(Error::invalid(format!("grid needs n >= 2 interior nodes, got {n}")));
    }
    Ok(SpatialGrid {
        n,
        h: 1.0 / (n as f64 + 1.0),
        x0: 0.0,
    })
}

impl SpatialGrid {
    /// Uniform grid with `n` interior nodes on the subinterval `(a, b)`.
    pub fn on_interval(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::invalid(format!("bad interval ({a}, {b})")));
        }
        if n < 2 {
            return Err(Error::invalid(format!("grid needs n >= 2 interior nodes, got {n}")));
        }
        Ok(SpatialGrid {
            n,
            h: (b - a) / (n as f64 + 1.0),
            x0: a,
        })
    }

    /// Position of interior node `i` (0-based: node 0 sits at `x0 + h`).
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 1.0) * self.h
    }

    /// Interval endpoints `(x0, x0 + (n+1)h)`.
    pub fn span(&self) -> (f64, f64) {
        (self.x0, self.x0 + (self.n as f64 + 1.0) * self.h)
    }

    /// Length of the meshed interval.
    pub fn length(&self) -> f64 {
        (self.n as f64 + 1.0) * self.h
    }

    /// All interior node positions.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// `h·Σ v_i²`.
    pub fn l2_norm_sq(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.n);
        self.h * v.iter().map(|y| y * y).sum::<f64>()
    }

    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.l2_norm_sq(v).sqrt()
    }

    /// `h·Σ v_i²` over nodes strictly inside the open interval `(lo, hi)`.
    pub fn l2_norm_sq_within(&self, v: &[f64], lo: f64, hi: f64) -> f64 {
        debug_assert_eq!(v.len(), self.n);
        let mut acc = 0.0;
        for (i, y) in v.iter().enumerate() {
            let x = self.x(i);
            if x > lo && x < hi {
                acc += y * y;
            }
        }
        self.h * acc
    }

    /// Discrete H¹₀ seminorm: `(Σ_{i=0..n} (v_{i+1}-v_i)²/h)^{1/2}` with
    /// `v_0 = v_{n+1} = 0`.
    pub fn h1_seminorm(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.n);
        let mut acc = v[0] * v[0]; // (v_1 - 0)^2
        for i in 0..self.n - 1 {
            let d = v[i + 1] - v[i];
            acc += d * d;
        }
        acc += v[self.n - 1] * v[self.n - 1]; // (0 - v_n)^2
        (acc / self.h).sqrt()
    }

    /// Centered-difference interior gradient, one-sided second order at the
    /// ends, with zero boundary values.
    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        let n = self.n;
        let mut g = vec![0.0; n];
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { v[i - 1] };
            let right = if i == n - 1 { 0.0 } else { v[i + 1] };
            g[i] = (right - left) / (2.0 * self.h);
        }
        g
    }

    /// One-sided second-order reconstruction of `v_x` at the left boundary
    /// (`v(x0) = bc_left`): `(-3 v_b + 4 v_1 - v_2) / (2h)`.
    pub fn boundary_gradient_left(&self, v: &[f64], bc_left: f64) -> f64 {
        debug_assert!(v.len() >= 2);
        (-3.0 * bc_left + 4.0 * v[0] - v[1]) / (2.0 * self.h)
    }
}

/// `max_i |v_i|`.
pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, y| m.max(y.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grids() {
        assert!(build_grid(1).is_err());
        assert!(build_grid(0).is_err());
    }

    #[test]
    fn n3_nodes() {
        let g = build_grid(3).unwrap();
        assert_eq!(g.h, 0.25);
        assert_eq!(g.nodes(), vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn n199_spacing() {
        let g = build_grid(199).unwrap();
        assert!((g.h - 0.005).abs() < 1e-15);
        // h·(n+1) = 1 up to rounding, nodes strictly increasing in (0,1)
        assert!((g.h * 200.0 - 1.0).abs() < 1e-15);
        let nodes = g.nodes();
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(nodes[0] > 0.0 && *nodes.last().unwrap() < 1.0);
    }

    #[test]
    fn l2_of_sine_is_half() {
        // h Σ sin²(πx_i) = 1/2 exactly on uniform grids.
        let g = build_grid(64).unwrap();
        let v: Vec<f64> = (0..g.n).map(|i| (std::f64::consts::PI * g.x(i)).sin()).collect();
        assert!((g.l2_norm_sq(&v) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn h1_seminorm_of_sine() {
        // ‖(sin πx)'‖ = π/√2; the discrete forward-difference norm matches
        // to O(h²).
        let g = build_grid(400).unwrap();
        let v: Vec<f64> = (0..g.n).map(|i| (std::f64::consts::PI * g.x(i)).sin()).collect();
        let exact = std::f64::consts::PI / 2.0_f64.sqrt();
        assert!((g.h1_seminorm(&v) - exact).abs() < 1e-4 * exact);
    }

    #[test]
    fn window_norm_excludes_boundary_nodes() {
        let g = build_grid(3).unwrap();
        let v = vec![1.0, 1.0, 1.0];
        // Open window (0, 0.5): only the node at 0.25 is inside.
        assert!((g.l2_norm_sq_within(&v, 0.0, 0.5) - 0.25).abs() < 1e-15);
    }
}
