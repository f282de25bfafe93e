//! Diffusion coefficients with certified sampled bounds.
//!
//! Two variants: a quasilinear coefficient `a(y)` that must stay uniformly
//! positive with bounded first and second derivatives over a declared state
//! range, and a frozen space-time field `b(x, t)` with an ellipticity floor
//! `ρ > 0`. Bounds are certified by dense sampling at construction; the
//! sampled sup-norms feed the energy-constant computations.

use crate::error::{Error, Result};
use std::sync::Arc;

type StateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Quasilinear coefficient `a(y)` with sampled bounds over `state_range`.
#[derive(Clone)]
pub struct QuasilinearLaw {
    a: StateFn,
    pub a_min: f64,
    pub a_max: f64,
    pub a_d1_max: f64,
    pub a_d2_max: f64,
    pub state_range: (f64, f64),
}

impl std::fmt::Debug for QuasilinearLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuasilinearLaw")
            .field("a_min", &self.a_min)
            .field("a_max", &self.a_max)
            .field("a_d1_max", &self.a_d1_max)
            .field("a_d2_max", &self.a_d2_max)
            .field("state_range", &self.state_range)
            .finish()
    }
}

const SAMPLES: usize = 4096;

impl QuasilinearLaw {
    /// Certify `a` over `state_range` by dense sampling: `inf a > 0` and
    /// finite difference estimates of `sup |a'|`, `sup |a''|`.
    pub fn new(
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        state_range: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = state_range;
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::invalid(format!("bad state range ({lo}, {hi})")));
        }
        let step = (hi - lo) / SAMPLES as f64;
        let mut a_min = f64::INFINITY;
        let mut a_max = f64::NEG_INFINITY;
        let mut d1 = 0.0_f64;
        let mut d2 = 0.0_f64;
        for i in 0..=SAMPLES {
            let r = lo + step * i as f64;
            let v = a(r);
            if !v.is_finite() {
                return Err(Error::invalid(format!("a({r}) is not finite")));
            }
            a_min = a_min.min(v);
            a_max = a_max.max(v);
            let (vm, vp) = (a(r - step), a(r + step));
            d1 = d1.max(((vp - vm) / (2.0 * step)).abs());
            d2 = d2.max(((vp - 2.0 * v + vm) / (step * step)).abs());
        }
        if a_min <= 0.0 {
            return Err(Error::invalid(format!(
                "inf a = {a_min:.6e} <= 0 on [{lo}, {hi}]: uniform parabolicity fails"
            )));
        }
        Ok(QuasilinearLaw {
            a: Arc::new(a),
            a_min,
            a_max,
            a_d1_max: d1,
            a_d2_max: d2,
            state_range,
        })
    }

    #[inline]
    pub fn coeff(&self, y: f64) -> f64 {
        (self.a)(y)
    }

    /// Central-difference derivative, used to assemble Newton Jacobians.
    #[inline]
    pub fn coeff_deriv(&self, y: f64) -> f64 {
        let d = 1e-6 * (1.0 + y.abs());
        ((self.a)(y + d) - (self.a)(y - d)) / (2.0 * d)
    }
}

/// Frozen coefficient `b(x, t)` with sampled floor `rho` and sup-norms of
/// `b`, `b_t`, `b_x` over `[0,1] × t_span`.
#[derive(Clone)]
pub struct FrozenLaw {
    b: SpaceTimeFn,
    pub rho: f64,
    pub b_sup: f64,
    pub bt_sup: f64,
    pub bx_sup: f64,
    pub t_span: (f64, f64),
}

impl std::fmt::Debug for FrozenLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrozenLaw")
            .field("rho", &self.rho)
            .field("b_sup", &self.b_sup)
            .field("bt_sup", &self.bt_sup)
            .field("bx_sup", &self.bx_sup)
            .field("t_span", &self.t_span)
            .finish()
    }
}

impl FrozenLaw {
    /// Certify `b` over `[0,1] × t_span` on an `nx × nt` sample lattice.
    pub fn new(
        b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        t_span: (f64, f64),
        nx: usize,
        nt: usize,
    ) -> Result<Self> {
        let (t0, t1) = t_span;
        if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
            return Err(Error::invalid(format!("bad time span ({t0}, {t1})")));
        }
        let nx = nx.max(8);
        let nt = nt.max(2);
        let dx = 1.0 / nx as f64;
        let dt = if t1 > t0 { (t1 - t0) / nt as f64 } else { 1.0 };
        let mut rho = f64::INFINITY;
        let mut b_sup = 0.0_f64;
        let mut bt_sup = 0.0_f64;
        let mut bx_sup = 0.0_f64;
        for i in 0..=nx {
            let x = i as f64 * dx;
            for k in 0..=nt {
                let t = t0 + dt * k as f64;
                let v = b(x, t);
                if !v.is_finite() {
                    return Err(Error::invalid(format!("b({x}, {t}) is not finite")));
                }
                rho = rho.min(v);
                b_sup = b_sup.max(v.abs());
                if t1 > t0 {
                    let tp = (t + dt).min(t1);
                    let tm = (t - dt).max(t0);
                    bt_sup = bt_sup.max(((b(x, tp) - b(x, tm)) / (tp - tm)).abs());
                }
                let xp = (x + dx).min(1.0);
                let xm = (x - dx).max(0.0);
                bx_sup = bx_sup.max(((b(xp, t) - b(xm, t)) / (xp - xm)).abs());
            }
        }
        if rho <= 0.0 {
            return Err(Error::invalid(format!(
                "inf b = {rho:.6e} <= 0: ellipticity floor fails"
            )));
        }
        Ok(FrozenLaw { b: Arc::new(b), rho, b_sup, bt_sup, bx_sup, t_span })
    }

    /// Constant coefficient `b ≡ c`.
    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::invalid(format!("constant coefficient {c} must be positive")));
        }
        Ok(FrozenLaw {
            b: Arc::new(move |_, _| c),
            rho: c,
            b_sup: c,
            bt_sup: 0.0,
            bx_sup: 0.0,
            t_span: (0.0, f64::INFINITY),
        })
    }

    #[inline]
    pub fn coeff(&self, x: f64, t: f64) -> f64 {
        (self.b)(x, t)
    }
}

/// Diffusion coefficient of the forward problem.
#[derive(Debug, Clone)]
pub enum DiffusionLaw {
    Quasilinear(QuasilinearLaw),
    Frozen(FrozenLaw),
}

impl DiffusionLaw {
    pub fn constant(c: f64) -> Result<Self> {
        Ok(DiffusionLaw::Frozen(FrozenLaw::constant(c)?))
    }

    pub fn as_frozen(&self) -> Option<&FrozenLaw> {
        match self {
            DiffusionLaw::Frozen(f) => Some(f),
            DiffusionLaw::Quasilinear(_) => None,
        }
    }

    /// Uniform lower bound on the coefficient (a_min or ρ).
    pub fn floor(&self) -> f64 {
        match self {
            DiffusionLaw::Quasilinear(q) => q.a_min,
            DiffusionLaw::Frozen(f) => f.rho,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quasilinear_bounds_are_certified() {
        let law = QuasilinearLaw::new(|y| 1.0 + 0.5 / (1.0 + y * y), (-5.0, 5.0)).unwrap();
        assert!(law.a_min >= 1.0 && law.a_min < 1.02);
        assert!((law.a_max - 1.5).abs() < 1e-9);
        // max |a'| = 0.5·max |2y/(1+y²)²| ≈ 0.3248 at y = ±1/√3
        assert!((law.a_d1_max - 0.32476).abs() < 1e-3);
        assert!(law.a_d2_max > 0.9 && law.a_d2_max < 1.1);
    }

    #[test]
    fn negative_coefficient_is_refused() {
        assert!(QuasilinearLaw::new(|_| -1.0, (-1.0, 1.0)).is_err());
        assert!(FrozenLaw::constant(-1.0).is_err());
        assert!(FrozenLaw::new(|x, _| x - 0.5, (0.0, 1.0), 64, 8).is_err());
    }

    #[test]
    fn frozen_sup_norms() {
        let law = FrozenLaw::new(|_, t| 1.0 + 0.1 * t, (0.0, 1.0), 64, 64).unwrap();
        assert!((law.rho - 1.0).abs() < 1e-12);
        assert!((law.b_sup - 1.1).abs() < 1e-12);
        assert!((law.bt_sup - 0.1).abs() < 1e-9);
        assert!(law.bx_sup.abs() < 1e-12);
    }
}
