//! Convergence-order checks against the sine-expansion oracle and
//! fine-grid references: first order in time, second order in space.

use mobctrl_core::control::ControlSchedule;
use mobctrl_core::grid::{build_grid, SpatialGrid};
use mobctrl_core::law::{DiffusionLaw, QuasilinearLaw};
use mobctrl_core::solver::{eigen_oracle, solve_forward, SolverConfig};
use mobctrl_core::state::State;
use std::f64::consts::PI;

fn free_solve(grid: &SpatialGrid, y0: &State, t: f64, law: &DiffusionLaw, dt: f64) -> State {
    let cfg = SolverConfig::with_dt(dt).unwrap();
    let sched = ControlSchedule::idle((0.0, t)).unwrap();
    solve_forward(grid, y0, (0.0, t), law, &sched, &cfg)
        .unwrap()
        .final_state()
        .clone()
}

fn l2_err(grid: &SpatialGrid, a: &State, b: &State) -> f64 {
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(p, q)| p - q).collect();
    grid.l2_norm(&d)
}

#[test]
fn halving_dt_reduces_oracle_error_by_at_least_1_8() {
    // dt-dominated regime
    let grid = build_grid(200).unwrap();
    let law = DiffusionLaw::constant(1.0).unwrap();
    let y0 = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
    let oracle = eigen_oracle(&y0, 1.0, 0.0, 0.1).unwrap();
    let e1 = l2_err(&grid, &free_solve(&grid, &y0, 0.1, &law, 1e-4), &oracle);
    let e2 = l2_err(&grid, &free_solve(&grid, &y0, 0.1, &law, 5e-5), &oracle);
    assert!(e1 <= 5e-3, "e1 = {e1:.3e}");
    let factor = e1 / e2;
    assert!(factor >= 1.8, "dt halving factor = {factor:.3}");
}

#[test]
fn halving_h_reduces_oracle_error_by_at_least_1_8() {
    // h-dominated regime: tiny dt, coarse grids (n+1 doubles => h halves)
    let law = DiffusionLaw::constant(1.0).unwrap();
    let t = 0.05;
    let err_for = |n: usize| {
        let grid = build_grid(n).unwrap();
        let y0 = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
        let oracle = eigen_oracle(&y0, 1.0, 0.0, t).unwrap();
        l2_err(&grid, &free_solve(&grid, &y0, t, &law, 1e-6), &oracle)
    };
    let e1 = err_for(25);
    let e2 = err_for(51);
    let factor = e1 / e2;
    assert!(factor >= 1.8, "h halving factor = {factor:.3} (e1 = {e1:.3e}, e2 = {e2:.3e})");
}

fn quasilinear() -> DiffusionLaw {
    DiffusionLaw::Quasilinear(
        QuasilinearLaw::new(|y| 1.0 + 0.5 / (1.0 + y * y), (-2.0, 2.0)).unwrap(),
    )
}

/// Restrict a fine-grid state to the nodes of a coarser nested grid.
fn restrict(fine: &State, fine_grid: &SpatialGrid, coarse_grid: &SpatialGrid) -> Vec<f64> {
    (0..coarse_grid.n)
        .map(|i| fine.sample_at(fine_grid, coarse_grid.x(i), (0.0, 0.0)))
        .collect()
}

#[test]
fn quasilinear_self_convergence_ordering() {
    // refinement pairings on nested grids: with dt ~ h² the (2h, dt) vs
    // (h, dt/4) differences dominate the (h, dt) vs (h/2, dt/4)
    // differences by the factor the orders predict
    let law = quasilinear();
    let t = 0.02;
    let n_h = 31; // h = 1/32
    let g_h = build_grid(n_h).unwrap();
    let g_h2 = build_grid(63).unwrap(); // h/2
    let g_2h = build_grid(15).unwrap(); // 2h
    let h = g_h.h;
    let dt = h * h / 50.0;

    let y0f = |x: f64| x * (1.0 - x);
    let sol_h = free_solve(&g_h, &State::from_fn(&g_h, 0.0, y0f), t, &law, dt);
    let sol_h2 = free_solve(&g_h2, &State::from_fn(&g_h2, 0.0, y0f), t, &law, dt / 4.0);
    let sol_2h = free_solve(&g_2h, &State::from_fn(&g_2h, 0.0, y0f), t, &law, dt);
    let sol_h_dt4 = free_solve(&g_h, &State::from_fn(&g_h, 0.0, y0f), t, &law, dt / 4.0);

    // compare on the coarsest grid's nodes
    let a = restrict(&sol_h, &g_h, &g_2h);
    let b = restrict(&sol_h2, &g_h2, &g_2h);
    let c = sol_2h.values.clone();
    let d = restrict(&sol_h_dt4, &g_h, &g_2h);
    let d1: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
    let d2: Vec<f64> = c.iter().zip(&d).map(|(p, q)| p - q).collect();
    let d1n = g_2h.l2_norm(&d1);
    let d2n = g_2h.l2_norm(&d2);
    assert!(
        d2n >= 3.0 * d1n,
        "coarse/fine separation {d2n:.3e} vs {d1n:.3e} (ratio {:.2})",
        d2n / d1n
    );
}

#[test]
fn quasilinear_matches_fine_reference_within_richardson_estimate() {
    let law = quasilinear();
    let t = 0.02;
    let g = build_grid(25).unwrap();
    let g2 = build_grid(51).unwrap(); // h/2
    let g4 = build_grid(103).unwrap(); // h/4
    let h = g.h;
    let dt = h * h / 5.0;
    let y0f = |x: f64| x * (1.0 - x);

    let sol = free_solve(&g, &State::from_fn(&g, 0.0, y0f), t, &law, dt);
    let half = free_solve(&g2, &State::from_fn(&g2, 0.0, y0f), t, &law, dt / 2.0);
    let reference = free_solve(&g4, &State::from_fn(&g4, 0.0, y0f), t, &law, dt / 4.0);

    let est = {
        let d: Vec<f64> = sol
            .values
            .iter()
            .zip(&restrict(&half, &g2, &g))
            .map(|(p, q)| p - q)
            .collect();
        2.0 * g.l2_norm(&d)
    };
    let err = {
        let d: Vec<f64> = sol
            .values
            .iter()
            .zip(&restrict(&reference, &g4, &g))
            .map(|(p, q)| p - q)
            .collect();
        g.l2_norm(&d)
    };
    assert!(
        err <= 1.05 * est,
        "reference error {err:.3e} exceeds Richardson estimate {est:.3e}"
    );
    assert!(est > 0.0);
}
