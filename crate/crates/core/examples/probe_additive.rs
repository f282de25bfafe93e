// temporary probe: piece-2 steering in isolation
use mobctrl_core::control::{sweep_window_sequence, Window};
use mobctrl_core::grid::build_grid;
use mobctrl_core::law::{DiffusionLaw, FrozenLaw};
use mobctrl_core::solver::{solve_forward, SolverConfig};
use mobctrl_core::state::State;
use mobctrl_core::synthesis::{SynthesisConfig, WindowBasis};
use mobctrl_core::control::{ControlSchedule, ControlStage, StagePayload};

fn bump(x: f64) -> f64 {
    let s = (x - 0.75) / 0.2;
    if s.abs() < 1.0 { (1.0 - 1.0 / (1.0 - s * s)).exp() } else { 0.0 }
}

fn main() {
    let grid = build_grid(200).unwrap();
    let law = FrozenLaw::constant(1.0).unwrap();
    let dlaw = DiffusionLaw::Frozen(law.clone());
    let scfg = SynthesisConfig::default();
    let mut cfg = SolverConfig::auto(&grid, 1.0);
    cfg.dt = cfg.dt.min(0.05 * 0.5f64.powi(9) / 2.0);
    eprintln!("fine dt = {}", cfg.dt);
    let raw_mass: f64 = (0..grid.n).map(|i| bump(grid.x(i))).sum::<f64>() * grid.h;
    let scale = 0.3 / raw_mass;
    let target = State::from_fn(&grid, 0.0, |x| scale * bump(x));
    eprintln!("target L2 = {}", grid.l2_norm(&target.values));

    let windows = sweep_window_sequence(0.5, 2).unwrap();
    let window = windows[1];
    let (a, b) = (0.95, 1.0);
    let basis = WindowBasis::build(&grid, window, (a, b), &law, &scfg, &cfg).unwrap();
    eprintln!("basis: {} hats x {} slabs, subgrid n = {}", basis.centers.len(), basis.slab_edges.len()-1, basis.subgrid.n);

    let target_sub: Vec<f64> = (0..basis.subgrid.n)
        .map(|i| target.sample_at(&grid, basis.subgrid.x(i), (0.0, 0.0)))
        .collect();
    let mut steering = target_sub.clone();
    let mut warm: Option<Vec<f64>> = None;
    for pass in 0..8 {
        let out = basis.solve(&steering, warm.as_deref(), scfg.nnls_max_iters).unwrap();
        let l2res = basis.l2_residual(out.residual);
        let field = basis.field(&out.coefficients).unwrap();
        // full-domain run
        let stage = ControlStage::new(a, b, window, StagePayload::FieldAdditive { v: field.clone() }).unwrap();
        let sched = ControlSchedule::new(vec![stage]).unwrap();
        let traj = solve_forward(&grid, &State::zeros(grid.n, a), (a, 1.0), &dlaw, &sched, &cfg).unwrap();
        let terminal = traj.final_state();
        let diff: Vec<f64> = terminal.values.iter().zip(&target.values).map(|(p, q)| p - q).collect();
        let achieved = grid.l2_norm(&diff);
        let err_left = grid.l2_norm_sq_within(&diff, 0.0, 0.5).sqrt();
        let err_win = grid.l2_norm_sq_within(&diff, 0.5, 1.0).sqrt();
        eprintln!("pass {pass}: nnls_l2 = {l2res:.4e}, achieved = {achieved:.4e} (left {err_left:.3e}, win {err_win:.3e}), iters = {}", out.iterations);
        // correct
        let defect_sub: Vec<f64> = (0..basis.subgrid.n)
            .map(|i| {
                let x = basis.subgrid.x(i);
                target.sample_at(&grid, x, (0.0, 0.0)) - terminal.sample_at(&grid, x, (0.0, 0.0))
            })
            .collect();
        for (t, d) in steering.iter_mut().zip(&defect_sub) { *t += d; }
        warm = Some(out.coefficients);
    }
}
