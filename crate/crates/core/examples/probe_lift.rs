// temporary probe: phase-2 additive run + lift
use mobctrl_core::grid::build_grid;
use mobctrl_core::law::{DiffusionLaw, FrozenLaw};
use mobctrl_core::solver::{solve_forward, SolverConfig};
use mobctrl_core::state::State;
use mobctrl_core::synthesis::*;
use std::f64::consts::PI;

fn bump(x: f64) -> f64 {
    let s = (x - 0.75) / 0.2;
    if s.abs() < 1.0 { (1.0 - 1.0 / (1.0 - s * s)).exp() } else { 0.0 }
}

fn main() {
    let grid = build_grid(200).unwrap();
    let law = FrozenLaw::constant(1.0).unwrap();
    let dlaw = DiffusionLaw::Frozen(law.clone());
    let scfg = SynthesisConfig::default();
    let cfg = SolverConfig::auto(&grid, 1.0);
    let raw_mass: f64 = (0..grid.n).map(|i| bump(grid.x(i))).sum::<f64>() * grid.h;
    let scale = 0.3 / raw_mass;
    let y_d = State::from_fn(&grid, 0.0, |x| scale * bump(x));

    // sweep to T_M
    let y0 = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
    let (plan, y_tm) = run_sweep(&grid, &y0, 0.1, 0.5, &law, 0.5, &scfg, &cfg).unwrap();
    let t_m = plan.t_m();
    eprintln!("t_m = {t_m}, |y_tm| = {}", grid.l2_norm(&y_tm.values));
    eprintln!("y_tm min = {:.3e}, max = {:.3e}",
        y_tm.values.iter().cloned().fold(f64::INFINITY, f64::min),
        y_tm.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max));

    let decomp = decompose_target(&grid, &y_d, 0.5, 0.035, &scfg).unwrap();
    eprintln!("decomp error = {:.3e}", decomp.decomposition_error);
    let (aplan, vsched) = additive_sequence(&grid, &decomp, (t_m, 1.0), 0.035, &law, &scfg, &cfg).unwrap();
    eprintln!("achieved = {:?}", aplan.achieved_errors);
    eprintln!("solver_dt = {}", aplan.solver_dt);

    let mut cfg_fine = cfg.clone();
    cfg_fine.dt = aplan.solver_dt;
    let add_traj = solve_forward(&grid, &y_tm, (t_m, 1.0), &dlaw, &vsched, &cfg_fine).unwrap();
    eprintln!("additive run: {} states, stride {}", add_traj.states.len(), add_traj.meta.stored_stride);
    eprintln!("additive final norm = {}", grid.l2_norm(&add_traj.final_state().values));

    // what the additive run reached vs target
    let idle = mobctrl_core::control::ControlSchedule::idle((t_m, 1.0)).unwrap();
    let free = solve_forward(&grid, &y_tm, (t_m, 1.0), &dlaw, &idle, &cfg).unwrap();
    let yhat1 = free.final_state();
    let z: Vec<f64> = y_d.values.iter().zip(&yhat1.values).map(|(d, f)| d + f).collect();
    let diff: Vec<f64> = add_traj.final_state().values.iter().zip(&z).map(|(p, q)| p - q).collect();
    eprintln!("additive defect vs y_d + yhat1(T) = {:.4e}", grid.l2_norm(&diff));

    match additive_to_multiplicative(&add_traj, &vsched, 1e-6, 1e6, &cfg_fine) {
        Ok(lift) => {
            eprintln!("lift u_sup = {:.3e}, omitted = {:.3e}, defect = {:.4e}", lift.u_sup, lift.omitted_fraction, lift.defect);
            let diff: Vec<f64> = lift.resimulated.final_state().values.iter().zip(&z).map(|(p, q)| p - q).collect();
            eprintln!("phase2 defect (lifted) = {:.4e}", grid.l2_norm(&diff));
            eprintln!("resim final norm = {}", grid.l2_norm(&lift.resimulated.final_state().values));
            // norm history through the active window
            for s in lift.resimulated.states.iter() {
                if s.time > 0.9499 && (s.time * 200.0).round() / 200.0 == (s.time * 200.0).round() / 200.0 {
                    let k = ((s.time - 0.95) / 0.005).round() as i64;
                    if (s.time - (0.95 + k as f64 * 0.005)).abs() < 2e-5 && k >= 0 {
                        eprintln!("  t = {:.4}: |y| = {:.5e}", s.time, grid.l2_norm(&s.values));
                    }
                }
            }
            // additive run norms at the same times
            for s in add_traj.states.iter() {
                let k = ((s.time - 0.95) / 0.005).round() as i64;
                if s.time > 0.9499 && (s.time - (0.95 + k as f64 * 0.005)).abs() < 2e-5 && k >= 0 {
                    eprintln!("  add t = {:.4}: |y| = {:.5e}", s.time, grid.l2_norm(&s.values));
                }
            }
            // sample the lifted u at the bump center late in the window
            for st in lift.schedule.stages() {
                if let mobctrl_core::control::StagePayload::FieldMultiplicative { u } = &st.payload {
                    let c = u.compiled().unwrap();
                    eprintln!("  lifted stage [{:.3},{:.3}] window ({},{}): u(0.75, 0.999) = {:.4e}, u(0.75, 0.96) = {:.4e}",
                        st.t_start, st.t_end, st.window.r, st.window.end(), c.eval(0.75, 0.999), c.eval(0.75, 0.96));
                }
            }
        }
        Err(e) => eprintln!("lift failed: {e}"),
    }
}
