// temporary probe for the flagship pipeline scenario
use mobctrl_core::grid::build_grid;
use mobctrl_core::law::FrozenLaw;
use mobctrl_core::solver::SolverConfig;
use mobctrl_core::state::State;
use mobctrl_core::synthesis::{synthesize_pipeline, SynthesisConfig};
use std::f64::consts::PI;

fn bump(x: f64) -> f64 {
    let s = (x - 0.75) / 0.2;
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp() * std::f64::consts::E / std::f64::consts::E
    } else {
        0.0
    }
}

fn main() {
    let grid = build_grid(200).unwrap();
    let law = FrozenLaw::constant(1.0).unwrap();
    let scfg = SynthesisConfig::default();
    let cfg = SolverConfig::auto(&grid, 1.0);
    eprintln!("dt = {}", cfg.dt);
    let y0 = State::from_fn(&grid, 0.0, |x| (PI * x).sin());
    // mass-0.3 bump: integral of the raw bump on (0.55,0.95)
    let raw_mass: f64 = (0..grid.n).map(|i| bump(grid.x(i))).sum::<f64>() * grid.h;
    let scale = 0.3 / raw_mass;
    eprintln!("bump scale = {scale}, L2 = {}", grid.l2_norm(&(0..grid.n).map(|i| scale*bump(grid.x(i))).collect::<Vec<_>>()));
    let y_d = State::from_fn(&grid, 0.0, |x| scale * bump(x));
    let t0 = std::time::Instant::now();
    match synthesize_pipeline(&grid, &y0, &y_d, 0.1, 1.0, 0.5, &law, &scfg, &cfg) {
        Ok(out) => {
            let r = &out.report;
            eprintln!("elapsed = {:?}", t0.elapsed());
            eprintln!("t_m = {}, sweep_norm = {}", r.t_m, r.sweep_norm);
            eprintln!("free_decay_norm = {}", r.free_decay_norm);
            eprintln!("additive_defect = {}", r.additive_defect);
            eprintln!("lift_defect = {}", r.lift_defect);
            eprintln!("phase2_defect = {} (< {})", r.phase2_defect, 0.05);
            eprintln!("terminal_error = {} (< 0.1)", r.terminal_error);
            if let Some(plan) = &out.additive {
                eprintln!("achieved_errors = {:?}", plan.achieved_errors);
                eprintln!("nnls_residuals = {:?}", plan.nnls_residuals);
                eprintln!("delta = {:?}", plan.delta);
            }
            if let Some(sweep) = &out.sweep {
                for s in &sweep.stages {
                    eprintln!("stage {}: m = {}, [{:.4}, {:.4}], wnorm2 = {:.3e} (thr {:.3e}), cum = {:.3e} (bound {:.3e}), gap = {:?}, c1 = {:?}, bterm = {:.3e}",
                        s.index, s.m, s.t_start, s.t_end, s.window_norm_sq, s.threshold_sq, s.cum_norm_sq, s.cum_bound_sq, s.gap_limit, s.c1, s.boundary_term);
                }
            }
        }
        Err(e) => {
            eprintln!("elapsed = {:?}", t0.elapsed());
            eprintln!("FAILED: {e}");
        }
    }
}
