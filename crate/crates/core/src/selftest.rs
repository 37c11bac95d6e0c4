//! Quick invariant checks run by the `selftest` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjoint::ObjectiveConfig;
use crate::error::Result;
use crate::fem::Mesh1D;
use crate::forward::{ForwardSetup, TimeGrid};
use crate::objective::{fd_check, ControlProblem, Direction};
use crate::optimizer::{optimize, OptimizerConfig, QuadraticSurrogate, Termination};
use crate::tensor::{energy_and_derivatives, fd_step, Mat, StrainEnergyModel};
use crate::warp::{mu, WarpParams};

#[derive(Clone, Debug)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> SelfCheck {
    match outcome {
        Ok((passed, detail)) => SelfCheck { name, passed, detail },
        Err(e) => SelfCheck { name, passed: false, detail: format!("error: {e}") },
    }
}

fn small_problem(t_end: f64, dt: f64) -> Result<ControlProblem> {
    let model = StrainEnergyModel::SaintVenantKirchhoff { lambda: 0.05, mu: 0.05 };
    let setup = ForwardSetup::new(Mesh1D::uniform(20, (0.75, 1.0))?, model, 2e-4, TimeGrid::new(t_end, dt)?);
    Ok(ControlProblem::new(setup, ObjectiveConfig::pressure_at_tau(2e-3)))
}

fn trivial_state() -> Result<(bool, String)> {
    let p = small_problem(1.0, 0.05)?;
    let ev = p.evaluate(&p.zero_control(), 0.5)?;
    let umax = ev.state.u.iter().chain(&ev.state.udot).flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    let pmax = ev.state.pressure.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    Ok((umax == 0.0 && pmax == 0.0 && ev.j == 0.0, format!("max |u|, |udot| = {umax:e}, max |p| = {pmax:e}")))
}

fn volume() -> Result<(bool, String)> {
    let p = small_problem(1.0, 0.05)?;
    let ev = p.evaluate(&p.smooth_control(0.05), 0.5)?;
    let r = ev.state.max_volume_residual();
    Ok((r <= 1e-10, format!("max |V - V0| = {r:e}")))
}

fn sym(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Mat {
    let a = Mat::from_fn(d, |_, _| rng.gen_range(-scale..scale));
    a.sym()
}

fn constitutive() -> Result<(bool, String)> {
    let models = [
        StrainEnergyModel::SaintVenantKirchhoff { lambda: 0.05, mu: 0.05 },
        StrainEnergyModel::Fung { w0: 0.0, beta: 0.8, gamma: 1.3 },
        StrainEnergyModel::Ogden { gamma: 1.7 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for m in &models {
        for _ in 0..20 {
            let e = sym(&mut rng, 3, 0.2);
            let dir = sym(&mut rng, 3, 1.0);
            let h = fd_step(e.norm());
            let plus = energy_and_derivatives(m, &(e + dir.scale(h)))?;
            let minus = energy_and_derivatives(m, &(e - dir.scale(h)))?;
            let at = energy_and_derivatives(m, &e)?;
            let dw = (plus.energy - minus.energy) / (2.0 * h);
            let an = at.stress.ddot(&dir);
            worst = worst.max((dw - an).abs() / an.abs().max(1e-3));
            let ds = (plus.stress - minus.stress).scale(0.5 / h);
            let an = at.tangent.apply(&dir);
            worst = worst.max((ds - an).norm() / an.norm().max(1e-3));
        }
    }
    Ok((worst <= 1e-6, format!("worst relative error = {worst:e}")))
}

fn warp() -> Result<(bool, String)> {
    let p = WarpParams::new(15.0, 4.0, 0.02, 0.04 / 15.0)?;
    let values = [mu(0.0, &p)?, mu(1.0, &p)?, mu(2.0, &p)?];
    Ok((values == [0.0, 4.0, 15.0], format!("mu(0), mu(1), mu(2) = {values:?}")))
}

fn gradient() -> Result<(bool, String)> {
    let p = small_problem(3.0, 0.01)?;
    let xi = p.smooth_control(0.02);
    let dirs = [Direction { xi: p.mode_direction(1), tau: 0.0 }, Direction { xi: p.zero_control(), tau: 1.0 }];
    let worst = fd_check(&p, &xi, 1.5, &dirs, &[1e-3, 1e-2])?.worst_best();
    Ok((worst <= 5e-2, format!("worst relative error = {worst:e}")))
}

fn ascent() -> Result<(bool, String)> {
    let mut q = QuadraticSurrogate {
        hessian_diag: vec![1.0, 3.0, 8.0],
        maximizer: vec![0.5, -1.0, 2.0],
        offset: 0.0,
    };
    let cfg = OptimizerConfig { stop_tol: 1e-9, ..OptimizerConfig::for_horizon(1.0) };
    let r = optimize(&mut q, &[0.0; 3], &cfg, |_| 0.0)?;
    let err = r.x.iter().zip(&q.maximizer).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((r.termination == Termination::Converged && err <= 1e-8, format!("{} iterations, error {err:e}", r.iterations())))
}

pub fn run_all() -> Vec<SelfCheck> {
    vec![
        check("trivial state", trivial_state()),
        check("volume conservation", volume()),
        check("constitutive derivatives", constitutive()),
        check("warp breakpoints", warp()),
        check("adjoint gradient", gradient()),
        check("ascent on quadratic", ascent()),
    ]
}
