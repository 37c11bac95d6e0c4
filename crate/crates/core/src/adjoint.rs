//! Backward implicit Euler for the adjoint system with jumps at the
//! observation times of the pressure objective.
//!
//! Per step, with `K_k = K(u_k)`, `m = M zeta1` and constraint row `G`:
//!
//! ```text
//! (M + dt kappa A + dt^2 K_k) zeta1^k + dt^2 pi G = m^{k+1} + dt zeta0^{k+1},   G^T zeta1^k = 0
//! zeta0^k = (M/dt + kappa A) zeta1^k - m^{k+1}/dt
//! ```
//!
//! `zeta0` is a covector, `zeta1` a nodal field.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{volume_and_gradient, Mesh1D};
use crate::forward::{fmt, AdjointScheme, ConstraintMode, ForwardSetup, Operators, StateTrajectory, TimeGrid};
use crate::linalg::{axpy, solve_bordered, Tridiag};
use crate::tensor::{deformation_gradient, det_cof, sigma_l_apply, Mat, StrainEnergyModel};

/// Which functional of the pressure is observed at `tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PressureObjective {
    /// `p(tau)`.
    AtTau,
    /// `(p(tau + eps) - p(tau)) / eps`.
    DifferenceQuotient { eps: f64 },
}

impl PressureObjective {
    /// Observation times and weights: the objective is `sum w p(tau + offset)`.
    pub fn samples(&self, tau: f64) -> Vec<(f64, f64)> {
        match *self {
            Self::AtTau => vec![(tau, 1.0)],
            Self::DifferenceQuotient { eps } => vec![(tau, -1.0 / eps), (tau + eps, 1.0 / eps)],
        }
    }

    /// Width of the observation window.
    pub fn window(&self) -> f64 {
        match *self {
            Self::AtTau => 0.0,
            Self::DifferenceQuotient { eps } => eps,
        }
    }
}

/// Terminal term `-(a/2) |u(T)|_M^2 - (b/2) |u'(T)|_M^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TerminalCost {
    pub weight_u: f64,
    pub weight_udot: f64,
}

/// Objective `J = int -(alpha/2) |xi|^2 dt + phi1(tau) + phi2(T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveConfig {
    pub alpha: f64,
    pub pressure: Option<PressureObjective>,
    pub terminal: Option<TerminalCost>,
}

impl ObjectiveConfig {
    pub fn pressure_at_tau(alpha: f64) -> Self {
        Self { alpha, pressure: Some(PressureObjective::AtTau), terminal: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("cost weight alpha must be positive, got {}", self.alpha)));
        }
        if let Some(PressureObjective::DifferenceQuotient { eps }) = self.pressure {
            if !(eps > 0.0) {
                return Err(Error::InvalidParameter(format!("difference quotient needs eps > 0, got {eps}")));
            }
        }
        Ok(())
    }
}

/// Covectors of `v -> dp/du . v` and `w -> dp/du' . w` for the boundary pressure.
pub fn pressure_sensitivity(
    mesh: &Mesh1D,
    model: &StrainEnergyModel,
    kappa: f64,
    u: &[f64],
    _udot: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let gu = Mat::scalar(mesh.boundary_gradient(u));
    let phi = deformation_gradient(&gu);
    let (det, _) = det_cof(&phi);
    if !(det > 0.0) {
        return Err(Error::NonInjective { det });
    }
    let n = mesh.normal_at_neumann();
    // Phi^T / det is identically 1 in one dimension
    let factor = phi.transpose().get(0, 0) / det;
    let stiff = sigma_l_apply(model, &gu, &Mat::scalar(1.0))?.get(0, 0);
    let e = mesh.elements() - 1;
    let (x0, x1) = mesh.element(e);
    let h = x1 - x0;
    let mut dpdu = vec![0.0; mesh.n_free()];
    let mut dpdv = vec![0.0; mesh.n_free()];
    for (node, sign) in [(e + 1, 1.0), (e, -1.0)] {
        if let Some(i) = mesh.free_index(node) {
            dpdu[i] = -factor * stiff * n * sign / h;
            dpdv[i] = -factor * kappa * n * sign / h;
        }
    }
    Ok((dpdu, dpdv))
}

/// Grid weights of linear interpolation at `t`: `[(i, (t_i+1 - t)/dt), (i+1, (t - t_i)/dt)]`.
pub fn jump_interpolation(t: f64, grid: &TimeGrid) -> [(usize, f64); 2] {
    let i = grid.interval(t);
    let b = ((t - grid.time(i)) / grid.step(i)).clamp(0.0, 1.0);
    [(i, 1.0 - b), (i + 1, b)]
}

/// Grid weights of the observed pressure functional, merged per node.
pub fn observation_weights(objective: &PressureObjective, tau: f64, grid: &TimeGrid) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for (t, w) in objective.samples(tau) {
        for (node, b) in jump_interpolation(t, grid) {
            if b != 0.0 {
                *out.entry(node).or_insert(0.0) += w * b;
            }
        }
    }
    out
}

/// Source injected at grid node `node`: `zeta0 -= d0`, `M zeta1 -= d1` going backward.
#[derive(Clone, Debug)]
pub struct Injection {
    pub node: usize,
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct AdjointTrajectory {
    pub times: Vec<f64>,
    /// `zeta0(t_k+)`, covector.
    pub zeta0: Vec<Vec<f64>>,
    /// `zeta0(t_k-)`; differs from `zeta0` only at injection nodes.
    pub zeta0_left: Vec<Vec<f64>>,
    /// `zeta1(t_k+)`, nodal.
    pub zeta1: Vec<Vec<f64>>,
    /// `zeta1(t_k-)`; differs from `zeta1` only at injection nodes.
    pub zeta1_left: Vec<Vec<f64>>,
    /// Constraint multiplier of the step ending at `t_k` (going backward).
    pub pi: Vec<f64>,
    /// Grid nodes that received a jump and the total jump weight there.
    pub jumps: Vec<(usize, f64)>,
    /// Jump location as a fractional step index.
    pub jump_applied_at: Option<f64>,
}

impl AdjointTrajectory {
    /// Mean of `zeta0` over step `k`.
    pub fn zeta0_mean(&self, k: usize) -> Vec<f64> {
        self.zeta0[k].iter().zip(&self.zeta0_left[k + 1]).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Mean of `zeta1` over step `k`.
    pub fn zeta1_mean(&self, k: usize) -> Vec<f64> {
        self.zeta1[k].iter().zip(&self.zeta1_left[k + 1]).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Writes `t, zeta0_1.., zeta1_1.., pi`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.zeta1.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("zeta0_{i}")));
        header.extend((1..=n).map(|i| format!("zeta1_{i}")));
        header.push("pi".into());
        w.write_record(&header)?;
        for k in 0..self.times.len() {
            let mut row = vec![fmt(self.times[k])];
            row.extend(self.zeta0[k].iter().map(|v| fmt(*v)));
            row.extend(self.zeta1[k].iter().map(|v| fmt(*v)));
            row.push(fmt(self.pi[k]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Injections and terminal data generated by the objective on a state trajectory.
pub fn objective_sources(
    setup: &ForwardSetup,
    state: &StateTrajectory,
    tau: f64,
    objective: &ObjectiveConfig,
) -> Result<(Vec<Injection>, Vec<f64>, Vec<f64>)> {
    let grid = &setup.grid;
    let n = setup.mesh.n_free();
    let mut injections = Vec::new();
    if let Some(p) = &objective.pressure {
        for (node, w) in observation_weights(p, tau, grid) {
            let (du, dv) = pressure_sensitivity(&setup.mesh, &setup.model, setup.kappa, &state.u[node], &state.udot[node])?;
            injections.push(Injection { node, d0: du.iter().map(|x| w * x).collect(), d1: dv.iter().map(|x| w * x).collect() });
        }
    }
    let (mut a0, mut a1) = (vec![0.0; n], vec![0.0; n]);
    if let Some(tc) = objective.terminal {
        let ops = Operators::new(setup)?;
        let k = grid.steps();
        a0 = ops.mass.matvec(&state.u[k]).iter().map(|x| -tc.weight_u * x).collect();
        a1 = ops.mass.matvec(&state.udot[k]).iter().map(|x| -tc.weight_udot * x).collect();
    }
    Ok((injections, a0, a1))
}

/// Solves the adjoint for the objective's jump and terminal data.
pub fn solve_adjoint(
    setup: &ForwardSetup,
    state: &StateTrajectory,
    tau: f64,
    objective: &ObjectiveConfig,
) -> Result<AdjointTrajectory> {
    objective.validate()?;
    if !(tau > 0.0 && tau < setup.grid.t_end()) {
        return Err(Error::InvalidParameter(format!("tau = {tau} outside (0, T)")));
    }
    let (inj, a0, a1) = objective_sources(setup, state, tau, objective)?;
    let mut adj = solve_adjoint_with_sources(setup, state, &a0, &a1, &inj)?;
    adj.jump_applied_at = objective.pressure.map(|_| setup.grid.position(tau));
    Ok(adj)
}

/// Backward solve with terminal derivative `(a0, a1)` of the terminal term
/// (so `zeta0(T) = -a0`, `M zeta1(T) = -a1`) and interior injections.
pub fn solve_adjoint_with_sources(
    setup: &ForwardSetup,
    state: &StateTrajectory,
    a0: &[f64],
    a1: &[f64],
    injections: &[Injection],
) -> Result<AdjointTrajectory> {
    let ops = Operators::new(setup)?;
    let grid = &setup.grid;
    let steps = grid.steps();
    let n = setup.mesh.n_free();
    let constrained = setup.constraint != ConstraintMode::Free;
    if state.u.len() != steps + 1 {
        return Err(Error::InvalidParameter("state trajectory does not match the time grid".into()));
    }

    let mut by_node: BTreeMap<usize, Vec<&Injection>> = BTreeMap::new();
    for inj in injections {
        by_node.entry(inj.node).or_default().push(inj);
    }
    let inject = |node: usize, z0: &mut Vec<f64>, m: &mut Vec<f64>| {
        for inj in by_node.get(&node).into_iter().flatten() {
            *z0 = axpy(z0, -1.0, &inj.d0);
            *m = axpy(m, -1.0, &inj.d1);
        }
    };
    let project = |m: &[f64], u: &[f64]| -> Result<Vec<f64>> {
        if constrained {
            let (_, g) = volume_and_gradient(&setup.mesh, u);
            Ok(solve_bordered(&ops.mass, &g, m, 0.0)?.x)
        } else {
            ops.mass.solve(m)
        }
    };

    let mut zeta0 = vec![Vec::new(); steps + 1];
    let mut zeta0_left = vec![Vec::new(); steps + 1];
    let mut zeta1 = vec![Vec::new(); steps + 1];
    let mut zeta1_left = vec![Vec::new(); steps + 1];
    let mut pi = vec![0.0; steps + 1];

    let mut z0: Vec<f64> = a0.iter().map(|x| -x).collect();
    let mut m: Vec<f64> = a1.iter().map(|x| -x).collect();
    zeta0[steps] = z0.clone();
    zeta1[steps] = project(&m, &state.u[steps])?;
    inject(steps, &mut z0, &mut m);
    zeta0_left[steps] = z0.clone();
    zeta1_left[steps] = if by_node.contains_key(&steps) { project(&m, &state.u[steps])? } else { zeta1[steps].clone() };

    let cn = setup.adjoint_scheme == AdjointScheme::CrankNicolson;
    let mut k_next = ops.elastic(setup, &state.u[steps])?.1;
    let mut z1_next = zeta1_left[steps].clone();
    for k in (0..steps).rev() {
        let dt = grid.step(k);
        let (_, kk) = ops.elastic(setup, &state.u[k])?;
        let g = if constrained { Some(volume_and_gradient(&setup.mesh, &state.u[k]).1) } else { None };
        let solve = |q: &Tridiag, rhs: &[f64]| -> Result<(Vec<f64>, f64)> {
            match &g {
                Some(g) => solve_bordered(q, g, rhs, 0.0).map(|s| (s.x, s.multiplier)),
                None => Ok((q.solve(rhs)?, 0.0)),
            }
        };
        let z1 = if cn {
            let q = ops.mass.scaled(2.0 / dt).axpy(1.0, &ops.damping).axpy(0.5 * dt, &kk);
            let ad = ops.damping.matvec(&z1_next);
            let kz = k_next.matvec(&z1_next);
            let rhs: Vec<f64> = (0..n).map(|i| 2.0 * m[i] / dt - ad[i] - 0.5 * dt * kz[i] + 2.0 * z0[i]).collect();
            let (z1, mult) = solve(&q, &rhs)?;
            let kz1 = kk.matvec(&z1);
            let gv = g.as_ref();
            z0 = (0..n)
                .map(|i| z0[i] - 0.5 * dt * (kz1[i] + kz[i]) - gv.map_or(0.0, |g| mult * g[i]))
                .collect();
            pi[k] = mult / dt;
            z1
        } else {
            let q: Tridiag = ops.mass.axpy(dt, &ops.damping).axpy(dt * dt, &kk);
            let rhs = axpy(&m, dt, &z0);
            let (z1, mult) = solve(&q, &rhs)?;
            let az = ops.mass.scaled(1.0 / dt).axpy(1.0, &ops.damping).matvec(&z1);
            z0 = (0..n).map(|i| az[i] - m[i] / dt).collect();
            pi[k] = mult / (dt * dt);
            z1
        };
        m = ops.mass.matvec(&z1);
        zeta0[k] = z0.clone();
        zeta1[k] = z1;
        if by_node.contains_key(&k) {
            inject(k, &mut z0, &mut m);
            zeta0_left[k] = z0.clone();
            zeta1_left[k] = project(&m, &state.u[k])?;
        } else {
            zeta0_left[k] = zeta0[k].clone();
            zeta1_left[k] = zeta1[k].clone();
        }
        z1_next = zeta1_left[k].clone();
        k_next = kk;
    }

    let mut jumps: Vec<(usize, f64)> = Vec::new();
    for inj in injections {
        jumps.push((inj.node, inj.d0.iter().chain(&inj.d1).map(|x| x.abs()).sum()));
    }
    Ok(AdjointTrajectory { times: grid.times(), zeta0, zeta0_left, zeta1, zeta1_left, pi, jumps, jump_applied_at: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{recover_pressure_diagnostic, solve_forward, ForwardData};
    use crate::linalg::dot;
    use approx::assert_relative_eq;

    const SVK: StrainEnergyModel = StrainEnergyModel::SaintVenantKirchhoff { lambda: 0.05, mu: 0.05 };

    fn setup(elements: usize, t_end: f64, dt: f64) -> ForwardSetup {
        ForwardSetup::new(Mesh1D::uniform(elements, (0.75, 1.0)).unwrap(), SVK, 2e-4, TimeGrid::new(t_end, dt).unwrap())
    }

    fn controlled_state(s: &ForwardSetup, amp: f64) -> StateTrajectory {
        let n_om = s.mesh.n_omega();
        let c: Vec<Vec<f64>> = (0..s.grid.steps())
            .map(|k| vec![amp * (1.0 + (0.9 * s.grid.time(k)).sin()); n_om])
            .collect();
        let z = vec![0.0; s.mesh.n_free()];
        solve_forward(s, &ForwardData { control: Some(&c), surface_load: None, body_force: None, u0: &z, udot0: &z }).unwrap()
    }

    #[test]
    fn sensitivity_at_rest() {
        let m = Mesh1D::uniform(10, (0.75, 1.0)).unwrap();
        let z = vec![0.0; 10];
        let (du, dv) = pressure_sensitivity(&m, &SVK, 2e-4, &z, &z).unwrap();
        let w = m.interpolate(|x| x * x);
        // -kappa w'(1) with the last-element slope
        assert_relative_eq!(dot(&dv, &w), -2e-4 * (1.0 - 0.81) / 0.1, epsilon = 1e-15);
        assert_relative_eq!(dot(&du, &w), -0.15 * (1.0 - 0.81) / 0.1, epsilon = 1e-14);
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        assert_relative_eq!(dot(&du, &w2), 2.0 * dot(&du, &w), epsilon = 1e-15);
    }

    #[test]
    fn sensitivity_matches_fd_of_diagnostic() {
        let m = Mesh1D::uniform(10, (0.75, 1.0)).unwrap();
        let models = [SVK, StrainEnergyModel::Fung { w0: 0.0, beta: 0.4, gamma: 1.5 }, StrainEnergyModel::Ogden { gamma: 1.6 }];
        for model in models {
            let u = m.interpolate(|x| 0.1 * x * x);
            let v = m.interpolate(|x| 0.3 * x.sin());
            let (du, dv) = pressure_sensitivity(&m, &model, 2e-4, &u, &v).unwrap();
            for i in [8, 9] {
                let h = 1e-6;
                let mut up = u.clone();
                up[i] += h;
                let mut dn = u.clone();
                dn[i] -= h;
                let fd = (recover_pressure_diagnostic(&m, &model, 2e-4, &up, &v).unwrap()
                    - recover_pressure_diagnostic(&m, &model, 2e-4, &dn, &v).unwrap())
                    / (2.0 * h);
                assert!((fd - du[i]).abs() <= 1e-5 * du[i].abs(), "{model:?}: {fd} {}", du[i]);
                let mut vp = v.clone();
                vp[i] += h;
                let fd = (recover_pressure_diagnostic(&m, &model, 2e-4, &u, &vp).unwrap()
                    - recover_pressure_diagnostic(&m, &model, 2e-4, &u, &v).unwrap())
                    / h;
                assert!((fd - dv[i]).abs() <= 1e-5 * dv[i].abs());
            }
        }
    }

    #[test]
    fn jump_weights() {
        let g = TimeGrid::new(1.0, 0.1).unwrap();
        let [(i, a), (j, b)] = jump_interpolation(0.3, &g);
        assert_eq!((i, j), (3, 4));
        assert!((a - 1.0).abs() < 1e-12 && b.abs() < 1e-12);
        let [(_, a), (_, b)] = jump_interpolation(0.35, &g);
        assert_relative_eq!(a, 0.5, epsilon = 1e-12);
        assert_relative_eq!(b, 0.5, epsilon = 1e-12);
        for t in [0.01, 0.123, 0.77, 0.999] {
            let [(_, a), (_, b)] = jump_interpolation(t, &g);
            assert_relative_eq!(a + b, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_data_gives_zero_adjoint() {
        let s = setup(20, 1.0, 0.05);
        let state = controlled_state(&s, 0.01);
        let adj = solve_adjoint_with_sources(&s, &state, &[0.0; 20], &[0.0; 20], &[]).unwrap();
        assert!(adj.zeta0.iter().chain(&adj.zeta1).flatten().all(|v| *v == 0.0));
        assert!(adj.pi.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn adjoint_vanishes_after_tau() {
        let s = setup(20, 2.0, 0.05);
        let state = controlled_state(&s, 0.01);
        let tau = 1.03;
        let adj = solve_adjoint(&s, &state, tau, &ObjectiveConfig::pressure_at_tau(2e-3)).unwrap();
        for k in 0..=s.grid.steps() {
            let zero = adj.zeta0[k].iter().chain(&adj.zeta1[k]).all(|v| *v == 0.0);
            // the later jump node is 21; zeta(t_21+) is still zero
            assert_eq!(zero, k >= 21, "step {k}");
        }
        assert!(adj.zeta1_left[21].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn adjoint_satisfies_constraint() {
        let s = setup(20, 2.0, 0.05);
        let state = controlled_state(&s, 0.01);
        let adj = solve_adjoint(&s, &state, 1.0, &ObjectiveConfig::pressure_at_tau(2e-3)).unwrap();
        for k in 0..=s.grid.steps() {
            let (_, g) = volume_and_gradient(&s.mesh, &state.u[k]);
            assert!(dot(&g, &adj.zeta1[k]).abs() <= 1e-12);
            assert!(dot(&g, &adj.zeta1_left[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn invalid_tau_rejected() {
        let s = setup(10, 1.0, 0.1);
        let state = controlled_state(&s, 0.0);
        assert!(solve_adjoint(&s, &state, 0.0, &ObjectiveConfig::pressure_at_tau(2e-3)).is_err());
        assert!(solve_adjoint(&s, &state, 1.0, &ObjectiveConfig::pressure_at_tau(2e-3)).is_err());
        let bad = ObjectiveConfig { alpha: 0.0, ..ObjectiveConfig::pressure_at_tau(1.0) };
        assert!(solve_adjoint(&s, &state, 0.5, &bad).is_err());
    }

    #[test]
    fn transposition_identity() {
        use nalgebra::{DMatrix, DVector};
        use rand::{Rng, SeedableRng};
        let mut s = setup(12, 1.0, 0.05);
        s.adjoint_scheme = AdjointScheme::ImplicitEuler;
        let state = controlled_state(&s, 0.02);
        let n = 12;
        let steps = s.grid.steps();
        let dt = s.grid.step(0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut rv = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let a0 = rv(n);
        let a1 = rv(n);
        let inj = vec![Injection { node: 7, d0: rv(n), d1: rv(n) }, Injection { node: 8, d0: rv(n), d1: rv(n) }];
        let adj = solve_adjoint_with_sources(&s, &state, &a0, &a1, &inj).unwrap();
        let f0: Vec<Vec<f64>> = (0..steps).map(|_| rv(n)).collect();
        let f1: Vec<Vec<f64>> = (0..steps).map(|_| rv(n)).collect();

        // independent dense implicit Euler for the frozen linearized system
        let ops = Operators::new(&s).unwrap();
        let m = ops.mass.to_dense();
        let a = ops.damping.to_dense();
        let mut z0 = vec![DVector::zeros(n)];
        let mut z1 = vec![DVector::zeros(n)];
        for k in 0..steps {
            let kk = crate::fem::tangent_stiffness(&s.mesh, &s.model, &state.u[k]).unwrap().to_dense();
            let (_, g) = volume_and_gradient(&s.mesh, &state.u[k]);
            let q = &m + &a * dt + kk * (dt * dt);
            let mut big = DMatrix::zeros(n + 1, n + 1);
            big.view_mut((0, 0), (n, n)).copy_from(&q);
            for i in 0..n {
                big[(i, n)] = g[i];
                big[(n, i)] = g[i];
            }
            let f0k = DVector::from_vec(f0[k].clone());
            let f1k = DVector::from_vec(f1[k].clone());
            let rhs = (&m + &a * dt) * &z0[k] + &m * &z1[k] * dt + (&m + &a * dt) * &f0k * dt + f1k * (dt * dt);
            let mut r = rhs.as_slice().to_vec();
            r.push(0.0);
            let sol = big.lu().solve(&DVector::from_vec(r)).unwrap();
            let next = sol.rows(0, n).into_owned();
            z1.push((&next - &z0[k]) / dt - f0k);
            z0.push(next);
        }
        let pair = |c: &[f64], z: &DVector<f64>| -> f64 { c.iter().zip(z.iter()).map(|(x, y)| x * y).sum() };
        let mut ell = pair(&a0, &z0[steps]) + pair(&a1, &z1[steps]);
        for i in &inj {
            ell += pair(&i.d0, &z0[i.node]) + pair(&i.d1, &z1[i.node]);
        }
        let duality: f64 = (0..steps).map(|k| dt * (dot(&adj.zeta0[k], &f0[k]) + dot(&adj.zeta1[k], &f1[k]))).sum();
        println!("{duality} {ell}");
        assert!((duality + ell).abs() <= 1e-8 * ell.abs());
    }
}
