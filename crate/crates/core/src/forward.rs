//! Crank-Nicolson integration of the constrained elastodynamic system
//!
//! ```text
//! M u'' + kappa A u' + r(u) + p grad V(u) = B xi + g e_N,   V(u(t)) = V(u0)
//! ```
//!
//! with Newton per step and the scalar constraint enforced either through a
//! bordered solve (default) or an augmented Lagrangian loop.

use std::io::Write;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_body_load, assemble_damping, assemble_elastic, assemble_mass, volume_and_gradient,
    ControlOperator, Mesh1D, OperatorKind,
};
use crate::linalg::{axpy, dot, norm_inf, solve_bordered, Tridiag};
use crate::tensor::{deformation_gradient, det_cof, sigma, Mat, StrainEnergyModel};

/// Time nodes `0 = t_0 < t_1 < ... < t_K = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Uniform grid `t_k = k dt`.
    pub fn new(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("time grid needs T > 0 and dt > 0 (T={t_end}, dt={dt})")));
        }
        let steps = (t_end / dt).round() as usize;
        if steps == 0 || (steps as f64 * dt - t_end).abs() > 1e-9 * t_end {
            return Err(Error::InvalidParameter(format!("T = {t_end} is not a multiple of dt = {dt}")));
        }
        let times = (0..=steps).map(|k| if k == steps { t_end } else { k as f64 * dt }).collect();
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("time nodes must start at 0 and increase strictly".into()));
        }
        Ok(Self { times })
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Length of step `k`, from `t_k` to `t_k+1`.
    pub fn step(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    pub fn max_step(&self) -> f64 {
        (0..self.steps()).map(|k| self.step(k)).fold(0.0, f64::max)
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    /// Index `i` with `t_i <= t <= t_{i+1}`, clamped to the last interval.
    /// Points within `1e-9` steps of a node count as that node.
    pub fn interval(&self, t: f64) -> usize {
        let last = self.steps() - 1;
        let i = self.times.partition_point(|&x| x <= t).saturating_sub(1).min(last);
        if i < last && (self.times[i + 1] - t).abs() <= 1e-9 * self.step(i) {
            i + 1
        } else {
            i
        }
    }

    /// Fractional position `i + (t - t_i)/(t_i+1 - t_i)`.
    pub fn position(&self, t: f64) -> f64 {
        let i = self.interval(t);
        i as f64 + ((t - self.times[i]) / self.step(i)).clamp(0.0, 1.0)
    }

    /// Grid index nearest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let i = self.interval(t);
        if t - self.times[i] <= self.times[i + 1] - t {
            i
        } else {
            i + 1
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintMode {
    /// Exact bordered solve each Newton iteration.
    Bordered,
    /// Penalty `rho` with multiplier update `p += rho (V - V0)`.
    AugmentedLagrangian { rho: f64, tol: f64, max_outer: usize },
    /// No volume constraint; the multiplier stays zero.
    Free,
}

impl ConstraintMode {
    pub fn augmented_default() -> Self {
        Self::AugmentedLagrangian { rho: 1e4, tol: 1e-10, max_outer: 50 }
    }
}

/// Elastic response used in the momentum balance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Response {
    Nonlinear,
    /// Linearized about the reference state: `r(u) = K(0) u`.
    Linearized,
}

/// Static description of a forward problem.
#[derive(Clone, Debug)]
pub struct ForwardSetup {
    pub mesh: Mesh1D,
    pub model: StrainEnergyModel,
    pub kappa: f64,
    pub grid: TimeGrid,
    pub operator: OperatorKind,
    pub constraint: ConstraintMode,
    pub response: Response,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub adjoint_scheme: AdjointScheme,
}

/// Time stepping of the backward adjoint system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AdjointScheme {
    ImplicitEuler,
    #[default]
    CrankNicolson,
}

impl ForwardSetup {
    pub fn new(mesh: Mesh1D, model: StrainEnergyModel, kappa: f64, grid: TimeGrid) -> Self {
        Self {
            mesh,
            model,
            kappa,
            grid,
            operator: OperatorKind::Plain,
            constraint: ConstraintMode::Bordered,
            response: Response::Nonlinear,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            adjoint_scheme: AdjointScheme::default(),
        }
    }
}

type ScalarFn<'a> = &'a dyn Fn(f64) -> f64;
type FieldFn<'a> = &'a dyn Fn(f64, f64) -> f64;

/// Time-dependent data of one forward run.
#[derive(Clone, Copy)]
pub struct ForwardData<'a> {
    /// Control values on the omega nodes, one row per time step (constant over
    /// the step). `None` means no control.
    pub control: Option<&'a [Vec<f64>]>,
    /// Surface load at `x = 1`.
    pub surface_load: Option<ScalarFn<'a>>,
    /// Body force `f(x, t)`.
    pub body_force: Option<FieldFn<'a>>,
    pub u0: &'a [f64],
    pub udot0: &'a [f64],
}

/// Nodal state and pressure at every time step.
#[derive(Clone, Debug, Default)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub udot: Vec<Vec<f64>>,
    /// Constraint multiplier. Entry `k >= 1` comes from the step ending at `t_k`.
    pub pressure: Vec<f64>,
    /// Boundary-flux pressure `-(kappa du'/dn + sigma(grad u) n)` at `x = 1`.
    pub boundary_pressure: Vec<f64>,
    pub volume_residual: Vec<f64>,
    pub newton_iterations: Vec<usize>,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_volume_residual(&self) -> f64 {
        self.volume_residual.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes one row per step: `t, u_1..u_N, udot_1..udot_N, p, p_boundary, V-V0`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.u.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("u_{i}")));
        header.extend((1..=n).map(|i| format!("udot_{i}")));
        header.extend(["pressure", "boundary_pressure", "volume_residual"].map(String::from));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![fmt(self.times[k])];
            row.extend(self.u[k].iter().map(|v| fmt(*v)));
            row.extend(self.udot[k].iter().map(|v| fmt(*v)));
            row.push(fmt(self.pressure[k]));
            row.push(fmt(self.boundary_pressure[k]));
            row.push(fmt(self.volume_residual[k]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `t, pressure, boundary_pressure`.
    pub fn write_pressure_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "pressure", "boundary_pressure"])?;
        for k in 0..self.len() {
            w.write_record([fmt(self.times[k]), fmt(self.pressure[k]), fmt(self.boundary_pressure[k])])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest decimal that round-trips the double.
pub(crate) fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Result of one bordered Newton solve.
#[derive(Clone, Debug)]
pub struct NewtonUpdate {
    pub u: Vec<f64>,
    pub multiplier: f64,
}

/// One Newton iteration on the bordered system
/// `[[J, g], [g^T, 0]] [du; p] = [-residual; -constraint_residual]`.
///
/// `residual` excludes the multiplier term, so `multiplier` is the full
/// multiplier rather than an increment.
pub fn newton_step(
    u: &[f64],
    residual: &[f64],
    jacobian: &Tridiag,
    constraint_grad: &[f64],
    constraint_residual: f64,
) -> Result<NewtonUpdate> {
    let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
    let sol = solve_bordered(jacobian, constraint_grad, &rhs, -constraint_residual)?;
    Ok(NewtonUpdate { u: axpy(u, 1.0, &sol.x), multiplier: sol.multiplier })
}

/// Boundary formula for the pressure at `x = 1`:
/// `p = -(1/|Gamma_N|) det(Phi)^-1 Phi^T (kappa du'/dn + sigma(grad u) n)`.
pub fn recover_pressure_diagnostic(
    mesh: &Mesh1D,
    model: &StrainEnergyModel,
    kappa: f64,
    u: &[f64],
    udot: &[f64],
) -> Result<f64> {
    let gu = Mat::scalar(mesh.boundary_gradient(u));
    let phi = deformation_gradient(&gu);
    let (det, _) = det_cof(&phi);
    if !(det > 0.0) {
        return Err(Error::NonInjective { det });
    }
    let n = mesh.normal_at_neumann();
    let flux = kappa * mesh.boundary_gradient(udot) * n + sigma(model, &gu)?.get(0, 0) * n;
    Ok(-(phi.transpose().get(0, 0) * flux) / det)
}

/// Pressure normalized by the deformed boundary measure `|cof(Phi) n|`.
pub fn deformed_boundary_pressure(
    mesh: &Mesh1D,
    model: &StrainEnergyModel,
    kappa: f64,
    u: &[f64],
    udot: &[f64],
) -> Result<f64> {
    let gu = Mat::scalar(mesh.boundary_gradient(u));
    let (det, cof) = det_cof(&deformation_gradient(&gu));
    if !(det > 0.0) {
        return Err(Error::NonInjective { det });
    }
    let n = mesh.normal_at_neumann();
    let measure = (cof.get(0, 0) * n).abs();
    let flux = kappa * mesh.boundary_gradient(udot) * n + sigma(model, &gu)?.get(0, 0) * n;
    Ok(-flux / measure)
}

/// Precomputed operators of a forward problem.
pub(crate) struct Operators {
    pub mass: Tridiag,
    pub damping: Tridiag,
    pub control: ControlOperator,
    pub k0: Option<Tridiag>,
}

impl Operators {
    pub fn new(setup: &ForwardSetup) -> Result<Self> {
        setup.model.validate()?;
        let n = setup.mesh.n_free();
        let k0 = match setup.response {
            Response::Linearized => Some(assemble_elastic(&setup.mesh, &setup.model, &vec![0.0; n])?.1),
            Response::Nonlinear => None,
        };
        Ok(Self {
            mass: assemble_mass(&setup.mesh),
            damping: assemble_damping(&setup.mesh, setup.kappa)?,
            control: ControlOperator::new(&setup.mesh, setup.operator),
            k0,
        })
    }

    /// Internal force and tangent for the chosen response.
    pub fn elastic(&self, setup: &ForwardSetup, u: &[f64]) -> Result<(Vec<f64>, Tridiag)> {
        match &self.k0 {
            Some(k0) => Ok((k0.matvec(u), k0.clone())),
            None => assemble_elastic(&setup.mesh, &setup.model, u),
        }
    }
}

struct StepOutcome {
    u: Vec<f64>,
    v: Vec<f64>,
    r: Vec<f64>,
    multiplier: f64,
    residuals: Vec<f64>,
}

struct Stepper<'a> {
    setup: &'a ForwardSetup,
    ops: &'a Operators,
    v0_ref: f64,
}

impl Stepper<'_> {
    /// `M (v - v_k)/dt + kappa A (v + v_k)/2 + (r + r_k)/2 - load` with
    /// `v = 2 (u - u_k)/dt - v_k`.
    #[allow(clippy::too_many_arguments)]
    fn residual(&self, dt: f64, u: &[f64], uk: &[f64], vk: &[f64], rk: &[f64], r: &[f64], load: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = (0..u.len()).map(|i| 2.0 * (u[i] - uk[i]) / dt - vk[i]).collect();
        let dv: Vec<f64> = (0..u.len()).map(|i| (v[i] - vk[i]) / dt).collect();
        let vsum: Vec<f64> = (0..u.len()).map(|i| v[i] + vk[i]).collect();
        let m = self.ops.mass.matvec(&dv);
        let a = self.ops.damping.matvec(&vsum);
        (0..u.len()).map(|i| m[i] + 0.5 * a[i] + 0.5 * (r[i] + rk[i]) - load[i]).collect()
    }

    fn jacobian(&self, dt: f64, k: &Tridiag) -> Tridiag {
        self.ops.mass.scaled(2.0 / (dt * dt)).axpy(1.0 / dt, &self.ops.damping).axpy(0.5, k)
    }

    fn advance(&self, step: usize, uk: &[f64], vk: &[f64], rk: &[f64], load: &[f64], p_guess: f64) -> Result<StepOutcome> {
        let setup = self.setup;
        let dt = setup.grid.step(step);
        let tol = setup.newton_tol * norm_inf(load).max(1.0);
        let vtol = 1e-12 * self.v0_ref.abs().max(1.0);
        let mut u = axpy(uk, dt, vk);
        let mut p = if setup.constraint == ConstraintMode::Free { 0.0 } else { p_guess };
        let mut residuals = Vec::new();
        let mut outer = 0;
        loop {
            let mut it = 0;
            loop {
                let (r, k) = self.ops.elastic(setup, &u)?;
                let base = self.residual(dt, &u, uk, vk, rk, &r, load);
                let (vol, g) = volume_and_gradient(&setup.mesh, &u);
                let cres = vol - self.v0_ref;
                let (full, jac_extra) = match setup.constraint {
                    ConstraintMode::Bordered => (axpy(&base, p, &g), None),
                    ConstraintMode::Free => (base.clone(), None),
                    ConstraintMode::AugmentedLagrangian { rho, .. } => {
                        (axpy(&base, p + rho * cres, &g), Some(rho))
                    }
                };
                let norm = norm_inf(&full);
                residuals.push(norm);
                if !norm.is_finite() {
                    return Err(Error::NewtonDivergence { step, iterations: it, residual: norm });
                }
                let constraint_ok = setup.constraint != ConstraintMode::Bordered || cres.abs() <= vtol;
                if norm <= tol && constraint_ok {
                    let v: Vec<f64> = (0..u.len()).map(|i| 2.0 * (u[i] - uk[i]) / dt - vk[i]).collect();
                    match setup.constraint {
                        ConstraintMode::AugmentedLagrangian { rho, tol: al_tol, max_outer } => {
                            if cres.abs() <= al_tol {
                                return Ok(StepOutcome { u, v, r, multiplier: p + rho * cres, residuals });
                            }
                            outer += 1;
                            if outer >= max_outer {
                                return Err(Error::NewtonDivergence { step, iterations: outer, residual: cres.abs() });
                            }
                            p += rho * cres;
                            break;
                        }
                        _ => return Ok(StepOutcome { u, v, r, multiplier: p, residuals }),
                    }
                }
                if it == setup.newton_max_iter {
                    return Err(Error::NewtonDivergence { step, iterations: it, residual: norm });
                }
                let jac = self.jacobian(dt, &k);
                match (setup.constraint, jac_extra) {
                    (ConstraintMode::Bordered, _) => {
                        let upd = newton_step(&u, &base, &jac, &g, cres)?;
                        u = upd.u;
                        p = upd.multiplier;
                    }
                    (_, Some(rho)) => {
                        // (J + rho g g^T) du = -full, by Sherman-Morrison
                        let jf = jac.solve(&full)?;
                        let jg = jac.solve(&g)?;
                        let coef = rho * dot(&g, &jf) / (1.0 + rho * dot(&g, &jg));
                        for i in 0..u.len() {
                            u[i] -= jf[i] - coef * jg[i];
                        }
                    }
                    _ => {
                        let du = jac.solve(&full)?;
                        u = axpy(&u, -1.0, &du);
                    }
                }
                it += 1;
            }
        }
    }
}

/// Load covector of step `k` (constant control, trapezoidal surface and body loads).
pub(crate) fn step_load(setup: &ForwardSetup, ops: &Operators, data: &ForwardData, k: usize) -> Vec<f64> {
    let n = setup.mesh.n_free();
    let mut load = match data.control {
        Some(c) => ops.control.apply(&c[k]),
        None => vec![0.0; n],
    };
    let (t0, t1) = (setup.grid.time(k), setup.grid.time(k + 1));
    if let Some(g) = data.surface_load {
        load[setup.mesh.neumann_dof()] += 0.5 * (g(t0) + g(t1)) * setup.mesh.normal_at_neumann();
    }
    if let Some(f) = data.body_force {
        let f0 = assemble_body_load(&setup.mesh, |x| f(x, t0));
        let f1 = assemble_body_load(&setup.mesh, |x| f(x, t1));
        for i in 0..n {
            load[i] += 0.5 * (f0[i] + f1[i]);
        }
    }
    load
}

fn check_inputs(setup: &ForwardSetup, data: &ForwardData) -> Result<()> {
    let n = setup.mesh.n_free();
    if data.u0.len() != n || data.udot0.len() != n {
        return Err(Error::InvalidParameter(format!("initial data must have {n} free nodal values")));
    }
    if let Some(c) = data.control {
        if c.len() != setup.grid.steps() {
            return Err(Error::InvalidParameter(format!(
                "control has {} time rows, grid has {} steps",
                c.len(),
                setup.grid.steps()
            )));
        }
        if let Some(row) = c.iter().find(|r| r.len() != setup.mesh.n_omega()) {
            return Err(Error::InvalidParameter(format!(
                "control row has {} values, omega has {} nodes",
                row.len(),
                setup.mesh.n_omega()
            )));
        }
        if c.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("control contains non-finite values".into()));
        }
    }
    Ok(())
}

/// Integrates the state system over the whole grid.
pub fn solve_forward(setup: &ForwardSetup, data: &ForwardData) -> Result<StateTrajectory> {
    check_inputs(setup, data)?;
    let ops = Operators::new(setup)?;
    let mesh = &setup.mesh;
    let (v0_ref, _) = volume_and_gradient(mesh, data.u0);
    let stepper = Stepper { setup, ops: &ops, v0_ref };

    let g0 = data.surface_load.map_or(0.0, |g| g(0.0));
    let compat = -recover_pressure_diagnostic(mesh, &setup.model, setup.kappa, data.u0, data.udot0)?;
    if (compat - g0).abs() > 1e-12 {
        warn!("initial data incompatible with the boundary condition: flux {compat:e} vs g(0) = {g0:e}");
    }

    let (r0, _) = ops.elastic(setup, data.u0)?;
    let p0 = initial_multiplier(setup, &ops, data, &r0)?;

    let steps = setup.grid.steps();
    let mut traj = StateTrajectory {
        times: setup.grid.times(),
        u: Vec::with_capacity(steps + 1),
        udot: Vec::with_capacity(steps + 1),
        pressure: Vec::with_capacity(steps + 1),
        boundary_pressure: Vec::with_capacity(steps + 1),
        volume_residual: Vec::with_capacity(steps + 1),
        newton_iterations: Vec::with_capacity(steps),
    };
    let record = |traj: &mut StateTrajectory, u: Vec<f64>, v: Vec<f64>, p: f64| -> Result<()> {
        traj.boundary_pressure.push(recover_pressure_diagnostic(mesh, &setup.model, setup.kappa, &u, &v)?);
        traj.volume_residual.push(volume_and_gradient(mesh, &u).0 - v0_ref);
        traj.pressure.push(p);
        traj.u.push(u);
        traj.udot.push(v);
        Ok(())
    };
    record(&mut traj, data.u0.to_vec(), data.udot0.to_vec(), p0)?;

    let mut rk = r0;
    let mut p = p0;
    for k in 0..steps {
        let load = step_load(setup, &ops, data, k);
        let out = stepper.advance(k, &traj.u[k], &traj.udot[k], &rk, &load, p)?;
        debug!("step {k}: {} Newton iterations", out.residuals.len() - 1);
        traj.newton_iterations.push(out.residuals.len() - 1);
        p = out.multiplier;
        rk = out.r;
        record(&mut traj, out.u, out.v, p)?;
    }
    Ok(traj)
}

/// Multiplier of the consistent initial acceleration: `M a + g p = F(0) - kappa A v0 - r(u0)`, `g^T a = 0`.
fn initial_multiplier(setup: &ForwardSetup, ops: &Operators, data: &ForwardData, r0: &[f64]) -> Result<f64> {
    if setup.constraint == ConstraintMode::Free {
        return Ok(0.0);
    }
    let mesh = &setup.mesh;
    let mut rhs = match data.control {
        Some(c) => ops.control.apply(&c[0]),
        None => vec![0.0; mesh.n_free()],
    };
    if let Some(g) = data.surface_load {
        rhs[mesh.neumann_dof()] += g(0.0) * mesh.normal_at_neumann();
    }
    if let Some(f) = data.body_force {
        rhs = axpy(&rhs, 1.0, &assemble_body_load(mesh, |x| f(x, 0.0)));
    }
    let damp = ops.damping.matvec(data.udot0);
    for i in 0..rhs.len() {
        rhs[i] -= damp[i] + r0[i];
    }
    let (_, g) = volume_and_gradient(mesh, data.u0);
    Ok(solve_bordered(&ops.mass, &g, &rhs, 0.0)?.multiplier)
}
