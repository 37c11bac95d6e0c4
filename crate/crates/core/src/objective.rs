//! Objective, Hamiltonian and adjoint gradient in `(xi, tau)`.
//!
//! Time is discretized on a uniform grid of the reference interval
//! `s in [0, 2]` pushed forward by the warp, so `tau` is always a time node and
//! the control, one value per reference cell, is the same array in both
//! frames. The derivative in `tau` moves the nodes at fixed reference control.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjoint::{observation_weights, solve_adjoint, AdjointTrajectory, ObjectiveConfig, PressureObjective};
use crate::error::{Error, Result};
use crate::fem::{control_mass, volume_and_gradient, ControlOperator};
use crate::forward::{fmt, solve_forward, ForwardData, ForwardSetup, Operators, StateTrajectory, TimeGrid};
use crate::linalg::{dot, Tridiag};
use crate::warp::{mu, mu_dot, tau_weight, warped_grid, WarpParams};

/// Control values on the omega nodes, one row per time cell.
pub type ControlGrid = Vec<Vec<f64>>;

pub type SurfaceLoad = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Everything needed to evaluate `J(xi, tau)` and its gradient. The grid of
/// `setup` fixes the horizon and the number of steps; its nodes are replaced
/// by the warped ones for each `tau`.
#[derive(Clone)]
pub struct ControlProblem {
    pub setup: ForwardSetup,
    pub objective: ObjectiveConfig,
    pub eps: f64,
    pub eps_tilde: f64,
    pub u0: Vec<f64>,
    pub udot0: Vec<f64>,
    pub surface_load: Option<SurfaceLoad>,
}

/// Forward solve together with the objective value.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub j: f64,
    pub state: StateTrajectory,
    pub control: ControlGrid,
    pub warp: WarpParams,
    /// Setup on the warped grid of this `tau`.
    pub setup: ForwardSetup,
}

/// Gradient of `J` in the reference control and in `tau`.
#[derive(Clone, Debug)]
pub struct GradientPair {
    /// Dual (covector) form: pairs with a control increment by plain summation.
    pub xi_covector: ControlGrid,
    /// Riesz representative in `L2(omega x (0, 2))` with the reference time weight.
    pub xi: ControlGrid,
    pub tau: f64,
}

impl ControlProblem {
    /// Zero initial data and the warp window implied by the objective.
    pub fn new(setup: ForwardSetup, objective: ObjectiveConfig) -> Self {
        let n = setup.mesh.n_free();
        let (eps, eps_tilde) = match objective.pressure {
            Some(PressureObjective::DifferenceQuotient { eps }) => (eps, 2.0 * eps / setup.grid.t_end()),
            _ => (0.0, 0.0),
        };
        Self { setup, objective, eps, eps_tilde, u0: vec![0.0; n], udot0: vec![0.0; n], surface_load: None }
    }

    pub fn cells(&self) -> usize {
        self.setup.grid.steps()
    }

    pub fn n_omega(&self) -> usize {
        self.setup.mesh.n_omega()
    }

    pub fn zero_control(&self) -> ControlGrid {
        vec![vec![0.0; self.n_omega()]; self.cells()]
    }

    /// Reference time weight of one control cell, `T ds / 2`.
    pub fn cell_weight(&self) -> f64 {
        self.setup.grid.t_end() / self.cells() as f64
    }

    pub fn warp(&self, tau: f64) -> Result<WarpParams> {
        WarpParams::new(self.setup.grid.t_end(), tau, self.eps, self.eps_tilde)
    }

    pub fn grid(&self, tau: f64) -> Result<TimeGrid> {
        warped_grid(&self.warp(tau)?, self.cells())
    }

    /// The setup with the time nodes of `tau`.
    pub fn setup_at(&self, tau: f64) -> Result<ForwardSetup> {
        let mut s = self.setup.clone();
        s.grid = self.grid(tau)?;
        Ok(s)
    }

    /// Midpoints of the reference cells in `s`.
    pub fn cell_centers(&self) -> Vec<f64> {
        let n = self.cells();
        (0..n).map(|j| 2.0 * (j as f64 + 0.5) / n as f64).collect()
    }

    /// Forward solve on the grid of `setup`.
    pub fn simulate(&self, setup: &ForwardSetup, control: &[Vec<f64>]) -> Result<StateTrajectory> {
        let g = self.surface_load.clone();
        let gf = move |t: f64| g.as_ref().map_or(0.0, |f| f(t));
        let data = ForwardData {
            control: Some(control),
            surface_load: self.surface_load.as_ref().map(|_| &gf as &dyn Fn(f64) -> f64),
            body_force: None,
            u0: &self.u0,
            udot0: &self.udot0,
        };
        solve_forward(setup, &data)
    }

    /// `J` for a reference control `xi_s` and switch time `tau`.
    pub fn evaluate(&self, xi_s: &[Vec<f64>], tau: f64) -> Result<Evaluation> {
        self.check_shape(xi_s)?;
        let warp = self.warp(tau)?;
        let setup = self.setup_at(tau)?;
        let control = xi_s.to_vec();
        let state = self.simulate(&setup, &control)?;
        let j = evaluate_j(&setup, &state, &control, tau, &self.objective)?;
        Ok(Evaluation { j, state, control, warp, setup })
    }

    /// `J` and its adjoint gradient.
    pub fn gradient(&self, xi_s: &[Vec<f64>], tau: f64) -> Result<(Evaluation, AdjointTrajectory, GradientPair)> {
        let ev = self.evaluate(xi_s, tau)?;
        let adj = solve_adjoint(&ev.setup, &ev.state, tau, &self.objective)?;
        let grad = gradient(self, &ev, &adj)?;
        Ok((ev, adj, grad))
    }

    fn check_shape(&self, xi_s: &[Vec<f64>]) -> Result<()> {
        if xi_s.len() != self.cells() || xi_s.iter().any(|r| r.len() != self.n_omega()) {
            return Err(Error::InvalidParameter(format!(
                "control must be {} cells x {} omega nodes",
                self.cells(),
                self.n_omega()
            )));
        }
        Ok(())
    }

    /// `L2` inner product of two reference controls.
    pub fn inner(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let mw = control_mass(&self.setup.mesh);
        let w = self.cell_weight();
        a.iter().zip(b).map(|(x, y)| w * mw.bilinear(x, y)).sum()
    }

    /// Combined norm `sqrt(|G_xi|^2 + G_tau^2)`.
    pub fn gradient_norm(&self, g: &GradientPair) -> f64 {
        (self.inner(&g.xi, &g.xi) + g.tau * g.tau).sqrt()
    }

    fn control_from(&self, f: impl Fn(f64, f64) -> f64) -> ControlGrid {
        let mesh = &self.setup.mesh;
        let xs: Vec<f64> = mesh.omega_nodes().iter().map(|&k| mesh.nodes()[k]).collect();
        self.cell_centers().iter().map(|&s| xs.iter().map(|&x| f(s, x)).collect()).collect()
    }

    /// `amp sin(pi s) (1 + x)`.
    pub fn smooth_control(&self, amp: f64) -> ControlGrid {
        self.control_from(|s, x| amp * (PI * s).sin() * (1.0 + x))
    }

    /// Deterministic smooth direction number `i`.
    pub fn mode_direction(&self, i: usize) -> ControlGrid {
        let (a, b) = self.setup.mesh.control_window();
        let (p, q) = ((i % 4 + 1) as f64, (i / 4) as f64);
        self.control_from(|s, x| (0.5 * PI * p * s).sin() * (PI * q * (x - a) / (b - a)).cos())
    }

    /// Smooth directions with coefficients drawn from a seeded generator.
    pub fn random_directions(&self, n: usize, seed: u64) -> Vec<ControlGrid> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<ControlGrid> = (0..12).map(|i| self.mode_direction(i)).collect();
        (0..n)
            .map(|_| {
                let c: Vec<f64> = modes.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut d = self.zero_control();
                for (m, ci) in modes.iter().zip(&c) {
                    for (row, mrow) in d.iter_mut().zip(m) {
                        for (v, mv) in row.iter_mut().zip(mrow) {
                            *v += ci * mv;
                        }
                    }
                }
                d
            })
            .collect()
    }
}

/// Pressure observed at `t` by linear interpolation of the boundary pressure.
pub fn pressure_at(state: &StateTrajectory, setup: &ForwardSetup, t: f64) -> f64 {
    let grid = &setup.grid;
    let i = grid.interval(t);
    let b = ((t - grid.time(i)) / grid.step(i)).clamp(0.0, 1.0);
    (1.0 - b) * state.boundary_pressure[i] + b * state.boundary_pressure[i + 1]
}

/// `J = sum_k dt c(xi_k) + phi1(tau) + phi2(T)` with `c = -(alpha/2) |xi|^2_{L2(omega)}`.
pub fn evaluate_j(
    setup: &ForwardSetup,
    state: &StateTrajectory,
    control: &[Vec<f64>],
    tau: f64,
    objective: &ObjectiveConfig,
) -> Result<f64> {
    objective.validate()?;
    let grid = &setup.grid;
    let window = objective.pressure.map_or(0.0, |p| p.window());
    if !(tau > 0.0 && tau + window < grid.t_end()) {
        return Err(Error::InvalidParameter(format!("tau = {tau} outside (0, T)")));
    }
    if control.len() != grid.steps() || state.u.len() != grid.steps() + 1 {
        return Err(Error::InvalidParameter("trajectory and control do not match the time grid".into()));
    }
    let mw = control_mass(&setup.mesh);
    let running: f64 =
        control.iter().enumerate().map(|(k, x)| -0.5 * objective.alpha * mw.bilinear(x, x) * grid.step(k)).sum();
    let mut j = running;
    if let Some(p) = &objective.pressure {
        j += observation_weights(p, tau, grid).iter().map(|(&k, &w)| w * state.boundary_pressure[k]).sum::<f64>();
    }
    j += terminal_value(setup, state, objective)?;
    Ok(j)
}

fn terminal_value(setup: &ForwardSetup, state: &StateTrajectory, objective: &ObjectiveConfig) -> Result<f64> {
    let Some(tc) = objective.terminal else { return Ok(0.0) };
    let ops = Operators::new(setup)?;
    let k = setup.grid.steps();
    Ok(-0.5 * tc.weight_u * ops.mass.bilinear(&state.u[k], &state.u[k])
        - 0.5 * tc.weight_udot * ops.mass.bilinear(&state.udot[k], &state.udot[k]))
}

/// `J` in reference time: `int_0^2 mu_dot c(xi~) ds + phi1(mu(1)) + phi2(mu(2))`
/// for a control piecewise constant on the reference cells `[s_j, s_j+1]`.
pub fn evaluate_j_warped(
    setup: &ForwardSetup,
    state: &StateTrajectory,
    s_nodes: &[f64],
    xi_s: &[Vec<f64>],
    warp: &WarpParams,
    objective: &ObjectiveConfig,
) -> Result<f64> {
    if s_nodes.len() != xi_s.len() + 1 {
        return Err(Error::InvalidParameter("need one more reference node than cells".into()));
    }
    let mw = control_mass(&setup.mesh);
    let kinks = [1.0, 1.0 + warp.eps_tilde];
    let mut running = 0.0;
    for (j, x) in xi_s.iter().enumerate() {
        let c = -0.5 * objective.alpha * mw.bilinear(x, x);
        let (a, b) = (s_nodes[j], s_nodes[j + 1]);
        let mut cuts = vec![a];
        cuts.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
        cuts.push(b);
        for w in cuts.windows(2) {
            running += mu_dot(0.5 * (w[0] + w[1]), warp) * (w[1] - w[0]) * c;
        }
    }
    let mut j = running;
    if let Some(p) = &objective.pressure {
        let t0 = mu(1.0, warp)?;
        j += match p {
            PressureObjective::AtTau => pressure_at(state, setup, t0),
            PressureObjective::DifferenceQuotient { eps } => {
                let t1 = mu(1.0 + warp.eps_tilde, warp)?;
                (pressure_at(state, setup, t1) - pressure_at(state, setup, t0)) / eps
            }
        };
    }
    j += terminal_value(setup, state, objective)?;
    Ok(j)
}

/// The terms of the Hamiltonian on one time step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HamiltonianTerms {
    pub running_cost: f64,
    /// `-<zeta1, f(xi)>`.
    pub control: f64,
    /// `-<zeta1, g>`.
    pub surface: f64,
    /// `-<zeta0, y1>`.
    pub velocity: f64,
    /// `<grad zeta1, kappa grad y1 + sigma(grad y0)>`.
    pub stress: f64,
    /// `pi int det Phi(y0)`.
    pub volume: f64,
    /// `pi (int det Phi(y0) - int det Phi(u0))`.
    pub volume_defect: f64,
    /// `p <zeta1, cof(Phi(y0)) n>`.
    pub boundary: f64,
}

impl HamiltonianTerms {
    /// Sum of the seven terms with the full volume term.
    pub fn value(&self) -> f64 {
        self.running_cost + self.control + self.surface + self.velocity + self.stress + self.volume + self.boundary
    }

    /// Sum with the volume defect in place of the volume, as it enters the
    /// derivative in `tau`.
    pub fn gradient_value(&self) -> f64 {
        self.running_cost + self.control + self.surface + self.velocity + self.stress + self.volume_defect + self.boundary
    }
}

/// Evaluator of the Hamiltonian on the steps of a trajectory.
pub struct Hamiltonian<'a> {
    setup: &'a ForwardSetup,
    state: &'a StateTrajectory,
    adjoint: &'a AdjointTrajectory,
    control: &'a [Vec<f64>],
    objective: &'a ObjectiveConfig,
    ops: Operators,
    mw: Tridiag,
    surface: Option<SurfaceLoad>,
    v0: f64,
}

impl<'a> Hamiltonian<'a> {
    pub fn new(
        setup: &'a ForwardSetup,
        state: &'a StateTrajectory,
        adjoint: &'a AdjointTrajectory,
        control: &'a [Vec<f64>],
        objective: &'a ObjectiveConfig,
        surface: Option<SurfaceLoad>,
    ) -> Result<Self> {
        let v0 = volume_and_gradient(&setup.mesh, &state.u[0]).0;
        Ok(Self {
            setup,
            state,
            adjoint,
            control,
            objective,
            ops: Operators::new(setup)?,
            mw: control_mass(&setup.mesh),
            surface,
            v0,
        })
    }

    /// Terms at the midpoint of step `k` (trapezoidal in the state, mean adjoint).
    pub fn at_step(&self, k: usize) -> Result<HamiltonianTerms> {
        let mesh = &self.setup.mesh;
        let (s, a) = (self.state, self.adjoint);
        let mid = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect() };
        let y1 = mid(&s.udot[k], &s.udot[k + 1]);
        let z0 = a.zeta0_mean(k);
        let z1 = a.zeta1_mean(k);
        let xi = &self.control[k];
        let (r0, _) = self.ops.elastic(self.setup, &s.u[k])?;
        let (r1, _) = self.ops.elastic(self.setup, &s.u[k + 1])?;
        let r = mid(&r0, &r1);
        let damp = self.ops.damping.matvec(&y1);
        let (vol_a, g_a) = volume_and_gradient(mesh, &s.u[k]);
        let (vol_b, _) = volume_and_gradient(mesh, &s.u[k + 1]);
        let vol = 0.5 * (vol_a + vol_b);
        let (t0, t1) = (self.setup.grid.time(k), self.setup.grid.time(k + 1));
        let g = self.surface.as_ref().map_or(0.0, |f| 0.5 * (f(t0) + f(t1)));
        let pi = a.pi[k];
        Ok(HamiltonianTerms {
            running_cost: -0.5 * self.objective.alpha * self.mw.bilinear(xi, xi),
            control: -dot(&z1, &self.ops.control.apply(xi)),
            surface: -z1[mesh.neumann_dof()] * g * mesh.normal_at_neumann(),
            velocity: -dot(&z0, &y1),
            stress: dot(&z1, &damp) + dot(&z1, &r),
            volume: pi * vol,
            volume_defect: pi * (vol - self.v0),
            boundary: s.pressure[k + 1] * dot(&z1, &g_a),
        })
    }
}

/// Stand-alone Hamiltonian at step `k`.
pub fn hamiltonian(
    setup: &ForwardSetup,
    state: &StateTrajectory,
    adjoint: &AdjointTrajectory,
    control: &[Vec<f64>],
    objective: &ObjectiveConfig,
    k: usize,
) -> Result<HamiltonianTerms> {
    Hamiltonian::new(setup, state, adjoint, control, objective, None)?.at_step(k)
}

/// Adjoint gradient at an evaluated point.
pub fn gradient(problem: &ControlProblem, ev: &Evaluation, adj: &AdjointTrajectory) -> Result<GradientPair> {
    let setup = &ev.setup;
    let grid = &setup.grid;
    let op = ControlOperator::new(&setup.mesh, setup.operator);
    let mw = control_mass(&setup.mesh);
    let alpha = problem.objective.alpha;

    let xi_covector: Vec<Vec<f64>> = (0..grid.steps())
        .map(|k| {
            let dt = grid.step(k);
            let bz = op.apply_transpose(&adj.zeta1_mean(k));
            let mx = mw.matvec(&ev.control[k]);
            mx.iter().zip(&bz).map(|(m, b)| dt * (-alpha * m - b)).collect()
        })
        .collect();
    let w = problem.cell_weight();
    let xi = xi_covector
        .iter()
        .map(|g| mw.solve(g).map(|x| x.iter().map(|v| v / w).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;

    // d t_k / d tau moves step k by tau_weight * dt_k
    let ham = Hamiltonian::new(setup, &ev.state, adj, &ev.control, &problem.objective, problem.surface_load.clone())?;
    let mut tau = 0.0;
    for k in 0..grid.steps() {
        let (t0, t1) = (grid.time(k), grid.time(k + 1));
        let weight = tau_weight(0.5 * (t0 + t1), &ev.warp) * (t1 - t0);
        if weight != 0.0 {
            tau += weight * ham.at_step(k)?.gradient_value();
        }
    }
    Ok(GradientPair { xi_covector, xi, tau })
}

/// One row of a finite-difference check.
#[derive(Clone, Debug, PartialEq)]
pub struct FdRow {
    pub direction: usize,
    pub h: f64,
    pub analytic: f64,
    pub fd: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FdReport {
    pub rows: Vec<FdRow>,
}

impl FdReport {
    /// Smallest relative error per direction.
    pub fn best(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(d, _)| *d == r.direction) {
                Some(e) => e.1 = e.1.min(r.rel_error),
                None => out.push((r.direction, r.rel_error)),
            }
        }
        out
    }

    pub fn worst_best(&self) -> f64 {
        self.best().iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["direction", "h", "analytic", "fd", "abs_error", "rel_error"])?;
        for r in &self.rows {
            w.write_record([r.direction.to_string(), fmt(r.h), fmt(r.analytic), fmt(r.fd), fmt(r.abs_error), fmt(r.rel_error)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A perturbation of `(xi~, tau)`.
#[derive(Clone, Debug)]
pub struct Direction {
    pub xi: ControlGrid,
    pub tau: f64,
}

/// Compares `<G, d>` with central differences of `J` over the step sizes `hs`.
pub fn fd_check(
    problem: &ControlProblem,
    xi_s: &[Vec<f64>],
    tau: f64,
    directions: &[Direction],
    hs: &[f64],
) -> Result<FdReport> {
    let (_, _, grad) = problem.gradient(xi_s, tau)?;
    let mut report = FdReport::default();
    for (d, dir) in directions.iter().enumerate() {
        let analytic: f64 =
            grad.xi_covector.iter().zip(&dir.xi).map(|(g, x)| dot(g, x)).sum::<f64>() + grad.tau * dir.tau;
        for &h in hs {
            let shifted = |sign: f64| -> Result<f64> {
                let xi: ControlGrid = xi_s
                    .iter()
                    .zip(&dir.xi)
                    .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + sign * h * y).collect())
                    .collect();
                Ok(problem.evaluate(&xi, tau + sign * h * dir.tau)?.j)
            };
            let fd = if dir.xi.iter().flatten().all(|v| *v == 0.0) && dir.tau == 0.0 {
                0.0
            } else {
                (shifted(1.0)? - shifted(-1.0)?) / (2.0 * h)
            };
            let abs_error = (analytic - fd).abs();
            let rel_error = if fd == 0.0 && analytic == 0.0 { 0.0 } else { abs_error / fd.abs().max(f64::MIN_POSITIVE) };
            report.rows.push(FdRow { direction: d, h, analytic, fd, abs_error, rel_error });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Mesh1D;
    use crate::forward::TimeGrid;
    use crate::tensor::StrainEnergyModel;
    use approx::assert_relative_eq;

    const SVK: StrainEnergyModel = StrainEnergyModel::SaintVenantKirchhoff { lambda: 0.05, mu: 0.05 };

    fn problem(elements: usize, t_end: f64, dt: f64) -> ControlProblem {
        let setup = ForwardSetup::new(Mesh1D::uniform(elements, (0.75, 1.0)).unwrap(), SVK, 2e-4, TimeGrid::new(t_end, dt).unwrap());
        ControlProblem::new(setup, ObjectiveConfig::pressure_at_tau(2e-3))
    }

    fn smooth_control(p: &ControlProblem, amp: f64) -> ControlGrid {
        p.smooth_control(amp)
    }

    #[test]
    fn zero_control_gives_zero_j_and_gradient() {
        let mut p = problem(20, 3.0, 0.05);
        p.objective.pressure = None;
        let (ev, _, g) = p.gradient(&p.zero_control(), 1.5).unwrap();
        assert_eq!(ev.j, 0.0);
        assert!(g.xi.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(g.tau, 0.0);
    }

    #[test]
    fn pressure_observation_at_rest_has_no_tau_derivative() {
        let p = problem(20, 3.0, 0.05);
        let (ev, _, g) = p.gradient(&p.zero_control(), 1.5).unwrap();
        assert_eq!(ev.j, 0.0);
        assert!(g.tau.abs() < 1e-14);
        assert!(g.xi.iter().flatten().any(|v| *v != 0.0));
    }

    #[test]
    fn running_cost_closed_form() {
        let setup = ForwardSetup::new(Mesh1D::uniform(100, (0.75, 1.0)).unwrap(), SVK, 2e-4, TimeGrid::new(15.0, 0.02).unwrap());
        let obj = ObjectiveConfig { alpha: 2e-3, pressure: None, terminal: None };
        let ones = vec![vec![1.0; setup.mesh.n_omega()]; 750];
        let state = StateTrajectory {
            u: vec![vec![0.0; 100]; 751],
            udot: vec![vec![0.0; 100]; 751],
            boundary_pressure: vec![0.0; 751],
            ..Default::default()
        };
        let j = evaluate_j(&setup, &state, &ones, 7.5, &obj).unwrap();
        assert_relative_eq!(j, -0.00375, epsilon = 1e-12);
    }

    #[test]
    fn difference_quotient_of_constant_pressure_vanishes() {
        let setup = ForwardSetup::new(Mesh1D::uniform(10, (0.75, 1.0)).unwrap(), SVK, 2e-4, TimeGrid::new(1.0, 0.1).unwrap());
        let obj = ObjectiveConfig { alpha: 1.0, pressure: Some(PressureObjective::DifferenceQuotient { eps: 0.1 }), terminal: None };
        let state = StateTrajectory {
            u: vec![vec![0.0; 10]; 11],
            udot: vec![vec![0.0; 10]; 11],
            boundary_pressure: vec![0.7; 11],
            ..Default::default()
        };
        let zero = vec![vec![0.0; setup.mesh.n_omega()]; 10];
        assert!(evaluate_j(&setup, &state, &zero, 0.43, &obj).unwrap().abs() < 1e-14);
    }

    #[test]
    fn hamiltonian_with_zero_adjoint_is_cost_plus_volume() {
        let p = problem(20, 2.0, 0.05);
        let xi = smooth_control(&p, 0.01);
        let ev = p.evaluate(&xi, 1.0).unwrap();
        let n = p.setup.mesh.n_free();
        let zeros = vec![vec![0.0; n]; 41];
        let adj = AdjointTrajectory {
            times: p.setup.grid.times(),
            zeta0: zeros.clone(),
            zeta0_left: zeros.clone(),
            zeta1: zeros.clone(),
            zeta1_left: zeros,
            pi: vec![0.0; 41],
            ..Default::default()
        };
        let h = hamiltonian(&p.setup, &ev.state, &adj, &ev.control, &p.objective, 10).unwrap();
        let mw = control_mass(&p.setup.mesh);
        assert_relative_eq!(h.value(), -1e-3 * mw.bilinear(&ev.control[10], &ev.control[10]), epsilon = 1e-18);
    }

    #[test]
    fn hamiltonian_constraint_term_vanishes() {
        let p = problem(20, 2.0, 0.05);
        let xi = smooth_control(&p, 0.02);
        let (ev, adj, _) = p.gradient(&xi, 1.0).unwrap();
        for k in 0..40 {
            let h = hamiltonian(&p.setup, &ev.state, &adj, &ev.control, &p.objective, k).unwrap();
            assert!(h.boundary.abs() <= 1e-12);
            assert!(h.volume_defect.abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_agrees_with_fd_on_short_horizon() {
        let p = problem(20, 3.0, 0.01);
        let xi = smooth_control(&p, 0.02);
        let d_xi = smooth_control(&p, 1.0);
        let dirs = [Direction { xi: d_xi, tau: 0.0 }, Direction { xi: p.zero_control(), tau: 1.0 }];
        let report = fd_check(&p, &xi, 1.5, &dirs, &[1e-3, 0.02]).unwrap();
        for (d, e) in report.best() {
            assert!(e < 5e-2, "direction {d}: {e} {:?}", report.rows);
        }
    }

    #[test]
    fn zero_direction_gives_zero_difference() {
        let p = problem(10, 1.0, 0.05);
        let xi = smooth_control(&p, 0.02);
        let report = fd_check(&p, &xi, 0.5, &[Direction { xi: p.zero_control(), tau: 0.0 }], &[1e-3]).unwrap();
        assert_eq!(report.rows[0].fd, 0.0);
        assert_eq!(report.rows[0].abs_error, 0.0);
    }

    #[test]
    fn warped_and_physical_j_agree() {
        let setup = ForwardSetup::new(Mesh1D::uniform(20, (0.75, 1.0)).unwrap(), SVK, 2e-4, TimeGrid::new(2.0, 0.05).unwrap());
        let obj = ObjectiveConfig { alpha: 2e-3, pressure: Some(PressureObjective::DifferenceQuotient { eps: 0.05 }), terminal: None };
        let p = ControlProblem::new(setup, obj);
        let xi = smooth_control(&p, 0.02);
        for tau in [0.93, 1.0, 1.37] {
            let ev = p.evaluate(&xi, tau).unwrap();
            let s_nodes: Vec<f64> =
                ev.setup.grid.times().iter().map(|&t| crate::warp::mu_inv(t, &ev.warp).unwrap()).collect();
            let jw = evaluate_j_warped(&ev.setup, &ev.state, &s_nodes, &ev.control, &ev.warp, &p.objective).unwrap();
            assert!((jw - ev.j).abs() <= 1e-8 * ev.j.abs().max(1.0), "tau {tau}: {jw} vs {}", ev.j);
        }
    }

    #[test]
    fn stress_pairing_matches_closed_form() {
        use rand::{Rng, SeedableRng};
        let mesh = Mesh1D::uniform(30, (0.75, 1.0)).unwrap();
        let (lambda, mu) = (0.05, 0.05);
        let model = StrainEnergyModel::SaintVenantKirchhoff { lambda, mu };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u: Vec<f64> = (0..30).map(|_| rng.gen_range(-0.003..0.003)).collect();
            let z: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = crate::fem::internal_force(&mesh, &model, &u).unwrap();
            let full = |v: &[f64], i: usize| if i == 0 { 0.0 } else { v[i - 1] };
            let mut exact = 0.0;
            for e in 0..30 {
                let f = 1.0 + (full(&u, e + 1) - full(&u, e)) / mesh.h();
                let p1 = f * (lambda + 2.0 * mu) * 0.5 * (f * f - 1.0);
                exact += p1 * (full(&z, e + 1) - full(&z, e));
            }
            let got = dot(&z, &r);
            assert!((got - exact).abs() <= 1e-10 * exact.abs().max(1e-3), "{got} vs {exact}");
        }
    }
}
