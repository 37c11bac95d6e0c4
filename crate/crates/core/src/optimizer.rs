//! Gradient ascent on `J(xi, tau)`: one Armijo backtracking step followed by
//! Barzilai-Borwein iterations.

use std::io::Write;

use log::{debug, info, warn};

use crate::error::{Error, Result};
use crate::forward::fmt;
use crate::objective::{ControlGrid, ControlProblem, GradientPair};

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub armijo_factor: f64,
    pub initial_step: f64,
    pub max_halvings: usize,
    pub stop_tol: f64,
    pub max_iters: usize,
    pub tau_bounds: (f64, f64),
    pub step_min: f64,
    pub step_max: f64,
    /// Weight of the `tau` block; `None` picks `T / |G_xi|` at the start.
    pub tau_scale: Option<f64>,
}

impl OptimizerConfig {
    pub fn for_horizon(t_end: f64) -> Self {
        Self {
            armijo_factor: 0.5,
            initial_step: 1.0,
            max_halvings: 60,
            stop_tol: 1e-10,
            max_iters: 200,
            tau_bounds: (0.02 * t_end, 0.98 * t_end),
            step_min: 1e-6,
            step_max: 1e2,
            tau_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: &str| Err(Error::config(k, m));
        if !(self.armijo_factor > 0.0 && self.armijo_factor < 1.0) {
            return bad("armijo_factor", "must lie in (0, 1)");
        }
        if !(self.tau_bounds.0 > 0.0 && self.tau_bounds.0 <= self.tau_bounds.1) {
            return bad("tau_bounds", "need 0 < tau_min <= tau_max");
        }
        if !(self.step_min > 0.0 && self.step_min <= self.step_max) {
            return bad("step_min", "need 0 < step_min <= step_max");
        }
        if !(self.initial_step > 0.0 && self.stop_tol >= 0.0) {
            return bad("initial_step", "must be positive");
        }
        if let Some(s) = self.tau_scale {
            if !(s > 0.0) {
                return bad("tau_scale", "must be positive");
            }
        }
        Ok(())
    }
}

/// A maximization problem on a flat vector with its own inner product.
pub trait AscentProblem {
    fn value(&mut self, x: &[f64]) -> Result<f64>;
    /// Riesz representative of the gradient in [`AscentProblem::inner`].
    fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>>;
    fn inner(&self, a: &[f64], b: &[f64]) -> f64;
    fn project(&self, _x: &mut [f64]) {}
    /// Norms used by the stopping rule and the log: the control part and the
    /// scalar part, with components pushing out of the feasible set dropped.
    fn gradient_parts(&self, x: &[f64], g: &[f64]) -> (f64, f64);
    /// Called once with the first gradient.
    fn calibrate(&mut self, _g0: &[f64]) {}
}

fn stationarity<P: AscentProblem + ?Sized>(p: &P, x: &[f64], g: &[f64]) -> f64 {
    let (a, b) = p.gradient_parts(x, g);
    (a * a + b * b).sqrt()
}

fn step_to<P: AscentProblem + ?Sized>(p: &P, x: &[f64], g: &[f64], s: f64) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + s * b).collect();
    p.project(&mut y);
    y
}

#[derive(Clone, Debug, PartialEq)]
pub struct BbStep {
    pub step: f64,
    pub fallback: bool,
}

/// Long-step BB for ascent: `s = -<dx, dx> / <dx, dg>`, clamped. A
/// non-negative denominator (no concave curvature) keeps `last`.
pub fn bb_step<F: Fn(&[f64], &[f64]) -> f64>(
    x_prev: &[f64],
    x: &[f64],
    g_prev: &[f64],
    g: &[f64],
    inner: F,
    last: f64,
    config: &OptimizerConfig,
) -> BbStep {
    let dx: Vec<f64> = x.iter().zip(x_prev).map(|(a, b)| a - b).collect();
    let dg: Vec<f64> = g.iter().zip(g_prev).map(|(a, b)| a - b).collect();
    let num = inner(&dx, &dx);
    let den = inner(&dx, &dg);
    if !(den < 0.0) || !num.is_finite() || num == 0.0 {
        return BbStep { step: last.clamp(config.step_min, config.step_max), fallback: true };
    }
    BbStep { step: (-num / den).clamp(config.step_min, config.step_max), fallback: false }
}

#[derive(Clone, Debug)]
pub struct ArmijoOutcome {
    pub x: Vec<f64>,
    pub j: f64,
    pub gradient: Vec<f64>,
    pub step: f64,
    /// Trial steps in the order tried.
    pub trials: Vec<f64>,
}

/// First `x0 + initial_step * factor^n * G0` that increases `J`.
pub fn armijo_bootstrap<P: AscentProblem + ?Sized>(
    problem: &mut P,
    x0: &[f64],
    j0: f64,
    g0: &[f64],
    config: &OptimizerConfig,
) -> Result<ArmijoOutcome> {
    if g0.iter().all(|v| *v == 0.0) {
        return Ok(ArmijoOutcome { x: x0.to_vec(), j: j0, gradient: g0.to_vec(), step: 0.0, trials: Vec::new() });
    }
    let mut s = config.initial_step;
    let mut trials = Vec::new();
    for _ in 0..=config.max_halvings {
        trials.push(s);
        let y = step_to(problem, x0, g0, s);
        match problem.value(&y) {
            Ok(j) if j > j0 => {
                let gradient = problem.gradient(&y)?;
                return Ok(ArmijoOutcome { x: y, j, gradient, step: s, trials });
            }
            Ok(_) => {}
            Err(e) => debug!("armijo trial {s}: {e}"),
        }
        s *= config.armijo_factor;
    }
    Err(Error::OptimizerAborted(format!("no ascent within {} halvings", config.max_halvings)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationLog {
    pub iter: usize,
    pub j: f64,
    pub grad_norm_xi: f64,
    pub grad_tau: f64,
    pub tau: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Every step above `step_min` made the state solver fail.
    Stalled(String),
    Aborted(String),
}

#[derive(Clone, Debug)]
pub struct OptimizerReport {
    pub history: Vec<IterationLog>,
    pub x: Vec<f64>,
    pub j: f64,
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    pub termination: Termination,
    pub restarts: usize,
}

impl OptimizerReport {
    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |h| h.iter)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "J", "grad_norm_xi", "grad_tau", "tau", "step"])?;
        for h in &self.history {
            w.write_record([h.iter.to_string(), fmt(h.j), fmt(h.grad_norm_xi), fmt(h.grad_tau), fmt(h.tau), fmt(h.step)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the ascent from `x0`. `tau_of` extracts the logged scalar.
pub fn optimize<P: AscentProblem + ?Sized>(
    problem: &mut P,
    x0: &[f64],
    config: &OptimizerConfig,
    tau_of: impl Fn(&[f64]) -> f64,
) -> Result<OptimizerReport> {
    config.validate()?;
    let mut x = x0.to_vec();
    problem.project(&mut x);
    let j0 = problem.value(&x)?;
    let g0 = problem.gradient(&x)?;
    problem.calibrate(&g0);
    // in the calibrated metric
    let g = problem.gradient(&x)?;
    let log = |p: &P, iter: usize, x: &[f64], j: f64, g: &[f64], step: f64| {
        let (a, b) = p.gradient_parts(x, g);
        IterationLog { iter, j, grad_norm_xi: a, grad_tau: b, tau: tau_of(x), step }
    };
    let mut history = vec![log(problem, 0, &x, j0, &g, 0.0)];
    let finish = |x: Vec<f64>, j: f64, g: Vec<f64>, history, termination, restarts, p: &P| {
        let grad_norm = stationarity(p, &x, &g);
        Ok(OptimizerReport { history, x, j, gradient: g, grad_norm, termination, restarts })
    };
    if stationarity(problem, &x, &g) <= config.stop_tol {
        return finish(x, j0, g, history, Termination::Converged, 0, problem);
    }

    let bootstrap = |p: &mut P, x: &[f64], j: f64, g: &[f64]| armijo_bootstrap(p, x, j, g, config);
    let first = match bootstrap(problem, &x, j0, &g) {
        Ok(o) => o,
        Err(e) => return finish(x, j0, g, history, Termination::Aborted(e.to_string()), 0, problem),
    };
    let (mut x_prev, mut g_prev) = (x, g);
    let (mut x, mut j, mut g, mut last) = (first.x, first.j, first.gradient, first.step);
    history.push(log(problem, 1, &x, j, &g, last));
    let (mut best_x, mut best_j, mut best_g) = (x.clone(), j, g.clone());
    let mut restarts = 0;
    let floor = j0 - 10.0 * j0.abs();

    for iter in 2..=config.max_iters {
        if stationarity(problem, &x, &g) <= config.stop_tol {
            return finish(x, j, g, history, Termination::Converged, restarts, problem);
        }
        let bb = bb_step(&x_prev, &x, &g_prev, &g, |a, b| problem.inner(a, b), last, config);
        let mut s = bb.step;
        let mut accepted = None;
        let mut failure = String::new();
        for _ in 0..=config.max_halvings {
            if s < config.step_min {
                break;
            }
            let y = step_to(problem, &x, &g, s);
            match problem.value(&y).and_then(|jy| Ok((jy, problem.gradient(&y)?))) {
                Ok((jy, gy)) => {
                    accepted = Some((y, jy, gy));
                    break;
                }
                Err(e) => {
                    warn!("iteration {iter}: step {s} failed ({e}), shrinking");
                    failure = e.to_string();
                    s *= config.armijo_factor;
                }
            }
        }
        let Some((y, jy, gy)) = accepted else {
            let termination = if s < config.step_min {
                Termination::Stalled(format!("iteration {iter}: no step above {} avoids solver failure ({failure})", config.step_min))
            } else {
                Termination::Aborted(format!("solver failure at iteration {iter} after {} halvings", config.max_halvings))
            };
            return finish(best_x, best_j, best_g, history, termination, restarts, problem);
        };
        if jy < floor {
            restarts += 1;
            info!("iteration {iter}: J = {jy} below safeguard, restarting from best iterate");
            match bootstrap(problem, &best_x, best_j, &best_g) {
                Ok(o) => {
                    x_prev = best_x.clone();
                    g_prev = best_g.clone();
                    (x, j, g, last) = (o.x, o.j, o.gradient, o.step);
                }
                Err(e) => {
                    return finish(best_x, best_j, best_g, history, Termination::Aborted(e.to_string()), restarts, problem)
                }
            }
        } else {
            x_prev = std::mem::replace(&mut x, y);
            g_prev = std::mem::replace(&mut g, gy);
            j = jy;
            last = s;
        }
        if j > best_j {
            (best_x, best_j, best_g) = (x.clone(), j, g.clone());
        }
        history.push(log(problem, iter, &x, j, &g, last));
        debug!("iteration {iter}: J = {j}, |G| = {}", stationarity(problem, &x, &g));
    }
    let termination =
        if stationarity(problem, &x, &g) <= config.stop_tol { Termination::Converged } else { Termination::MaxIterations };
    finish(x, j, g, history, termination, restarts, problem)
}

/// The control problem as a flat ascent problem `x = (xi~, tau)`.
pub struct ControlAscent<'a> {
    pub problem: &'a ControlProblem,
    pub tau_bounds: (f64, f64),
    /// Weight `sigma` of the `tau` block: `<a, b> = <a_xi, b_xi>_L2 + a_tau b_tau / sigma`.
    pub tau_scale: f64,
    fixed_scale: bool,
    cache: Option<(Vec<f64>, f64, Option<GradientPair>)>,
    pub evaluations: usize,
}

impl<'a> ControlAscent<'a> {
    pub fn new(problem: &'a ControlProblem, config: &OptimizerConfig) -> Self {
        Self {
            problem,
            tau_bounds: config.tau_bounds,
            tau_scale: config.tau_scale.unwrap_or(1.0),
            fixed_scale: config.tau_scale.is_some(),
            cache: None,
            evaluations: 0,
        }
    }

    pub fn pack(&self, xi: &[Vec<f64>], tau: f64) -> Vec<f64> {
        let mut x: Vec<f64> = xi.iter().flatten().copied().collect();
        x.push(tau);
        x
    }

    pub fn unpack(&self, x: &[f64]) -> (ControlGrid, f64) {
        let n = self.problem.n_omega();
        let xi = x[..x.len() - 1].chunks(n).map(<[f64]>::to_vec).collect();
        (xi, x[x.len() - 1])
    }

    fn split<'b>(&self, v: &'b [f64]) -> (&'b [f64], f64) {
        (&v[..v.len() - 1], v[v.len() - 1])
    }

    fn cached(&self, x: &[f64]) -> Option<&(Vec<f64>, f64, Option<GradientPair>)> {
        self.cache.as_ref().filter(|(y, _, _)| y.as_slice() == x)
    }

    /// Unscaled gradient at `x`, evaluating if needed.
    pub fn gradient_pair(&mut self, x: &[f64]) -> Result<GradientPair> {
        if let Some((_, _, Some(g))) = self.cached(x) {
            return Ok(g.clone());
        }
        let (xi, tau) = self.unpack(x);
        let (ev, _, g) = self.problem.gradient(&xi, tau)?;
        self.evaluations += 1;
        self.cache = Some((x.to_vec(), ev.j, Some(g.clone())));
        Ok(g)
    }

    fn xi_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.problem.n_omega();
        let mw = crate::fem::control_mass(&self.problem.setup.mesh);
        let w = self.problem.cell_weight();
        a.chunks(n).zip(b.chunks(n)).map(|(x, y)| w * mw.bilinear(x, y)).sum()
    }
}

impl AscentProblem for ControlAscent<'_> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        if let Some((_, j, _)) = self.cached(x) {
            return Ok(*j);
        }
        let (xi, tau) = self.unpack(x);
        let j = self.problem.evaluate(&xi, tau)?.j;
        self.evaluations += 1;
        self.cache = Some((x.to_vec(), j, None));
        Ok(j)
    }

    fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.gradient_pair(x)?;
        let mut v: Vec<f64> = g.xi.into_iter().flatten().collect();
        v.push(self.tau_scale * g.tau);
        Ok(v)
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let (ax, at) = self.split(a);
        let (bx, bt) = self.split(b);
        self.xi_inner(ax, bx) + at * bt / self.tau_scale
    }

    fn project(&self, x: &mut [f64]) {
        let t = x.len() - 1;
        x[t] = x[t].clamp(self.tau_bounds.0, self.tau_bounds.1);
    }

    fn gradient_parts(&self, x: &[f64], g: &[f64]) -> (f64, f64) {
        let (gx, gt) = self.split(g);
        let tau = x[x.len() - 1];
        let mut gt = gt / self.tau_scale;
        if (tau >= self.tau_bounds.1 && gt > 0.0) || (tau <= self.tau_bounds.0 && gt < 0.0) {
            gt = 0.0;
        }
        (self.xi_inner(gx, gx).sqrt(), gt)
    }

    fn calibrate(&mut self, g0: &[f64]) {
        if self.fixed_scale {
            return;
        }
        let (gx, _) = self.split(g0);
        let norm = self.xi_inner(gx, gx).sqrt();
        if norm > 0.0 {
            self.tau_scale = self.problem.setup.grid.t_end() / norm;
            self.cache = None;
        }
    }
}

/// Optimizes the control problem from `(xi~_0, tau_0)`.
pub fn optimize_control(
    problem: &ControlProblem,
    xi0: &[Vec<f64>],
    tau0: f64,
    config: &OptimizerConfig,
) -> Result<(OptimizerReport, ControlGrid, f64)> {
    let mut ascent = ControlAscent::new(problem, config);
    let x0 = ascent.pack(xi0, tau0);
    let report = optimize(&mut ascent, &x0, config, |x| x[x.len() - 1])?;
    let (xi, tau) = ascent.unpack(&report.x);
    info!("optimizer: {:?} after {} iterations, {} evaluations", report.termination, report.iterations(), ascent.evaluations);
    Ok((report, xi, tau))
}

/// Concave quadratic `J(x) = c - (x - x*)^T H (x - x*) / 2` with diagonal `H`,
/// for testing the iteration without PDE solves.
#[derive(Clone, Debug)]
pub struct QuadraticSurrogate {
    pub hessian_diag: Vec<f64>,
    pub maximizer: Vec<f64>,
    pub offset: f64,
}

impl AscentProblem for QuadraticSurrogate {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        let q: f64 = x.iter().zip(&self.maximizer).zip(&self.hessian_diag).map(|((a, m), h)| h * (a - m) * (a - m)).sum();
        Ok(self.offset - 0.5 * q)
    }

    fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().zip(&self.maximizer).zip(&self.hessian_diag).map(|((a, m), h)| -h * (a - m)).collect())
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        crate::linalg::dot(a, b)
    }

    fn gradient_parts(&self, _x: &[f64], g: &[f64]) -> (f64, f64) {
        (crate::linalg::norm2(g), 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> QuadraticSurrogate {
        QuadraticSurrogate {
            hessian_diag: vec![1.0, 2.5, 4.0, 7.0, 10.0],
            maximizer: vec![0.3, -1.2, 2.0, 0.7, -0.4],
            offset: 1.5,
        }
    }

    #[test]
    fn bb_on_quadratic_reaches_maximizer() {
        let mut q = quad();
        // |x - x*| <= |G| / min(H) = 1e-9
        let cfg = OptimizerConfig { stop_tol: 1e-9, ..OptimizerConfig::for_horizon(1.0) };
        let r = optimize(&mut q, &[0.0; 5], &cfg, |_| 0.0).unwrap();
        assert_eq!(r.termination, Termination::Converged);
        assert!(r.iterations() <= 30, "{} iterations", r.iterations());
        let err: f64 = r.x.iter().zip(&q.maximizer).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-8, "{err}");
        assert!(r.j >= r.history[0].j);
    }

    #[test]
    fn bb_step_on_scaled_identity_hessian() {
        let cfg = OptimizerConfig::for_horizon(1.0);
        let lambda = 4.0;
        for dx in [[1.0, 0.0, 0.0], [0.3, -2.0, 1.1]] {
            let g: Vec<f64> = dx.iter().map(|v| -lambda * v).collect();
            let s = bb_step(&[0.0; 3], &dx, &[0.0; 3], &g, crate::linalg::dot, 0.1, &cfg);
            assert!((s.step - 1.0 / lambda).abs() < 1e-15);
            assert!(!s.fallback);
        }
    }

    #[test]
    fn bb_step_unit_curvature_and_fallback() {
        let cfg = OptimizerConfig::for_horizon(1.0);
        let dx = [0.5, -1.0];
        let dg = [-0.5, 1.0];
        let s = bb_step(&[0.0; 2], &dx, &[0.0; 2], &dg, crate::linalg::dot, 0.3, &cfg);
        assert_eq!(s.step, 1.0);
        let s = bb_step(&[0.0; 2], &dx, &[1.0, 1.0], &[1.0, 1.0], crate::linalg::dot, 0.3, &cfg);
        assert!(s.fallback);
        assert_eq!(s.step, 0.3);
        let s = bb_step(&[0.0; 2], &dx, &[0.0; 2], &[1.0, 0.5], crate::linalg::dot, 0.3, &cfg);
        assert!(s.fallback);
    }

    #[test]
    fn bb_step_is_clamped() {
        let cfg = OptimizerConfig::for_horizon(1.0);
        let s = bb_step(&[0.0], &[1.0], &[0.0], &[-1e-9], crate::linalg::dot, 0.3, &cfg);
        assert_eq!(s.step, 1e2);
    }

    #[test]
    fn armijo_accepts_full_step_on_concave_1d() {
        let mut q = QuadraticSurrogate { hessian_diag: vec![1.0], maximizer: vec![1.0], offset: 0.0 };
        let cfg = OptimizerConfig::for_horizon(1.0);
        let j0 = q.value(&[0.0]).unwrap();
        let g0 = q.gradient(&[0.0]).unwrap();
        let o = armijo_bootstrap(&mut q, &[0.0], j0, &g0, &cfg).unwrap();
        assert_eq!(o.trials, vec![1.0]);
        assert_eq!(o.x, vec![1.0]);
    }

    #[test]
    fn armijo_trials_shrink_geometrically() {
        let mut q = QuadraticSurrogate { hessian_diag: vec![50.0], maximizer: vec![1.0], offset: 0.0 };
        let cfg = OptimizerConfig::for_horizon(1.0);
        let g0 = q.gradient(&[0.0]).unwrap();
        let o = armijo_bootstrap(&mut q, &[0.0], -25.0, &g0, &cfg).unwrap();
        assert!(o.trials.len() > 1);
        assert!(o.trials.windows(2).all(|w| w[1] == 0.5 * w[0]));
        assert!(o.j > -25.0);
    }

    #[test]
    fn armijo_at_stationary_point_stays() {
        let mut q = quad();
        let x = q.maximizer.clone();
        let g = q.gradient(&x).unwrap();
        let o = armijo_bootstrap(&mut q, &x, 1.5, &g, &OptimizerConfig::for_horizon(1.0)).unwrap();
        assert_eq!(o.x, x);
        assert!(o.trials.is_empty());
    }

    #[test]
    fn stationary_start_converges_immediately() {
        let mut q = quad();
        let x = q.maximizer.clone();
        let r = optimize(&mut q, &x, &OptimizerConfig::for_horizon(1.0), |_| 0.0).unwrap();
        assert_eq!(r.termination, Termination::Converged);
        assert_eq!(r.iterations(), 0);
    }

    /// Quadratic whose solver fails outside the unit ball.
    struct Fenced(QuadraticSurrogate);

    impl AscentProblem for Fenced {
        fn value(&mut self, x: &[f64]) -> Result<f64> {
            let r = crate::linalg::norm2(x);
            if r > 1.0 {
                return Err(crate::error::Error::NonInjective { det: 1.0 - r });
            }
            self.0.value(x)
        }
        fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>> {
            self.0.gradient(x)
        }
        fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
            self.0.inner(a, b)
        }
        fn gradient_parts(&self, x: &[f64], g: &[f64]) -> (f64, f64) {
            self.0.gradient_parts(x, g)
        }
    }

    #[test]
    fn maximizer_beyond_solver_range_stalls() {
        let mut f = Fenced(QuadraticSurrogate { hessian_diag: vec![1.0, 2.0], maximizer: vec![3.0, 0.0], offset: 0.0 });
        let r = optimize(&mut f, &[0.0, 0.5], &OptimizerConfig::for_horizon(1.0), |_| 0.0).unwrap();
        assert!(matches!(r.termination, Termination::Stalled(_)), "{:?}", r.termination);
        assert!(crate::linalg::norm2(&r.x) <= 1.0);
        assert!(r.j > f.value(&[0.0, 0.5]).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut c = OptimizerConfig::for_horizon(15.0);
        assert!(c.validate().is_ok());
        c.armijo_factor = 1.0;
        assert!(c.validate().is_err());
        let c = OptimizerConfig { tau_bounds: (5.0, 4.0), ..OptimizerConfig::for_horizon(15.0) };
        assert!(c.validate().is_err());
    }

    #[test]
    fn report_csv_has_fixed_header() {
        let mut q = quad();
        let r = optimize(&mut q, &[0.0; 5], &OptimizerConfig::for_horizon(1.0), |_| 0.0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,J,grad_norm_xi,grad_tau,tau,step\n"));
        assert_eq!(text.lines().count(), r.history.len() + 1);
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let a = optimize(&mut quad(), &[0.0; 5], &OptimizerConfig::for_horizon(1.0), |_| 0.0).unwrap();
        let b = optimize(&mut quad(), &[0.0; 5], &OptimizerConfig::for_horizon(1.0), |_| 0.0).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.x, b.x);
    }
}
