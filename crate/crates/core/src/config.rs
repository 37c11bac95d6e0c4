//! Run configuration in INI form. Every key lives in a section and is
//! addressed as `section.key`; missing keys take the reference values.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use ini::Ini;

use crate::adjoint::{ObjectiveConfig, PressureObjective, TerminalCost};
use crate::error::{Error, Result};
use crate::fem::{Mesh1D, OperatorKind};
use crate::forward::{AdjointScheme, ConstraintMode, ForwardSetup, Response, TimeGrid};
use crate::objective::ControlProblem;
use crate::optimizer::OptimizerConfig;
use crate::tensor::StrainEnergyModel;

/// Analytic initial profile on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Zero,
    /// `amplitude * sin(wavenumber * pi * x / 2)`.
    Sine { amplitude: f64, wavenumber: f64 },
    /// `sum_i c_i x^i`.
    Polynomial(Vec<f64>),
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Sine { amplitude, wavenumber } => amplitude * (wavenumber * std::f64::consts::PI * x / 2.0).sin(),
            Profile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ci| acc * x + ci),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Zero => write!(f, "zero"),
            Profile::Sine { amplitude, wavenumber } => write!(f, "sine:{amplitude:?}:{wavenumber:?}"),
            Profile::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|v| format!("{v:?}")).collect();
                write!(f, "polynomial:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}'"));
        let mut parts = s.trim().splitn(2, ':');
        match (parts.next(), parts.next()) {
            (Some("zero"), None) => Ok(Profile::Zero),
            (Some("sine"), Some(rest)) => {
                let v: Vec<&str> = rest.split(':').collect();
                match v.as_slice() {
                    [a] => Ok(Profile::Sine { amplitude: num(a)?, wavenumber: 1.0 }),
                    [a, k] => Ok(Profile::Sine { amplitude: num(a)?, wavenumber: num(k)? }),
                    _ => Err("expected sine:amplitude[:wavenumber]".into()),
                }
            }
            (Some("polynomial"), Some(rest)) => {
                Ok(Profile::Polynomial(rest.split(',').map(num).collect::<std::result::Result<_, _>>()?))
            }
            _ => Err(format!("unknown profile '{s}' (zero, sine:a[:k], polynomial:c0,c1,..)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Svk,
    Fung,
    Ogden,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PressureKind {
    None,
    AtTau,
    DifferenceQuotient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Bordered,
    Augmented,
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub kappa: f64,
    pub model: ModelKind,
    pub lambda: f64,
    pub mu: f64,
    pub fung_w0: f64,
    pub fung_beta: f64,
    pub fung_gamma: f64,
    pub ogden_gamma: f64,
    pub surface_load: f64,
    pub u0: Profile,
    pub udot0: Profile,

    pub t_end: f64,
    pub dt: f64,

    pub h: f64,
    pub omega: (f64, f64),

    pub operator: OperatorKind,
    pub tau0: Option<f64>,

    pub pressure: PressureKind,
    pub eps: f64,
    pub eps_tilde: Option<f64>,
    pub terminal_u: f64,
    pub terminal_udot: f64,

    pub constraint: ConstraintKind,
    pub rho: f64,
    pub al_tol: f64,
    pub al_max_outer: usize,
    pub response: Response,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub adjoint_scheme: AdjointScheme,

    pub armijo_factor: f64,
    pub initial_step: f64,
    pub max_halvings: usize,
    pub stop_tol: f64,
    pub max_iters: usize,
    pub tau_bounds: Option<(f64, f64)>,
    pub step_min: f64,
    pub step_max: f64,
    pub tau_scale: Option<f64>,

    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 2e-3,
            kappa: 2e-4,
            model: ModelKind::Svk,
            lambda: 0.05,
            mu: 0.05,
            fung_w0: 0.0,
            fung_beta: 1.0,
            fung_gamma: 1.0,
            ogden_gamma: 2.0,
            surface_load: 0.0,
            u0: Profile::Zero,
            udot0: Profile::Zero,
            t_end: 15.0,
            dt: 0.02,
            h: 0.01,
            omega: (0.75, 1.0),
            operator: OperatorKind::Plain,
            tau0: None,
            pressure: PressureKind::AtTau,
            eps: 0.02,
            eps_tilde: None,
            terminal_u: 0.0,
            terminal_udot: 0.0,
            constraint: ConstraintKind::Bordered,
            rho: 1e4,
            al_tol: 1e-10,
            al_max_outer: 50,
            response: Response::Nonlinear,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            adjoint_scheme: AdjointScheme::CrankNicolson,
            armijo_factor: 0.5,
            initial_step: 1.0,
            max_halvings: 60,
            stop_tol: 1e-10,
            max_iters: 200,
            tau_bounds: None,
            step_min: 1e-6,
            step_max: 1e2,
            tau_scale: None,
            output_dir: "out".into(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::config(key, format!("cannot parse '{value}'")))
}

fn auto_or<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.trim() == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn choice<T: Copy>(key: &str, value: &str, table: &[(&str, T)]) -> Result<T> {
    table.iter().find(|(n, _)| *n == value.trim()).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
        Error::config(key, format!("'{value}' is not one of {}", names.join(", ")))
    })
}

fn name_of<T: PartialEq + Copy>(v: T, table: &[(&'static str, T)]) -> &'static str {
    table.iter().find(|(_, x)| *x == v).map(|(n, _)| *n).unwrap_or("?")
}

const MODELS: &[(&str, ModelKind)] = &[("svk", ModelKind::Svk), ("fung", ModelKind::Fung), ("ogden", ModelKind::Ogden)];
const OPERATORS: &[(&str, OperatorKind)] = &[("plain", OperatorKind::Plain), ("fiber", OperatorKind::Fiber)];
const PRESSURES: &[(&str, PressureKind)] = &[
    ("none", PressureKind::None),
    ("at-tau", PressureKind::AtTau),
    ("difference-quotient", PressureKind::DifferenceQuotient),
];
const CONSTRAINTS: &[(&str, ConstraintKind)] =
    &[("bordered", ConstraintKind::Bordered), ("augmented", ConstraintKind::Augmented), ("free", ConstraintKind::Free)];
const RESPONSES: &[(&str, Response)] = &[("nonlinear", Response::Nonlinear), ("linearized", Response::Linearized)];
const SCHEMES: &[(&str, AdjointScheme)] =
    &[("crank-nicolson", AdjointScheme::CrankNicolson), ("implicit-euler", AdjointScheme::ImplicitEuler)];

fn opt<T: fmt::Debug>(v: &Option<T>) -> String {
    v.as_ref().map_or("auto".into(), |x| format!("{x:?}"))
}

impl RunConfig {
    /// Sets `section.key` from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "physics.alpha" => self.alpha = parse(key, v)?,
            "physics.kappa" => self.kappa = parse(key, v)?,
            "physics.model" => self.model = choice(key, v, MODELS)?,
            "physics.lambda" => self.lambda = parse(key, v)?,
            "physics.mu" => self.mu = parse(key, v)?,
            "physics.fung_w0" => self.fung_w0 = parse(key, v)?,
            "physics.fung_beta" => self.fung_beta = parse(key, v)?,
            "physics.fung_gamma" => self.fung_gamma = parse(key, v)?,
            "physics.ogden_gamma" => self.ogden_gamma = parse(key, v)?,
            "physics.surface_load" => self.surface_load = parse(key, v)?,
            "physics.u0" => self.u0 = v.parse().map_err(|e| Error::config(key, e))?,
            "physics.udot0" => self.udot0 = v.parse().map_err(|e| Error::config(key, e))?,
            "time.t_end" => self.t_end = parse(key, v)?,
            "time.dt" => self.dt = parse(key, v)?,
            "mesh.h" => self.h = parse(key, v)?,
            "mesh.omega_a" => self.omega.0 = parse(key, v)?,
            "mesh.omega_b" => self.omega.1 = parse(key, v)?,
            "control.operator" => self.operator = choice(key, v, OPERATORS)?,
            "control.tau0" => self.tau0 = auto_or(key, v)?,
            "objective.pressure" => self.pressure = choice(key, v, PRESSURES)?,
            "objective.eps" => self.eps = parse(key, v)?,
            "objective.eps_tilde" => self.eps_tilde = auto_or(key, v)?,
            "objective.terminal_u" => self.terminal_u = parse(key, v)?,
            "objective.terminal_udot" => self.terminal_udot = parse(key, v)?,
            "solver.constraint" => self.constraint = choice(key, v, CONSTRAINTS)?,
            "solver.rho" => self.rho = parse(key, v)?,
            "solver.al_tol" => self.al_tol = parse(key, v)?,
            "solver.al_max_outer" => self.al_max_outer = parse(key, v)?,
            "solver.response" => self.response = choice(key, v, RESPONSES)?,
            "solver.newton_tol" => self.newton_tol = parse(key, v)?,
            "solver.newton_max_iter" => self.newton_max_iter = parse(key, v)?,
            "solver.adjoint_scheme" => self.adjoint_scheme = choice(key, v, SCHEMES)?,
            "optimizer.armijo_factor" => self.armijo_factor = parse(key, v)?,
            "optimizer.initial_step" => self.initial_step = parse(key, v)?,
            "optimizer.max_halvings" => self.max_halvings = parse(key, v)?,
            "optimizer.stop_tol" => self.stop_tol = parse(key, v)?,
            "optimizer.max_iters" => self.max_iters = parse(key, v)?,
            "optimizer.tau_min" => {
                let lo: Option<f64> = auto_or(key, v)?;
                self.tau_bounds = lo.map(|lo| (lo, self.tau_bounds.map_or(0.98 * self.t_end, |b| b.1)));
            }
            "optimizer.tau_max" => {
                let hi: Option<f64> = auto_or(key, v)?;
                self.tau_bounds = hi.map(|hi| (self.tau_bounds.map_or(0.02 * self.t_end, |b| b.0), hi));
            }
            "optimizer.step_min" => self.step_min = parse(key, v)?,
            "optimizer.step_max" => self.step_max = parse(key, v)?,
            "optimizer.tau_scale" => self.tau_scale = auto_or(key, v)?,
            "output.dir" => self.output_dir = v.trim().to_string(),
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// All keys in file order with their text values.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let d = |v: f64| format!("{v:?}");
        let (tmin, tmax) = match self.tau_bounds {
            Some((a, b)) => (d(a), d(b)),
            None => ("auto".into(), "auto".into()),
        };
        vec![
            ("physics.alpha", d(self.alpha)),
            ("physics.kappa", d(self.kappa)),
            ("physics.model", name_of(self.model, MODELS).into()),
            ("physics.lambda", d(self.lambda)),
            ("physics.mu", d(self.mu)),
            ("physics.fung_w0", d(self.fung_w0)),
            ("physics.fung_beta", d(self.fung_beta)),
            ("physics.fung_gamma", d(self.fung_gamma)),
            ("physics.ogden_gamma", d(self.ogden_gamma)),
            ("physics.surface_load", d(self.surface_load)),
            ("physics.u0", self.u0.to_string()),
            ("physics.udot0", self.udot0.to_string()),
            ("time.t_end", d(self.t_end)),
            ("time.dt", d(self.dt)),
            ("mesh.h", d(self.h)),
            ("mesh.omega_a", d(self.omega.0)),
            ("mesh.omega_b", d(self.omega.1)),
            ("control.operator", name_of(self.operator, OPERATORS).into()),
            ("control.tau0", opt(&self.tau0)),
            ("objective.pressure", name_of(self.pressure, PRESSURES).into()),
            ("objective.eps", d(self.eps)),
            ("objective.eps_tilde", opt(&self.eps_tilde)),
            ("objective.terminal_u", d(self.terminal_u)),
            ("objective.terminal_udot", d(self.terminal_udot)),
            ("solver.constraint", name_of(self.constraint, CONSTRAINTS).into()),
            ("solver.rho", d(self.rho)),
            ("solver.al_tol", d(self.al_tol)),
            ("solver.al_max_outer", self.al_max_outer.to_string()),
            ("solver.response", name_of(self.response, RESPONSES).into()),
            ("solver.newton_tol", d(self.newton_tol)),
            ("solver.newton_max_iter", self.newton_max_iter.to_string()),
            ("solver.adjoint_scheme", name_of(self.adjoint_scheme, SCHEMES).into()),
            ("optimizer.armijo_factor", d(self.armijo_factor)),
            ("optimizer.initial_step", d(self.initial_step)),
            ("optimizer.max_halvings", self.max_halvings.to_string()),
            ("optimizer.stop_tol", d(self.stop_tol)),
            ("optimizer.max_iters", self.max_iters.to_string()),
            ("optimizer.tau_min", tmin),
            ("optimizer.tau_max", tmax),
            ("optimizer.step_min", d(self.step_min)),
            ("optimizer.step_max", d(self.step_max)),
            ("optimizer.tau_scale", opt(&self.tau_scale)),
            ("output.dir", self.output_dir.clone()),
        ]
    }

    pub fn from_ini(ini: &Ini) -> Result<Self> {
        let mut c = Self::default();
        // horizon first so that bound defaults follow it
        if let Some(t) = ini.section(Some("time")).and_then(|s| s.get("t_end")) {
            c.set("time.t_end", t)?;
        }
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::config(k, "key outside a section"));
                }
                continue;
            };
            for (k, v) in props.iter() {
                c.set(&format!("{section}.{k}"), v)?;
            }
        }
        Ok(c)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        Self::from_ini(&ini)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn to_ini(&self) -> Ini {
        let mut ini = Ini::new();
        for (key, value) in self.entries() {
            let (section, k) = key.split_once('.').expect("qualified key");
            ini.with_section(Some(section)).set(k, value);
        }
        ini
    }

    pub fn to_ini_string(&self) -> String {
        let mut buf = Vec::new();
        self.to_ini().write_to(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn model(&self) -> StrainEnergyModel {
        match self.model {
            ModelKind::Svk => StrainEnergyModel::SaintVenantKirchhoff { lambda: self.lambda, mu: self.mu },
            ModelKind::Fung => StrainEnergyModel::Fung { w0: self.fung_w0, beta: self.fung_beta, gamma: self.fung_gamma },
            ModelKind::Ogden => StrainEnergyModel::Ogden { gamma: self.ogden_gamma },
        }
    }

    pub fn eps_tilde(&self) -> f64 {
        match self.pressure {
            PressureKind::DifferenceQuotient => self.eps_tilde.unwrap_or(2.0 * self.eps / self.t_end),
            _ => 0.0,
        }
    }

    pub fn tau0(&self) -> f64 {
        self.tau0.unwrap_or(0.5 * self.t_end)
    }

    /// Checks every field, reporting the first offending key.
    pub fn validate(&self) -> Result<()> {
        let pos = |k: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(Error::config(k, "must be positive")) };
        let fin = |k: &str, v: f64| if v.is_finite() { Ok(()) } else { Err(Error::config(k, "must be finite")) };
        if !(self.alpha >= 0.0) {
            return Err(Error::config("physics.alpha", "must be non-negative"));
        }
        pos("physics.kappa", self.kappa)?;
        self.model().validate().map_err(|e| Error::config("physics.model", e.to_string()))?;
        fin("physics.surface_load", self.surface_load)?;
        for (k, p) in [("physics.u0", &self.u0), ("physics.udot0", &self.udot0)] {
            if p.eval(0.0) != 0.0 {
                return Err(Error::config(k, "profile must vanish at x = 0"));
            }
            if !p.eval(1.0).is_finite() {
                return Err(Error::config(k, "profile must be finite"));
            }
        }
        pos("time.t_end", self.t_end)?;
        pos("time.dt", self.dt)?;
        if self.dt > self.t_end {
            return Err(Error::config("time.dt", "larger than the horizon"));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::config("time.dt", "must divide the horizon"));
        }
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::config("mesh.h", "must lie in (0, 1]"));
        }
        if !(0.0 <= self.omega.0 && self.omega.0 < self.omega.1 && self.omega.1 <= 1.0) {
            return Err(Error::config("mesh.omega_a", "need 0 <= omega_a < omega_b <= 1"));
        }
        if self.pressure == PressureKind::DifferenceQuotient {
            pos("objective.eps", self.eps)?;
            let et = self.eps_tilde();
            if !(et > 0.0 && et < 1.0) {
                return Err(Error::config("objective.eps_tilde", "must lie in (0, 1)"));
            }
        }
        if !(self.terminal_u >= 0.0 && self.terminal_udot >= 0.0) {
            return Err(Error::config("objective.terminal_u", "weights must be non-negative"));
        }
        let window = if self.pressure == PressureKind::DifferenceQuotient { self.eps } else { 0.0 };
        let tau0 = self.tau0();
        if !(tau0 > 0.0 && tau0 + window < self.t_end) {
            return Err(Error::config("control.tau0", "must lie in (0, T - eps)"));
        }
        if let Some((lo, hi)) = self.tau_bounds {
            if !(lo > 0.0 && lo <= hi && hi + window < self.t_end) {
                return Err(Error::config("optimizer.tau_min", "need 0 < tau_min <= tau_max < T - eps"));
            }
        }
        pos("solver.rho", self.rho)?;
        pos("solver.al_tol", self.al_tol)?;
        pos("solver.newton_tol", self.newton_tol)?;
        if self.newton_max_iter == 0 {
            return Err(Error::config("solver.newton_max_iter", "must be at least 1"));
        }
        self.optimizer_config().validate().map_err(|e| match e {
            Error::Config { key, message } => Error::config(format!("optimizer.{key}"), message),
            other => other,
        })
    }

    pub fn mesh(&self) -> Result<Mesh1D> {
        Mesh1D::with_size(self.h, self.omega)
    }

    pub fn forward_setup(&self) -> Result<ForwardSetup> {
        self.validate()?;
        let mut s = ForwardSetup::new(self.mesh()?, self.model(), self.kappa, TimeGrid::new(self.t_end, self.dt)?);
        s.operator = self.operator;
        s.constraint = match self.constraint {
            ConstraintKind::Bordered => ConstraintMode::Bordered,
            ConstraintKind::Augmented => {
                ConstraintMode::AugmentedLagrangian { rho: self.rho, tol: self.al_tol, max_outer: self.al_max_outer }
            }
            ConstraintKind::Free => ConstraintMode::Free,
        };
        s.response = self.response;
        s.newton_tol = self.newton_tol;
        s.newton_max_iter = self.newton_max_iter;
        s.adjoint_scheme = self.adjoint_scheme;
        Ok(s)
    }

    pub fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            alpha: self.alpha,
            pressure: match self.pressure {
                PressureKind::None => None,
                PressureKind::AtTau => Some(PressureObjective::AtTau),
                PressureKind::DifferenceQuotient => Some(PressureObjective::DifferenceQuotient { eps: self.eps }),
            },
            terminal: (self.terminal_u > 0.0 || self.terminal_udot > 0.0)
                .then_some(TerminalCost { weight_u: self.terminal_u, weight_udot: self.terminal_udot }),
        }
    }

    pub fn control_problem(&self) -> Result<ControlProblem> {
        let setup = self.forward_setup()?;
        let mut p = ControlProblem::new(setup, self.objective());
        p.eps_tilde = self.eps_tilde();
        p.u0 = p.setup.mesh.interpolate(|x| self.u0.eval(x));
        p.udot0 = p.setup.mesh.interpolate(|x| self.udot0.eval(x));
        if self.surface_load != 0.0 {
            let g = self.surface_load;
            p.surface_load = Some(Arc::new(move |_| g));
        }
        Ok(p)
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let mut c = OptimizerConfig::for_horizon(self.t_end);
        c.armijo_factor = self.armijo_factor;
        c.initial_step = self.initial_step;
        c.max_halvings = self.max_halvings;
        c.stop_tol = self.stop_tol;
        c.max_iters = self.max_iters;
        if let Some(b) = self.tau_bounds {
            c.tau_bounds = b;
        } else if self.pressure == PressureKind::DifferenceQuotient {
            c.tau_bounds.1 = c.tau_bounds.1.min(self.t_end - 2.0 * self.eps);
        }
        c.step_min = self.step_min;
        c.step_max = self.step_max;
        c.tau_scale = self.tau_scale;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_values() {
        let c = RunConfig::default();
        assert_eq!((c.alpha, c.kappa, c.lambda, c.mu), (2e-3, 2e-4, 0.05, 0.05));
        assert_eq!((c.t_end, c.dt, c.h, c.omega), (15.0, 0.02, 0.01, (0.75, 1.0)));
        assert_eq!((c.surface_load, &c.u0, &c.udot0), (0.0, &Profile::Zero, &Profile::Zero));
        assert_eq!(c.tau0(), 7.5);
        assert!(c.validate().is_ok());
        let s = c.forward_setup().unwrap();
        assert_eq!(s.mesh.n_free(), 100);
        assert_eq!(s.grid.steps(), 750);
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_is_idempotent() {
        let text = "[physics]\nalpha = 0.01\nmodel = fung\nu0 = polynomial:0,0.01,-0.003\nudot0 = sine:0.002:3\n\
                    [time]\nt_end = 2\ndt = 0.1\n[objective]\npressure = difference-quotient\neps = 0.1\n\
                    [optimizer]\ntau_max = 1.5\n";
        let a = RunConfig::parse_str(text).unwrap();
        let s1 = a.to_ini_string();
        let b = RunConfig::parse_str(&s1).unwrap();
        assert_eq!(a, b);
        assert_eq!(s1, b.to_ini_string());
        assert_eq!(b.tau_bounds, Some((0.04, 1.5)));
        assert_eq!(b.u0, Profile::Polynomial(vec![0.0, 0.01, -0.003]));
    }

    #[test]
    fn full_precision_survives() {
        let mut c = RunConfig::default();
        c.alpha = 0.1 + 0.2;
        let back = RunConfig::parse_str(&c.to_ini_string()).unwrap();
        assert_eq!(back.alpha.to_bits(), c.alpha.to_bits());
    }

    #[test]
    fn errors_name_the_field() {
        let key_of = |text: &str| match RunConfig::parse_str(text).and_then(|c| c.validate()) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert_eq!(key_of("[physics]\nkappa = -1\n"), "physics.kappa");
        assert_eq!(key_of("[physics]\nkappa = abc\n"), "physics.kappa");
        assert_eq!(key_of("[physics]\nmodel = rubber\n"), "physics.model");
        assert_eq!(key_of("[physics]\nu0 = polynomial:1,2\n"), "physics.u0");
        assert_eq!(key_of("[time]\ndt = 0.07\n"), "time.dt");
        assert_eq!(key_of("[mesh]\nomega_a = 0.9\nomega_b = 0.8\n"), "mesh.omega_a");
        assert_eq!(key_of("[physics]\ncolour = red\n"), "physics.colour");
        assert_eq!(key_of("[optimizer]\narmijo_factor = 1.5\n"), "optimizer.armijo_factor");
        assert_eq!(key_of("[control]\ntau0 = 20\n"), "control.tau0");
    }

    #[test]
    fn set_overrides() {
        let mut c = RunConfig::default();
        c.set("time.dt", "0.002").unwrap();
        c.set("solver.adjoint_scheme", "implicit-euler").unwrap();
        assert_eq!(c.dt, 0.002);
        assert_eq!(c.forward_setup().unwrap().adjoint_scheme, AdjointScheme::ImplicitEuler);
        assert!(c.set("time.nope", "1").is_err());
    }

    #[test]
    fn profiles() {
        let p: Profile = "sine:0.5".parse().unwrap();
        assert!((p.eval(1.0) - 0.5).abs() < 1e-15);
        let q: Profile = "polynomial:0,1,2".parse().unwrap();
        assert_eq!(q.eval(2.0), 10.0);
        assert!("cosine:1".parse::<Profile>().is_err());
        assert_eq!("zero".parse::<Profile>().unwrap(), Profile::Zero);
    }

    #[test]
    fn difference_quotient_warp_window() {
        let c = RunConfig::parse_str("[objective]\npressure = difference-quotient\neps = 0.02\n").unwrap();
        let p = c.control_problem().unwrap();
        assert_eq!(p.eps, 0.02);
        assert!((p.eps_tilde - 0.04 / 15.0).abs() < 1e-16);
    }
}
