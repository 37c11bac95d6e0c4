//! Piecewise-linear time warp `mu(., tau): [0, 2] -> [0, T]` pinning `s = 1`
//! to `t = tau` and `s = 1 + eps~` to `t = tau + eps`.

use crate::error::{Error, Result};
use crate::forward::TimeGrid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpParams {
    pub t_end: f64,
    pub tau: f64,
    pub eps: f64,
    pub eps_tilde: f64,
}

impl WarpParams {
    pub fn new(t_end: f64, tau: f64, eps: f64, eps_tilde: f64) -> Result<Self> {
        if !(tau > 0.0 && eps >= 0.0 && tau + eps < t_end) {
            return Err(Error::Warp(format!("need 0 < tau and tau + eps < T (tau={tau}, eps={eps}, T={t_end})")));
        }
        if !(0.0..1.0).contains(&eps_tilde) {
            return Err(Error::Warp(format!("eps~ = {eps_tilde} outside [0, 1)")));
        }
        if (eps == 0.0) != (eps_tilde == 0.0) {
            return Err(Error::Warp("eps and eps~ must vanish together".into()));
        }
        Ok(Self { t_end, tau, eps, eps_tilde })
    }

    /// Two-segment warp with `eps = eps~ = 0`.
    pub fn degenerate(t_end: f64, tau: f64) -> Result<Self> {
        Self::new(t_end, tau, 0.0, 0.0)
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.t_end, tau, self.eps, self.eps_tilde)
    }

    fn slopes(&self) -> [f64; 3] {
        let mid = if self.eps_tilde > 0.0 { self.eps / self.eps_tilde } else { 0.0 };
        [self.tau, mid, (self.t_end - self.tau - self.eps) / (1.0 - self.eps_tilde)]
    }

    /// Segment of `s`, left-closed at kinks.
    fn segment(&self, s: f64) -> usize {
        if s <= 1.0 {
            0
        } else if s <= 1.0 + self.eps_tilde {
            1
        } else {
            2
        }
    }

    /// Breakpoints `[0, tau, tau + eps, T]` in physical time.
    pub fn breakpoints(&self) -> [f64; 4] {
        [0.0, self.tau, self.tau + self.eps, self.t_end]
    }
}

fn check_s(s: f64) -> Result<()> {
    if (0.0..=2.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Warp(format!("s = {s} outside [0, 2]")))
    }
}

pub fn mu(s: f64, p: &WarpParams) -> Result<f64> {
    check_s(s)?;
    let [a, b, c] = p.slopes();
    Ok(match p.segment(s) {
        0 => a * s,
        1 => p.tau + b * (s - 1.0),
        _ if s == 2.0 => p.t_end,
        _ => p.tau + p.eps + c * (s - 1.0 - p.eps_tilde),
    })
}

pub fn mu_inv(t: f64, p: &WarpParams) -> Result<f64> {
    if !(0.0..=p.t_end).contains(&t) {
        return Err(Error::Warp(format!("t = {t} outside [0, {}]", p.t_end)));
    }
    let [a, b, c] = p.slopes();
    Ok(if t <= p.tau {
        t / a
    } else if t <= p.tau + p.eps {
        1.0 + (t - p.tau) / b
    } else if t == p.t_end {
        2.0
    } else {
        1.0 + p.eps_tilde + (t - p.tau - p.eps) / c
    })
}

/// `d mu / ds`; the left limit at kinks.
pub fn mu_dot(s: f64, p: &WarpParams) -> f64 {
    p.slopes()[p.segment(s)]
}

/// `d mu_dot / d tau`, independent of `tau`.
pub fn mu_dot_tau(s: f64, p: &WarpParams) -> f64 {
    match p.segment(s) {
        0 => 1.0,
        1 => 0.0,
        _ => -1.0 / (1.0 - p.eps_tilde),
    }
}

/// `mu_dot_tau` composed with `mu^-1`: 1 before `tau`, 0 on `(tau, tau + eps]`,
/// `-1/(1 - eps~)` after.
pub fn eulerian_weight(t: f64, p: &WarpParams) -> f64 {
    if t <= p.tau {
        1.0
    } else if t <= p.tau + p.eps {
        0.0
    } else {
        -1.0 / (1.0 - p.eps_tilde)
    }
}

/// Weight of the physical-time integral of the Hamiltonian that gives the
/// derivative in `tau`: `mu_dot_tau / mu_dot` at `mu^-1(t)`.
pub fn tau_weight(t: f64, p: &WarpParams) -> f64 {
    let [a, _, c] = p.slopes();
    if t <= p.tau {
        1.0 / a
    } else if t <= p.tau + p.eps {
        0.0
    } else {
        -1.0 / ((1.0 - p.eps_tilde) * c)
    }
}

/// Time grid `t_j = mu(2j/cells)` of a uniform reference grid. The nodes
/// `s = 1` and `s = 1 + eps~` must fall on the reference grid, so `tau` and
/// `tau + eps` are time nodes.
pub fn warped_grid(p: &WarpParams, cells: usize) -> Result<TimeGrid> {
    if cells < 2 || cells % 2 != 0 {
        return Err(Error::Warp(format!("reference grid needs an even number of cells, got {cells}")));
    }
    let n1 = cells / 2;
    let x = p.eps_tilde * n1 as f64;
    let n2 = x.round() as usize;
    if (x - n2 as f64).abs() > 1e-9 || (p.eps_tilde > 0.0 && n2 == 0) || n1 + n2 >= cells {
        return Err(Error::Warp(format!("eps~ = {} is not a multiple of the reference step {}", p.eps_tilde, 1.0 / n1 as f64)));
    }
    let n3 = cells - n1 - n2;
    let mut times = Vec::with_capacity(cells + 1);
    times.extend((0..n1).map(|j| p.tau * j as f64 / n1 as f64));
    times.extend((0..n2).map(|j| p.tau + p.eps * j as f64 / n2 as f64));
    let rest = p.t_end - p.tau - p.eps;
    times.extend((0..n3).map(|j| p.tau + p.eps + rest * j as f64 / n3 as f64));
    times.push(p.t_end);
    TimeGrid::from_times(times)
}
