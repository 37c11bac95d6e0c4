//! P1 finite elements on the unit interval.
//!
//! The Dirichlet node `x = 0` is eliminated everywhere: a nodal field holds one
//! value per node except the first, so free index `i` is mesh node `i + 1` and
//! the last free index is the Neumann node `x = 1`.

use crate::error::{Error, Result};
use crate::linalg::Tridiag;
use crate::tensor::{
    det_cof, energy_and_derivatives, green_strain, sigma_l_apply_with, strain_linearization, Mat,
    StrainEnergyModel,
};

const NODE_TOL: f64 = 1e-12;

/// Two-point Gauss rule on `[a, b]`: `(point, weight)` pairs.
pub fn gauss2(a: f64, b: f64) -> [(f64, f64); 2] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let off = half / 3f64.sqrt();
    [(mid - off, half), (mid + off, half)]
}

/// Three-point Gauss rule on `[a, b]`.
pub fn gauss3(a: f64, b: f64) -> [(f64, f64); 3] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let off = half * (0.6f64).sqrt();
    [(mid - off, half * 5.0 / 9.0), (mid, half * 8.0 / 9.0), (mid + off, half * 5.0 / 9.0)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    control_window: (f64, f64),
    omega_nodes: Vec<usize>,
}

impl Mesh1D {
    pub fn uniform(elements: usize, control_window: (f64, f64)) -> Result<Self> {
        if elements == 0 {
            return Err(Error::InvalidMesh("at least one element required".into()));
        }
        let nodes = (0..=elements).map(|k| k as f64 / elements as f64).collect();
        Self::from_nodes(nodes, control_window)
    }

    /// Uniform mesh whose element size is closest to `h`.
    pub fn with_size(h: f64, control_window: (f64, f64)) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::InvalidMesh(format!("mesh size {h} outside (0, 1]")));
        }
        Self::uniform((1.0 / h).round().max(1.0) as usize, control_window)
    }

    pub fn from_nodes(nodes: Vec<f64>, control_window: (f64, f64)) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidMesh("need at least two nodes".into()));
        }
        if nodes[0] != 0.0 || nodes[nodes.len() - 1] != 1.0 {
            return Err(Error::InvalidMesh("nodes must start at 0 and end at 1".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMesh("nodes must be strictly increasing".into()));
        }
        let (a, b) = control_window;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::InvalidMesh(format!("control window [{a}, {b}] not inside [0, 1]")));
        }
        let omega_nodes: Vec<usize> = (0..nodes.len())
            .filter(|&k| nodes[k] >= a - NODE_TOL && nodes[k] <= b + NODE_TOL)
            .collect();
        // a window narrower than one element still touches the nodes of the
        // element containing it
        let omega_nodes = if omega_nodes.is_empty() {
            let e = nodes.windows(2).position(|w| w[1] >= a).unwrap_or(nodes.len() - 2);
            vec![e, e + 1]
        } else {
            let first = omega_nodes[0];
            let last = *omega_nodes.last().unwrap();
            let lo = if nodes[first] > a + NODE_TOL { first - 1 } else { first };
            let hi = if nodes[last] < b - NODE_TOL { last + 1 } else { last };
            (lo..=hi).collect()
        };
        Ok(Self { nodes, control_window, omega_nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    /// Largest element length.
    pub fn h(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn n_free(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn dirichlet_node(&self) -> usize {
        0
    }

    pub fn neumann_node(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Free index of the Neumann node.
    pub fn neumann_dof(&self) -> usize {
        self.n_free() - 1
    }

    /// Outward normal at `x = 1`.
    pub fn normal_at_neumann(&self) -> f64 {
        1.0
    }

    pub fn control_window(&self) -> (f64, f64) {
        self.control_window
    }

    /// Mesh nodes carrying control values (contiguous).
    pub fn omega_nodes(&self) -> &[usize] {
        &self.omega_nodes
    }

    pub fn n_omega(&self) -> usize {
        self.omega_nodes.len()
    }

    /// Free index of mesh node `k`, `None` for the Dirichlet node.
    pub fn free_index(&self, k: usize) -> Option<usize> {
        k.checked_sub(1)
    }

    /// Value of a free-node field at mesh node `k`.
    pub fn nodal(&self, field: &[f64], k: usize) -> f64 {
        match self.free_index(k) {
            Some(i) => field[i],
            None => 0.0,
        }
    }

    /// Constant gradient of a free-node field on element `e`.
    pub fn element_gradient(&self, field: &[f64], e: usize) -> f64 {
        let (x0, x1) = self.element(e);
        (self.nodal(field, e + 1) - self.nodal(field, e)) / (x1 - x0)
    }

    /// Slope of the last element, i.e. `du/dn` at `x = 1`.
    pub fn boundary_gradient(&self, field: &[f64]) -> f64 {
        self.element_gradient(field, self.elements() - 1)
    }

    /// Gradients of the two hat functions on element `e`.
    fn hat_gradients(&self, e: usize) -> [f64; 2] {
        let (x0, x1) = self.element(e);
        [-1.0 / (x1 - x0), 1.0 / (x1 - x0)]
    }

    fn hat_values(&self, e: usize, x: f64) -> [f64; 2] {
        let (x0, x1) = self.element(e);
        let t = (x - x0) / (x1 - x0);
        [1.0 - t, t]
    }

    /// Value of a free-node field at `x`.
    pub fn evaluate(&self, field: &[f64], x: f64) -> f64 {
        let e = self.nodes.windows(2).position(|w| x <= w[1]).unwrap_or(self.elements() - 1);
        let [a, b] = self.hat_values(e, x);
        a * self.nodal(field, e) + b * self.nodal(field, e + 1)
    }

    /// Nodal interpolant of `f` on the free nodes.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes[1..].iter().map(|&x| f(x)).collect()
    }
}

fn assemble_full(mesh: &Mesh1D, mut local: impl FnMut(usize) -> [[f64; 2]; 2]) -> Tridiag {
    let mut m = Tridiag::zeros(mesh.nodes.len());
    for e in 0..mesh.elements() {
        let k = local(e);
        for a in 0..2 {
            for b in 0..2 {
                m.add_entry(e + a, e + b, k[a][b]);
            }
        }
    }
    m
}

/// Consistent mass matrix including the Dirichlet node.
pub fn assemble_mass_full(mesh: &Mesh1D) -> Tridiag {
    assemble_full(mesh, |e| {
        let (x0, x1) = mesh.element(e);
        let h = x1 - x0;
        [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]]
    })
}

/// Consistent mass matrix on the free nodes.
pub fn assemble_mass(mesh: &Mesh1D) -> Tridiag {
    assemble_mass_full(mesh).drop_first()
}

/// Standard P1 stiffness matrix including the Dirichlet node.
pub fn assemble_stiffness_full(mesh: &Mesh1D) -> Tridiag {
    assemble_full(mesh, |e| {
        let (x0, x1) = mesh.element(e);
        let h = x1 - x0;
        [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]]
    })
}

/// `kappa` times the stiffness matrix, on the free nodes.
pub fn assemble_damping(mesh: &Mesh1D, kappa: f64) -> Result<Tridiag> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("damping kappa must be positive, got {kappa}")));
    }
    Ok(assemble_stiffness_full(mesh).drop_first().scaled(kappa))
}

/// Internal force `r_i = int Sigma(E(u)) : (E'(u).phi_i)` and the tangent
/// `K_ij = int (sigma_L(grad u).grad phi_j) : grad phi_i`, with 2-point Gauss.
pub fn assemble_elastic(
    mesh: &Mesh1D,
    model: &StrainEnergyModel,
    u: &[f64],
) -> Result<(Vec<f64>, Tridiag)> {
    let n = mesh.nodes.len();
    let mut r_full = vec![0.0; n];
    let mut k_full = Tridiag::zeros(n);
    for e in 0..mesh.elements() {
        let (x0, x1) = mesh.element(e);
        let grad_u = Mat::scalar(mesh.element_gradient(u, e));
        let grads = mesh.hat_gradients(e);
        for (_, w) in gauss2(x0, x1) {
            let ed = energy_and_derivatives(model, &green_strain(&grad_u))?;
            for a in 0..2 {
                let gphi_a = Mat::scalar(grads[a]);
                r_full[e + a] += w * ed.stress.ddot(&strain_linearization(&grad_u, &gphi_a));
                for b in 0..2 {
                    let s = sigma_l_apply_with(&ed, &grad_u, &Mat::scalar(grads[b]));
                    k_full.add_entry(e + a, e + b, w * s.ddot(&gphi_a));
                }
            }
        }
    }
    Ok((r_full[1..].to_vec(), k_full.drop_first()))
}

pub fn internal_force(mesh: &Mesh1D, model: &StrainEnergyModel, u: &[f64]) -> Result<Vec<f64>> {
    Ok(assemble_elastic(mesh, model, u)?.0)
}

pub fn tangent_stiffness(mesh: &Mesh1D, model: &StrainEnergyModel, u: &[f64]) -> Result<Tridiag> {
    Ok(assemble_elastic(mesh, model, u)?.1)
}

/// Total stored energy `int W(E(u))`.
pub fn stored_energy(mesh: &Mesh1D, model: &StrainEnergyModel, u: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for e in 0..mesh.elements() {
        let (x0, x1) = mesh.element(e);
        let grad_u = Mat::scalar(mesh.element_gradient(u, e));
        for (_, w) in gauss2(x0, x1) {
            total += w * energy_and_derivatives(model, &green_strain(&grad_u))?.energy;
        }
    }
    Ok(total)
}

/// `V(u) = int det(I + grad u)` and its gradient `g_i = int cof(Phi(u)) : grad phi_i`.
pub fn volume_and_gradient(mesh: &Mesh1D, u: &[f64]) -> (f64, Vec<f64>) {
    let n = mesh.nodes.len();
    let mut volume = 0.0;
    let mut g_full = vec![0.0; n];
    for e in 0..mesh.elements() {
        let (x0, x1) = mesh.element(e);
        let phi = Mat::scalar(1.0 + mesh.element_gradient(u, e));
        let (det, cof) = det_cof(&phi);
        let grads = mesh.hat_gradients(e);
        for (_, w) in gauss2(x0, x1) {
            volume += w * det;
            for a in 0..2 {
                g_full[e + a] += w * cof.ddot(&Mat::scalar(grads[a]));
            }
        }
    }
    (volume, g_full[1..].to_vec())
}

/// Boundary form of the volume gradient: `cof(Phi(u)) n` at `x = 1`, as a
/// covector on the free nodes.
pub fn boundary_volume_gradient(mesh: &Mesh1D, u: &[f64]) -> Vec<f64> {
    let phi = Mat::scalar(1.0 + mesh.boundary_gradient(u));
    let (_, cof) = det_cof(&phi);
    let mut g = vec![0.0; mesh.n_free()];
    g[mesh.neumann_dof()] = cof.get(0, 0) * mesh.normal_at_neumann();
    g
}

/// Load `int f(x) phi_i` for a body force, with 3-point Gauss per element.
pub fn assemble_body_load(mesh: &Mesh1D, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut full = vec![0.0; mesh.nodes.len()];
    for e in 0..mesh.elements() {
        let (x0, x1) = mesh.element(e);
        for (x, w) in gauss3(x0, x1) {
            let fx = f(x);
            let phis = mesh.hat_values(e, x);
            full[e] += w * fx * phis[0];
            full[e + 1] += w * fx * phis[1];
        }
    }
    full[1..].to_vec()
}

/// How the scalar control enters the momentum equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// `int_omega xi phi_i`.
    Plain,
    /// Active stress along the fiber `f = 1`: `int_omega xi phi_i'`.
    Fiber,
}

/// Sparse map from nodal control values on `omega` to a load on the free nodes.
#[derive(Clone, Debug)]
pub struct ControlOperator {
    kind: OperatorKind,
    n_free: usize,
    n_omega: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl ControlOperator {
    pub fn new(mesh: &Mesh1D, kind: OperatorKind) -> Self {
        let (a, b) = mesh.control_window();
        let first = mesh.omega_nodes()[0];
        let last = *mesh.omega_nodes().last().unwrap();
        let mut dense: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for e in 0..mesh.elements() {
            let (x0, x1) = mesh.element(e);
            let (lo, hi) = (x0.max(a), x1.min(b));
            if hi - lo <= NODE_TOL {
                continue;
            }
            let grads = mesh.hat_gradients(e);
            for (x, w) in gauss2(lo, hi) {
                let phis = mesh.hat_values(e, x);
                for t in 0..2 {
                    let Some(i) = mesh.free_index(e + t) else { continue };
                    let test = match kind {
                        OperatorKind::Plain => phis[t],
                        OperatorKind::Fiber => grads[t],
                    };
                    for s in 0..2 {
                        let node = e + s;
                        if node < first || node > last {
                            continue;
                        }
                        *dense.entry((i, node - first)).or_default() += w * test * phis[s];
                    }
                }
            }
        }
        Self {
            kind,
            n_free: mesh.n_free(),
            n_omega: mesh.n_omega(),
            entries: dense.into_iter().map(|((i, j), v)| (i, j, v)).collect(),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn n_omega(&self) -> usize {
        self.n_omega
    }

    pub fn apply(&self, xi: &[f64]) -> Vec<f64> {
        assert_eq!(xi.len(), self.n_omega);
        let mut out = vec![0.0; self.n_free];
        for &(i, j, v) in &self.entries {
            out[i] += v * xi[j];
        }
        out
    }

    pub fn apply_transpose(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.n_free);
        let mut out = vec![0.0; self.n_omega];
        for &(i, j, v) in &self.entries {
            out[j] += v * z[i];
        }
        out
    }
}

/// Control load for nodal values `xi` on the omega nodes.
pub fn control_load(mesh: &Mesh1D, xi: &[f64], kind: OperatorKind) -> Vec<f64> {
    ControlOperator::new(mesh, kind).apply(xi)
}

/// Mass matrix of the control space `L2(omega)` on the omega nodes.
pub fn control_mass(mesh: &Mesh1D) -> Tridiag {
    let (a, b) = mesh.control_window();
    let first = mesh.omega_nodes()[0];
    let last = *mesh.omega_nodes().last().unwrap();
    let mut m = Tridiag::zeros(mesh.n_omega());
    for e in first..last {
        let (x0, x1) = mesh.element(e);
        let (lo, hi) = (x0.max(a), x1.min(b));
        if hi - lo <= NODE_TOL {
            continue;
        }
        for (x, w) in gauss2(lo, hi) {
            let phis = mesh.hat_values(e, x);
            for s in 0..2 {
                for t in 0..2 {
                    m.add_entry(e + s - first, e + t - first, w * phis[s] * phis[t]);
                }
            }
        }
    }
    m
}
