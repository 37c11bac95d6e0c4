//! Pointwise hyperelastic tensor algebra.
//!
//! Everything here acts on small `d x d` matrices (`d` in 1..=3) and is pure.
//! Fourth-order tangents are stored as linear maps on symmetric matrices in
//! Mandel notation, see [`SymTangent`].

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative gap below which two eigenvalues are treated as coincident when
/// building the Ogden tangent.
pub const EIGEN_COALESCE_TOL: f64 = 1e-10;

/// A `d x d` real matrix, `d` in `1..=3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    d: usize,
    a: [[f64; 3]; 3],
}

impl Mat {
    pub fn zeros(d: usize) -> Self {
        assert!((1..=3).contains(&d), "dimension must be 1, 2 or 3, got {d}");
        Self { d, a: [[0.0; 3]; 3] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        let mut m = Self::zeros(1);
        m.a[0][0] = v;
        m
    }

    /// Builds a matrix from row-major rows; all rows must have length `rows.len()`.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let d = rows.len();
        let mut m = Self::zeros(d);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), d, "matrix must be square");
            m.a[i][..d].copy_from_slice(row);
        }
        m
    }

    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.a[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.a[i][i] = *v;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.d && j < self.d);
        self.a[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.d && j < self.d);
        self.a[i][j] = v;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.d, |i, j| self.a[j][i])
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.a[i][i]).sum()
    }

    /// Frobenius inner product `A : B = tr(A^T B)`.
    pub fn ddot(&self, other: &Mat) -> f64 {
        self.check_dim(other);
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += self.a[i][j] * other.a[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_fn(self.d, |i, j| s * self.a[i][j])
    }

    pub fn sym(&self) -> Self {
        Self::from_fn(self.d, |i, j| 0.5 * (self.a[i][j] + self.a[j][i]))
    }

    pub fn is_finite(&self) -> bool {
        (0..self.d).all(|i| (0..self.d).all(|j| self.a[i][j].is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| self.a[i][j])
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    fn check_dim(&self, other: &Mat) {
        assert_eq!(self.d, other.d, "dimension mismatch");
    }
}

impl Add for Mat {
    type Output = Mat;
    fn add(self, rhs: Mat) -> Mat {
        self.check_dim(&rhs);
        Mat::from_fn(self.d, |i, j| self.a[i][j] + rhs.a[i][j])
    }
}

impl Sub for Mat {
    type Output = Mat;
    fn sub(self, rhs: Mat) -> Mat {
        self.check_dim(&rhs);
        Mat::from_fn(self.d, |i, j| self.a[i][j] - rhs.a[i][j])
    }
}

impl Neg for Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl Mul for Mat {
    type Output = Mat;
    fn mul(self, rhs: Mat) -> Mat {
        self.check_dim(&rhs);
        let d = self.d;
        Mat::from_fn(d, |i, j| (0..d).map(|k| self.a[i][k] * rhs.a[k][j]).sum())
    }
}

impl Mul<Mat> for f64 {
    type Output = Mat;
    fn mul(self, rhs: Mat) -> Mat {
        rhs.scale(self)
    }
}

/// Linear map on symmetric `d x d` matrices, stored in Mandel notation
/// (off-diagonal components weighted by `sqrt 2`) so that `H : (C[K]) = h^T C k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTangent {
    d: usize,
    m: DMatrix<f64>,
}

fn mandel_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut p: Vec<(usize, usize)> = (0..d).map(|i| (i, i)).collect();
    for i in 0..d {
        for j in (i + 1)..d {
            p.push((i, j));
        }
    }
    p
}

impl SymTangent {
    pub fn zeros(d: usize) -> Self {
        let n = d * (d + 1) / 2;
        Self { d, m: DMatrix::zeros(n, n) }
    }

    /// The fourth-order identity restricted to symmetric matrices.
    pub fn identity(d: usize) -> Self {
        let n = d * (d + 1) / 2;
        Self { d, m: DMatrix::identity(n, n) }
    }

    /// `A (x) B`, acting as `K -> (B : K) A`, for symmetric `A` and `B`.
    pub fn outer(a: &Mat, b: &Mat) -> Self {
        let va = to_mandel(a);
        let vb = to_mandel(b);
        Self { d: a.dim(), m: &va * vb.transpose() }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { d: self.d, m: &self.m * s }
    }

    pub fn add(&self, other: &SymTangent) -> Self {
        Self { d: self.d, m: &self.m + &other.m }
    }

    /// Applies the map to the symmetric part of `k`.
    pub fn apply(&self, k: &Mat) -> Mat {
        from_mandel(self.d, &(&self.m * to_mandel(&k.sym())))
    }

    /// Largest absolute entry of `M - M^T`.
    pub fn asymmetry(&self) -> f64 {
        (&self.m - self.m.transpose()).amax()
    }
}

fn to_mandel(a: &Mat) -> nalgebra::DVector<f64> {
    let s = a.sym();
    let pairs = mandel_pairs(a.dim());
    nalgebra::DVector::from_iterator(
        pairs.len(),
        pairs.iter().map(|&(i, j)| {
            if i == j {
                s.get(i, i)
            } else {
                std::f64::consts::SQRT_2 * s.get(i, j)
            }
        }),
    )
}

fn from_mandel(d: usize, v: &nalgebra::DVector<f64>) -> Mat {
    let mut out = Mat::zeros(d);
    for (k, &(i, j)) in mandel_pairs(d).iter().enumerate() {
        if i == j {
            out.set(i, i, v[k]);
        } else {
            let x = v[k] / std::f64::consts::SQRT_2;
            out.set(i, j, x);
            out.set(j, i, x);
        }
    }
    out
}

/// Hyperelastic strain energy as a function of the Green-Saint-Venant tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StrainEnergyModel {
    /// `W = mu tr(E^2) + lambda/2 tr(E)^2`.
    SaintVenantKirchhoff { lambda: f64, mu: f64 },
    /// `W = w0 + beta (exp(gamma tr(E^2)) - 1)`.
    Fung { w0: f64, beta: f64, gamma: f64 },
    /// `W = tr((2E + I)^gamma - I)`.
    Ogden { gamma: f64 },
}

impl StrainEnergyModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        match *self {
            Self::SaintVenantKirchhoff { lambda, mu } => {
                if !(mu > 0.0) {
                    return bad("Saint Venant-Kirchhoff requires mu_L > 0");
                }
                if !(lambda >= 0.0) {
                    return bad("Saint Venant-Kirchhoff requires lambda_L >= 0");
                }
            }
            Self::Fung { w0, beta, gamma } => {
                if !(w0 >= 0.0) {
                    return bad("Fung requires W0 >= 0");
                }
                if !(beta > 0.0 && gamma > 0.0) {
                    return bad("Fung requires beta > 0 and gamma > 0");
                }
            }
            Self::Ogden { gamma } => {
                if !gamma.is_finite() {
                    return bad("Ogden exponent must be finite");
                }
            }
        }
        Ok(())
    }

    /// Second derivative of `W` at `E = 0` contracted as in the linearized
    /// one-dimensional operator: `sigma_L(0)` reduces to multiplication by this
    /// modulus when `d = 1`.
    pub fn reference_modulus_1d(&self) -> f64 {
        match *self {
            Self::SaintVenantKirchhoff { lambda, mu } => 2.0 * mu + lambda,
            Self::Fung { beta, gamma, .. } => 2.0 * beta * gamma,
            Self::Ogden { gamma } => 2.0 * gamma + 4.0 * gamma * (gamma - 1.0),
        }
    }
}

/// Energy, stress `Sigma = dW/dE`, and tangent `d^2W/dE^2` at one strain.
#[derive(Clone, Debug)]
pub struct EnergyDerivatives {
    pub energy: f64,
    pub stress: Mat,
    pub tangent: SymTangent,
}

/// `Phi = I + grad u`.
pub fn deformation_gradient(grad_u: &Mat) -> Mat {
    Mat::identity(grad_u.dim()) + *grad_u
}

/// Green-Saint-Venant strain `E = (Phi^T Phi - I) / 2`.
pub fn green_strain(grad_u: &Mat) -> Mat {
    let phi = deformation_gradient(grad_u);
    let e = (phi.transpose() * phi - Mat::identity(grad_u.dim())).scale(0.5);
    e.sym()
}

/// `E'(u).v = (Phi^T grad v + grad v^T Phi) / 2`.
pub fn strain_linearization(grad_u: &Mat, grad_v: &Mat) -> Mat {
    let phi = deformation_gradient(grad_u);
    let t = phi.transpose() * *grad_v;
    (t + t.transpose()).scale(0.5)
}

/// Determinant and cofactor matrix. The cofactor is computed from signed
/// minors, so it is defined for singular matrices as well.
pub fn det_cof(a: &Mat) -> (f64, Mat) {
    match a.dim() {
        1 => (a.get(0, 0), Mat::scalar(1.0)),
        2 => {
            let det = a.get(0, 0) * a.get(1, 1) - a.get(0, 1) * a.get(1, 0);
            let cof = Mat::from_rows(&[
                &[a.get(1, 1), -a.get(1, 0)],
                &[-a.get(0, 1), a.get(0, 0)],
            ]);
            (det, cof)
        }
        _ => {
            let cof = Mat::from_fn(3, |i, j| {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                a.get(i1, j1) * a.get(i2, j2) - a.get(i1, j2) * a.get(i2, j1)
            });
            let det = (0..3).map(|j| a.get(0, j) * cof.get(0, j)).sum();
            (det, cof)
        }
    }
}

/// Directional derivative of `A -> cof A` at `A` in direction `H`:
/// `((cof A : H) cof A - cof A H^T cof A) / det A`.
pub fn cof_differential(a: &Mat, h: &Mat) -> Result<Mat> {
    let (det, cof) = det_cof(a);
    if det.abs() <= f64::EPSILON * a.max_abs().max(1.0).powi(a.dim() as i32) {
        return Err(Error::SingularDeformation);
    }
    let first = cof.scale(cof.ddot(h));
    let second = cof * h.transpose() * cof;
    Ok((first - second).scale(1.0 / det))
}

/// `W(E)`, `Sigma(E)` and `d^2 W / dE^2 (E)` for a symmetric strain `E`.
pub fn energy_and_derivatives(model: &StrainEnergyModel, e: &Mat) -> Result<EnergyDerivatives> {
    let d = e.dim();
    let id = Mat::identity(d);
    match *model {
        StrainEnergyModel::SaintVenantKirchhoff { lambda, mu } => {
            let tr = e.trace();
            let e2 = (*e * *e).trace();
            Ok(EnergyDerivatives {
                energy: mu * e2 + 0.5 * lambda * tr * tr,
                stress: e.scale(2.0 * mu) + id.scale(lambda * tr),
                tangent: SymTangent::identity(d)
                    .scale(2.0 * mu)
                    .add(&SymTangent::outer(&id, &id).scale(lambda)),
            })
        }
        StrainEnergyModel::Fung { w0, beta, gamma } => {
            let ex = (gamma * (*e * *e).trace()).exp();
            let es = e.sym();
            Ok(EnergyDerivatives {
                energy: w0 + beta * (ex - 1.0),
                stress: es.scale(2.0 * gamma * beta * ex),
                tangent: SymTangent::identity(d)
                    .scale(2.0 * gamma)
                    .add(&SymTangent::outer(&es, &es).scale(4.0 * gamma * gamma))
                    .scale(beta * ex),
            })
        }
        StrainEnergyModel::Ogden { gamma } => ogden(gamma, e),
    }
}

// Cyclic Jacobi rotations. Eigenvectors come out orthonormal to rounding,
// which the finite-difference checks on the tangent need.
fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a.dim();
    let mut m = a.a;
    let mut v = [[0.0; 3]; 3];
    for (i, row) in v.iter_mut().enumerate().take(d) {
        row[i] = 1.0;
    }
    for _sweep in 0..50 {
        let mut off = 0.0;
        for p in 0..d {
            for q in p + 1..d {
                off += m[p][q] * m[p][q];
            }
        }
        if off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut().take(d) {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let lam = (0..d).map(|k| m[k][k]).collect();
    let vecs = (0..d).map(|k| (0..d).map(|i| v[i][k]).collect()).collect();
    (lam, vecs)
}

// Spectral form of the Ogden energy. The tangent uses the Daleckii-Krein
// divided differences of f(c) = 2 gamma c^(gamma-1) over the eigenvalues of
// C = 2E + I, with the confluent limit f'(c) when eigenvalues coalesce.
fn ogden(gamma: f64, e: &Mat) -> Result<EnergyDerivatives> {
    let d = e.dim();
    let c = (e.scale(2.0) + Mat::identity(d)).sym();
    let (lam, vecs) = jacobi_eigen(&c);
    if lam.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidOgdenState);
    }
    let f = |x: f64| 2.0 * gamma * x.powf(gamma - 1.0);
    let df = |x: f64| 2.0 * gamma * (gamma - 1.0) * x.powf(gamma - 2.0);

    let energy = lam.iter().map(|&l| l.powf(gamma) - 1.0).sum();
    let mut stress = Mat::zeros(d);
    for k in 0..d {
        let fk = f(lam[k]);
        for i in 0..d {
            for j in 0..d {
                stress.set(i, j, stress.get(i, j) + fk * vecs[k][i] * vecs[k][j]);
            }
        }
    }

    // dSigma/dE . H = sum_{k,l} 2 f[c_k, c_l] (v_k^T H v_l) v_k v_l^T
    let divided = |k: usize, l: usize| {
        let (a, b) = (lam[k], lam[l]);
        if (a - b).abs() <= EIGEN_COALESCE_TOL * a.abs().max(b.abs()).max(1.0) {
            df(0.5 * (a + b))
        } else {
            (f(a) - f(b)) / (a - b)
        }
    };
    let pairs = mandel_pairs(d);
    let n = pairs.len();
    let mut m = DMatrix::zeros(n, n);
    for (col, &(p, q)) in pairs.iter().enumerate() {
        let basis = {
            let mut b = Mat::zeros(d);
            if p == q {
                b.set(p, p, 1.0);
            } else {
                let x = std::f64::consts::FRAC_1_SQRT_2;
                b.set(p, q, x);
                b.set(q, p, x);
            }
            b
        };
        let mut out = Mat::zeros(d);
        for k in 0..d {
            for l in 0..d {
                let proj: f64 = (0..d)
                    .map(|i| (0..d).map(|j| vecs[k][i] * basis.get(i, j) * vecs[l][j]).sum::<f64>())
                    .sum();
                let coef = 2.0 * divided(k, l) * proj;
                for i in 0..d {
                    for j in 0..d {
                        out.set(i, j, out.get(i, j) + coef * vecs[k][i] * vecs[l][j]);
                    }
                }
            }
        }
        let v = to_mandel(&out);
        m.set_column(col, &v);
    }
    // Exact symmetry of the continuous tangent; drop rounding noise.
    let m = (&m + m.transpose()) * 0.5;
    Ok(EnergyDerivatives { energy, stress: stress.sym(), tangent: SymTangent { d, m } })
}

/// First Piola-type stress `sigma(grad u) = Phi Sigma(E(u))`.
pub fn sigma(model: &StrainEnergyModel, grad_u: &Mat) -> Result<Mat> {
    let ed = energy_and_derivatives(model, &green_strain(grad_u))?;
    Ok(deformation_gradient(grad_u) * ed.stress)
}

/// `sigma_L(grad u).grad v = grad v Sigma(u) + Phi(u) C(E(u))[E'(u).v]`.
pub fn sigma_l_apply(model: &StrainEnergyModel, grad_u: &Mat, grad_v: &Mat) -> Result<Mat> {
    let ed = energy_and_derivatives(model, &green_strain(grad_u))?;
    Ok(sigma_l_apply_with(&ed, grad_u, grad_v))
}

/// Same as [`sigma_l_apply`] with precomputed energy derivatives at `E(u)`.
pub fn sigma_l_apply_with(ed: &EnergyDerivatives, grad_u: &Mat, grad_v: &Mat) -> Mat {
    let phi = deformation_gradient(grad_u);
    *grad_v * ed.stress + phi * ed.tangent.apply(&strain_linearization(grad_u, grad_v))
}

/// Linearization of `cof Phi(u)` in direction `grad v`.
pub fn sigma_n_apply(grad_u: &Mat, grad_v: &Mat) -> Result<Mat> {
    cof_differential(&deformation_gradient(grad_u), grad_v)
}

/// Finite-difference step used by the internal oracles: `1e-6 max(1, |x|)`.
pub fn fd_step(scale: f64) -> f64 {
    1e-6 * scale.abs().max(1.0)
}
