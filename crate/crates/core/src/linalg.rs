//! Tridiagonal matrices and the scalar-bordered saddle-point solve.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square tridiagonal matrix. `lower[i]` is entry `(i+1, i)`, `upper[i]` is `(i, i+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiag {
    pub fn zeros(n: usize) -> Self {
        let off = n.saturating_sub(1);
        Self { lower: vec![0.0; off], diag: vec![0.0; n], upper: vec![0.0; off] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Adds `v` to entry `(i, j)`; `|i - j|` must be at most 1.
    pub fn add_entry(&mut self, i: usize, j: usize, v: f64) {
        match (i as isize) - (j as isize) {
            0 => self.diag[i] += v,
            1 => self.lower[j] += v,
            -1 => self.upper[i] += v,
            _ => panic!("entry ({i}, {j}) outside the tridiagonal band"),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i as isize) - (j as isize) {
            0 => self.diag[i],
            1 => self.lower[j],
            -1 => self.upper[i],
            _ => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(x.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| v * s).collect(),
            diag: self.diag.iter().map(|v| v * s).collect(),
            upper: self.upper.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Tridiag) -> Self {
        assert_eq!(self.len(), other.len());
        let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + s * y).collect();
        Self {
            lower: comb(&self.lower, &other.lower),
            diag: comb(&self.diag, &other.diag),
            upper: comb(&self.upper, &other.upper),
        }
    }

    pub fn transpose(&self) -> Self {
        Self { lower: self.upper.clone(), diag: self.diag.clone(), upper: self.lower.clone() }
    }

    /// Drops the first row and column.
    pub fn drop_first(&self) -> Self {
        assert!(!self.is_empty());
        Self {
            lower: self.lower.iter().skip(1).copied().collect(),
            diag: self.diag[1..].to_vec(),
            upper: self.upper.iter().skip(1).copied().collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    pub fn max_abs(&self) -> f64 {
        self.lower.iter().chain(&self.diag).chain(&self.upper).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Thomas algorithm. Fails on a vanishing pivot.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Ok(Vec::new());
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0];
        if piv.abs() <= 1e-14 * scale {
            return Err(Error::SingularSystem { row: 0 });
        }
        if n > 1 {
            c[0] = self.upper[0] / piv;
        }
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if piv.abs() <= 1e-14 * scale {
                return Err(Error::SingularSystem { row: i });
            }
            if i + 1 < n {
                c[i] = self.upper[i] / piv;
            }
            d[i] = (rhs[i] - self.lower[i - 1] * d[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }
}

/// Solution of the bordered system `[[A, g], [g^T, 0]] [x; lambda] = [r; c]`.
#[derive(Clone, Debug)]
pub struct BorderedSolution {
    pub x: Vec<f64>,
    pub multiplier: f64,
}

/// Solves the scalar-bordered saddle-point system through the Schur complement
/// `g^T A^{-1} g`, at the cost of two solves with `A`.
pub fn solve_bordered(a: &Tridiag, g: &[f64], r: &[f64], c: f64) -> Result<BorderedSolution> {
    let ar = a.solve(r)?;
    let ag = a.solve(g)?;
    let schur = dot(g, &ag);
    let gnorm2 = dot(g, g);
    if !(schur.abs() > 1e-13 * gnorm2 / a.max_abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularBorderedSystem { schur });
    }
    let multiplier = (dot(g, &ar) - c) / schur;
    let x = ar.iter().zip(&ag).map(|(a, b)| a - multiplier * b).collect();
    Ok(BorderedSolution { x, multiplier })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `a + s * b`.
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn random_diag_dominant(v: &[f64]) -> Tridiag {
        let n = v.len() / 3;
        let mut t = Tridiag::zeros(n);
        for i in 0..n {
            t.diag[i] = 4.0 + v[i];
            if i + 1 < n {
                t.upper[i] = v[n + i] - 0.5;
                t.lower[i] = v[2 * n + i] - 0.5;
            }
        }
        t
    }

    proptest! {
        #[test]
        fn thomas_matches_dense(v in proptest::collection::vec(0.0f64..1.0, 24), r in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let t = random_diag_dominant(&v);
            let x = t.solve(&r).unwrap();
            let dense = t.to_dense().lu().solve(&DVector::from_vec(r.clone())).unwrap();
            for i in 0..8 {
                prop_assert!((x[i] - dense[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn bordered_matches_dense(v in proptest::collection::vec(0.0f64..1.0, 18), r in proptest::collection::vec(-1.0f64..1.0, 6), c in -1.0f64..1.0) {
            let t = random_diag_dominant(&v);
            let n = t.len();
            let mut g = vec![0.0; n];
            g[n - 1] = 1.0;
            g[1] = 0.3;
            let sol = solve_bordered(&t, &g, &r, c).unwrap();
            let mut big = DMatrix::zeros(n + 1, n + 1);
            big.view_mut((0, 0), (n, n)).copy_from(&t.to_dense());
            for i in 0..n {
                big[(i, n)] = g[i];
                big[(n, i)] = g[i];
            }
            let mut rhs = r.clone();
            rhs.push(c);
            let dense = big.lu().solve(&DVector::from_vec(rhs)).unwrap();
            for i in 0..n {
                prop_assert!((sol.x[i] - dense[i]).abs() < 1e-12);
            }
            prop_assert!((sol.multiplier - dense[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_pivot_is_reported() {
        let t = Tridiag::zeros(3);
        assert!(matches!(t.solve(&[1.0, 0.0, 0.0]), Err(Error::SingularSystem { row: 0 })));
    }

    #[test]
    fn zero_border_is_singular() {
        let mut t = Tridiag::zeros(2);
        t.diag = vec![1.0, 1.0];
        let err = solve_bordered(&t, &[0.0, 0.0], &[1.0, 1.0], 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularBorderedSystem { .. }));
    }
}
