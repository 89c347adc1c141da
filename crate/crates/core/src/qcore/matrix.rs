use std::fmt;

use crate::C64;

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim.min(8) {
            let row: Vec<String> = (0..self.dim.min(8))
                .map(|c| {
                    let z = self[(r, c)];
                    format!("{:+.3}{:+.3}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        Ok(())
    }
}

impl CMatrix {
    pub fn zeros(dim: usize) -> CMatrix {
        CMatrix {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> CMatrix {
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds from row-major data; panics unless `data.len()` is a square.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> CMatrix {
        assert_eq!(data.len(), dim * dim, "matrix data must be dim*dim");
        CMatrix { dim, data }
    }

    pub fn from_real(dim: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_vec(dim, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// `|a><b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> CMatrix {
        assert_eq!(a.len(), b.len());
        let dim = a.len();
        let mut data = Vec::with_capacity(dim * dim);
        for x in a {
            for y in b {
                data.push(x * y.conj());
            }
        }
        CMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn conj(&self) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[r * n..(r + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| {
                self.data[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (n, m) = (self.dim, other.dim);
        let mut out = CMatrix::zeros(n * m);
        for r1 in 0..n {
            for c1 in 0..n {
                let a = self[(r1, c1)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for r2 in 0..m {
                    for c2 in 0..m {
                        out[(r1 * m + r2, c1 * m + c2)] = a * other[(r2, c2)];
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.adjoint()
            .matmul(self)
            .max_abs_diff(&CMatrix::identity(self.dim))
            <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    // symmetrised so round-off never produces a non-Hermitian input
    fn to_faer_hermitian(&self) -> faer::Mat<C64> {
        faer::Mat::from_fn(self.dim, self.dim, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        if self.dim == 0 {
            return Vec::new();
        }
        self.to_faer_hermitian()
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .expect("Hermitian eigendecomposition did not converge")
    }

    /// Eigen-decomposition of a Hermitian matrix: `(eigenvalues ascending, eigenvectors as columns)`.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, CMatrix) {
        let eig = self
            .to_faer_hermitian()
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("Hermitian eigendecomposition did not converge");
        let vals = (0..self.dim).map(|i| eig.S()[i].re).collect();
        let u = eig.U();
        let vecs = CMatrix::from_vec(
            self.dim,
            (0..self.dim)
                .flat_map(|r| (0..self.dim).map(move |c| u[(r, c)]))
                .collect(),
        );
        (vals, vecs)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::gates;

    #[test]
    fn kron_of_identities() {
        let i2 = CMatrix::identity(2);
        assert_eq!(i2.kron(&i2), CMatrix::identity(4));
    }

    #[test]
    fn hadamard_is_unitary_and_hermitian() {
        let h = gates::h();
        assert!(h.is_unitary(1e-12));
        assert!(h.is_hermitian(1e-12));
    }

    #[test]
    fn pauli_y_eigenvalues() {
        let ev = gates::y().hermitian_eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
    }
}
