use super::kernel;
use super::{CMatrix, Control, StateVector};
use crate::error::{Error, Result};
use crate::policy::policy;
use crate::C64;

/// Mixed state as a dense `2^n x 2^n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    rho: CMatrix,
}

fn check_capacity(n: usize) -> Result<()> {
    if n > policy().max_density_qubits {
        return Err(Error::Capacity(format!(
            "{n}-qubit density matrix exceeds the {}-qubit limit",
            policy().max_density_qubits
        )));
    }
    Ok(())
}

impl DensityMatrix {
    /// `|psi><psi|`.
    pub fn from_pure(psi: &StateVector) -> Result<DensityMatrix> {
        check_capacity(psi.num_qubits())?;
        Ok(DensityMatrix {
            num_qubits: psi.num_qubits(),
            rho: CMatrix::outer(psi.amplitudes(), psi.amplitudes()),
        })
    }

    /// Reduced state of `psi` after tracing out `traced`, computed directly from
    /// the amplitudes so `psi` may exceed the density-matrix capacity.
    pub fn reduce_pure(psi: &StateVector, traced: &[usize]) -> Result<DensityMatrix> {
        let n = psi.num_qubits();
        kernel::check_targets(n, traced)?;
        let keep: Vec<usize> = (0..n).filter(|q| !traced.contains(q)).collect();
        check_capacity(keep.len())?;
        let kdim = 1usize << keep.len();
        let mut rho = CMatrix::zeros(kdim);
        for t in 0..1usize << traced.len() {
            let v = psi.slice_on(&keep, t)?;
            let a = v.amplitudes();
            for r in 0..kdim {
                if a[r] == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..kdim {
                    rho[(r, c)] += a[r] * a[c].conj();
                }
            }
        }
        Ok(DensityMatrix {
            num_qubits: keep.len(),
            rho,
        })
    }

    pub fn maximally_mixed(num_qubits: usize) -> Result<DensityMatrix> {
        check_capacity(num_qubits)?;
        let dim = 1usize << num_qubits;
        Ok(DensityMatrix {
            num_qubits,
            rho: CMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)),
        })
    }

    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(rho: CMatrix) -> Result<DensityMatrix> {
        let dm = DensityMatrix::from_matrix_unchecked(rho)?;
        dm.validate()?;
        Ok(dm)
    }

    pub(crate) fn from_matrix_unchecked(rho: CMatrix) -> Result<DensityMatrix> {
        if !rho.dim().is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: rho.dim().next_power_of_two(),
                found: rho.dim(),
            });
        }
        let num_qubits = rho.dim().trailing_zeros() as usize;
        check_capacity(num_qubits)?;
        Ok(DensityMatrix { num_qubits, rho })
    }

    pub fn validate(&self) -> Result<()> {
        let p = policy();
        if !self.rho.is_hermitian(p.hermitian_tol) {
            return Err(Error::Invariant("density matrix is not Hermitian".into()));
        }
        let tr = self.rho.trace();
        if (tr.re - 1.0).abs() > p.trace_tol || tr.im.abs() > p.trace_tol {
            return Err(Error::NotNormalized(format!("trace {tr}")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < p.eigen_floor {
            return Err(Error::Invariant(format!("negative eigenvalue {min}")));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.rho.hermitian_eigenvalues()
    }

    pub fn purity(&self) -> f64 {
        self.rho.matmul(&self.rho).trace().re
    }

    /// `sum_i w_i rho_i`. Weights must be non-negative and sum to 1.
    pub fn mix(weights: &[f64], states: &[DensityMatrix]) -> Result<DensityMatrix> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::InvalidParameter(
                "mixture needs one weight per component".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > policy().probability_tol || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::NotNormalized(format!("mixture weights sum to {total}")));
        }
        let dim = states[0].dim();
        let mut acc = CMatrix::zeros(dim);
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            for (a, b) in acc.data_mut().iter_mut().zip(s.rho.data()) {
                *a += b * *w;
            }
        }
        Ok(DensityMatrix {
            num_qubits: states[0].num_qubits,
            rho: acc,
        })
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        check_capacity(self.num_qubits + other.num_qubits)?;
        Ok(DensityMatrix {
            num_qubits: self.num_qubits + other.num_qubits,
            rho: self.rho.kron(&other.rho),
        })
    }

    /// Traces out `traced` qubits; the remaining qubits keep their order.
    pub fn partial_trace(&self, traced: &[usize]) -> Result<DensityMatrix> {
        kernel::check_targets(self.num_qubits, traced)?;
        let n = self.num_qubits;
        let keep: Vec<usize> = (0..n).filter(|q| !traced.contains(q)).collect();
        let kdim = 1usize << keep.len();
        let tdim = 1usize << traced.len();
        let compose = |k: usize, t: usize| -> usize {
            let mut idx = 0usize;
            for (i, &q) in keep.iter().enumerate() {
                if k >> (keep.len() - 1 - i) & 1 == 1 {
                    idx |= 1 << kernel::bit_of(n, q);
                }
            }
            for (i, &q) in traced.iter().enumerate() {
                if t >> (traced.len() - 1 - i) & 1 == 1 {
                    idx |= 1 << kernel::bit_of(n, q);
                }
            }
            idx
        };
        let mut out = CMatrix::zeros(kdim);
        for r in 0..kdim {
            for c in 0..kdim {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..tdim {
                    acc += self.rho[(compose(r, t), compose(c, t))];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(DensityMatrix {
            num_qubits: keep.len(),
            rho: out,
        })
    }

    /// `U rho U^dagger` with `U` acting on `targets` (gated by `controls`).
    pub fn apply_unitary(
        &self,
        unitary: &CMatrix,
        targets: &[usize],
        controls: &[Control],
    ) -> Result<DensityMatrix> {
        // vec(rho) as a 2n-qubit vector: ket qubits first, then bra qubits
        let n = self.num_qubits;
        let mut v = self.rho.data().to_vec();
        kernel::apply_matrix(&mut v, 2 * n, 1, unitary, targets, controls)?;
        let bra_targets: Vec<usize> = targets.iter().map(|q| q + n).collect();
        let bra_controls: Vec<Control> = controls.iter().map(|&(q, b)| (q + n, b)).collect();
        kernel::apply_matrix(&mut v, 2 * n, 1, &unitary.conj(), &bra_targets, &bra_controls)?;
        Ok(DensityMatrix {
            num_qubits: n,
            rho: CMatrix::from_vec(self.dim(), v),
        })
    }

    /// Probability that qubit `q` reads 1.
    pub fn prob_one(&self, q: usize) -> Result<f64> {
        kernel::check_targets(self.num_qubits, &[q])?;
        let bit = kernel::bit_of(self.num_qubits, q);
        Ok((0..self.dim())
            .filter(|i| i >> bit & 1 == 1)
            .map(|i| self.rho[(i, i)].re)
            .sum())
    }

    /// Diagonal in the computational basis.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{gates, trace_distance};
    use crate::rng::Rng;

    #[test]
    fn pure_promotion_is_valid() {
        let mut rng = Rng::from_seed(5);
        let psi = StateVector::random(3, &mut rng).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        rho.validate().unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_factors() {
        let mut rng = Rng::from_seed(9);
        let a = DensityMatrix::from_pure(&StateVector::random(2, &mut rng).unwrap()).unwrap();
        let b = DensityMatrix::from_pure(&StateVector::random(1, &mut rng).unwrap()).unwrap();
        let mixed = DensityMatrix::mix(&[0.3, 0.7], &[a.clone(), a.clone()]).unwrap();
        let ab = mixed.tensor(&b).unwrap();
        let back = ab.partial_trace(&[2]).unwrap();
        assert!(trace_distance(&back, &a).unwrap() <= 1e-9);
        let other = ab.partial_trace(&[0, 1]).unwrap();
        assert!(trace_distance(&other, &b).unwrap() <= 1e-9);
    }

    #[test]
    fn unitary_on_density_matches_pure() {
        let mut rng = Rng::from_seed(2);
        let psi = StateVector::random(2, &mut rng).unwrap();
        let u = gates::ry(0.7).kron(&gates::h());
        let via_pure = DensityMatrix::from_pure(&psi.apply_unitary(&u, &[0, 1]).unwrap()).unwrap();
        let via_rho = DensityMatrix::from_pure(&psi)
            .unwrap()
            .apply_unitary(&u, &[0, 1], &[])
            .unwrap();
        assert!(via_pure.matrix().max_abs_diff(via_rho.matrix()) < 1e-12);
    }

    #[test]
    fn rejects_bad_matrices() {
        let m = CMatrix::from_real(2, &[0.5, 0.0, 0.0, 0.6]);
        assert!(matches!(
            DensityMatrix::from_matrix(m).unwrap_err(),
            Error::NotNormalized(_)
        ));
        let m = CMatrix::from_real(2, &[1.5, 0.0, 0.0, -0.5]);
        assert!(matches!(
            DensityMatrix::from_matrix(m).unwrap_err(),
            Error::Invariant(_)
        ));
        assert!(DensityMatrix::maximally_mixed(14).unwrap_err().is_capacity());
    }
}
