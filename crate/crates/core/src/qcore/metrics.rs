use std::collections::BTreeMap;

use super::{DensityMatrix, StateVector};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::policy::policy;

/// Probability table over bitstrings; absent strings have probability 0.
pub type ProbTable = BTreeMap<Bits, f64>;

/// `(1/2) sum |eig(a - b)|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = a.matrix().sub(b.matrix());
    let td = 0.5 * diff.hermitian_eigenvalues().iter().map(|x| x.abs()).sum::<f64>();
    Ok(td.clamp(0.0, 1.0))
}

/// `sqrt(1 - |<a|b>|^2)`, the trace distance between two pure states.
pub fn pure_trace_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    let f = a.fidelity(b)?;
    Ok((1.0 - f).max(0.0).sqrt())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))^2`; equals `|<a|b>|^2` on pure inputs.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (vals, vecs) = a.matrix().hermitian_eigen();
    let d = a.dim();
    let mut sqrt_a = super::CMatrix::zeros(d);
    for (k, &lam) in vals.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        for r in 0..d {
            for c in 0..d {
                sqrt_a[(r, c)] += vecs[(r, k)] * vecs[(c, k)].conj() * s;
            }
        }
    }
    let m = sqrt_a.matmul(b.matrix()).matmul(&sqrt_a);
    let root: f64 = m.hermitian_eigenvalues().iter().map(|x| x.max(0.0).sqrt()).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

fn check_table(t: &ProbTable) -> Result<()> {
    let total: f64 = t.values().sum();
    if (total - 1.0).abs() > policy().probability_tol || t.values().any(|p| *p < 0.0) {
        return Err(Error::NotNormalized(format!("probability table sums to {total}")));
    }
    Ok(())
}

/// `(1/2) sum_x |p_x - q_x|`.
pub fn statistical_distance(p: &ProbTable, q: &ProbTable) -> Result<f64> {
    check_table(p)?;
    check_table(q)?;
    let mut l1 = 0.0;
    for (x, px) in p {
        l1 += (px - q.get(x).copied().unwrap_or(0.0)).abs();
    }
    for (x, qx) in q {
        if !p.contains_key(x) {
            l1 += qx;
        }
    }
    Ok(0.5 * l1)
}
